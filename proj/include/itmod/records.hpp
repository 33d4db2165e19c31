#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "itmod/core.hpp"

namespace itmod {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kRecordSchemaVersion = 1;

// One dataset row, stable key order:
// {schema_version, corpus, seq_id, op, intents[], position, poi_in, poi_out,
//  original[], perturbed[], verdicts{}, diagnostics{}}
ordered_json record_to_json(const PerturbationRecord& record, const std::string& corpus);

// Rebuilds a record from a row, resolving POI ids against the corpus index.
// Throws DomainError/CorpusError on malformed rows or unknown ids.
PerturbationRecord record_from_json(const ordered_json& row,
                                    const std::map<std::string, Poi>& poi_index);

std::vector<ordered_json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<ordered_json>& rows);

}  // namespace itmod
