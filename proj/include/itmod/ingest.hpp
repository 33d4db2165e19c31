#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "itmod/core.hpp"
#include "itmod/profile.hpp"

namespace itmod {

// Maps the logical visit columns onto CSV header names.
struct VisitSchema {
    std::string user_id = "user_id";
    std::string poi_id = "poi_id";
    std::string timestamp = "timestamp";
    std::string seq_id = "seq_id";
    std::string category = "category";
    std::string lat = "lat";
    std::string lon = "lon";
    char delimiter = ',';

    // Parses "user_id=uid,poi_id=poi,..." overrides.
    static VisitSchema from_mapping(const std::string& mapping, char delimiter = ',');
};

struct RejectedRow {
    std::size_t line_number = 0;
    std::string reason;
    std::string raw;
};

struct ParseResult {
    std::vector<Poi> pois;  // sorted by id, visit_freq = distinct (user, seq) visits
    std::vector<Itinerary> itineraries;
    std::vector<RejectedRow> rejects;
};

// Reads a visit CSV and reconstructs one itinerary per (user_id, seq_id),
// POIs ordered by timestamp. Malformed rows land in the reject report.
// Throws SchemaError for missing mandatory columns, CorpusError when no
// valid row survives.
ParseResult parse_visits(const std::filesystem::path& path, const VisitSchema& schema);

// Drops itineraries shorter than min_len; splits itineraries longer than
// `window` into non-overlapping chunks of `window`, keeping a final
// remainder only when it is at least min_len long. Chunk seq_ids get a
// deterministic "#k" suffix. Idempotent.
std::vector<Itinerary> preprocess(const std::vector<Itinerary>& itineraries,
                                  std::size_t min_len = 3, std::size_t window = 21);

// Tertile thresholds (nearest-rank 1/3 and 2/3 percentiles) over the segment
// Haversine distances of all itineraries and over per-POI visit frequencies.
// Throws CorpusError when fewer than 3 distinct segment distances exist.
CorpusProfile profile_corpus(const std::vector<Poi>& pois,
                             const std::vector<Itinerary>& itineraries,
                             const std::string& corpus_name = "corpus");

// Nearest-rank percentile at exact fraction k/3 of the sorted values.
double nearest_rank_third(std::vector<double> values, int k);

// Persisted corpus: pois.json + itineraries.jsonl + profile.json in one
// directory.
struct CorpusBundle {
    std::string name;
    std::map<std::string, Poi> pois;
    std::vector<Itinerary> itineraries;
    CorpusProfile profile;

    std::vector<Poi> poi_list() const;
};

void save_bundle(const std::filesystem::path& dir, const CorpusBundle& bundle);
CorpusBundle load_bundle(const std::filesystem::path& dir);

}  // namespace itmod
