#include "itmod/records.hpp"

#include <fstream>

#include "itmod/util.hpp"

namespace itmod {

namespace {

ordered_json verdict_json(const DisruptionVerdict& v) {
    ordered_json out;
    out["disrupted"] = v.disrupted;
    if (v.h_value) out["hellinger"] = *v.h_value;
    if (v.aspect != Intent::Diversity) out["tau_b"] = v.tau_b ? ordered_json(*v.tau_b) : nullptr;
    if (v.diversity_before) out["diversity_before"] = *v.diversity_before;
    if (v.diversity_after) out["diversity_after"] = *v.diversity_after;
    out["threshold"] = v.threshold_used;
    return out;
}

DisruptionVerdict verdict_from_json(Intent aspect, const ordered_json& row) {
    DisruptionVerdict v;
    v.aspect = aspect;
    v.disrupted = row.at("disrupted").get<bool>();
    if (row.contains("hellinger")) v.h_value = row.at("hellinger").get<double>();
    if (row.contains("tau_b") && !row.at("tau_b").is_null())
        v.tau_b = row.at("tau_b").get<double>();
    if (row.contains("diversity_before"))
        v.diversity_before = row.at("diversity_before").get<double>();
    if (row.contains("diversity_after"))
        v.diversity_after = row.at("diversity_after").get<double>();
    if (row.contains("threshold")) v.threshold_used = row.at("threshold").get<double>();
    return v;
}

}  // namespace

ordered_json record_to_json(const PerturbationRecord& record, const std::string& corpus) {
    ordered_json row;
    row["schema_version"] = kRecordSchemaVersion;
    row["corpus"] = corpus;
    row["seq_id"] = record.original.seq_id;
    row["op"] = to_string(record.op);
    ordered_json intents = ordered_json::array();
    for (Intent z : record.intents.to_vector()) intents.push_back(to_string(z));
    row["intents"] = intents;
    row["position"] = record.position;
    row["poi_in"] = record.poi_in ? ordered_json(record.poi_in->id) : nullptr;
    row["poi_out"] = record.poi_out ? ordered_json(record.poi_out->id) : nullptr;
    row["original"] = poi_ids(record.original);
    row["perturbed"] = poi_ids(record.perturbed);
    ordered_json verdicts = ordered_json::object();
    for (const auto& [aspect, disrupted] : record.verdicts)
        verdicts[to_string(aspect)] = disrupted;
    row["verdicts"] = verdicts;
    ordered_json diagnostics = ordered_json::object();
    for (const auto& [aspect, verdict] : record.diagnostics)
        diagnostics[to_string(aspect)] = verdict_json(verdict);
    row["diagnostics"] = diagnostics;
    return row;
}

PerturbationRecord record_from_json(const ordered_json& row,
                                    const std::map<std::string, Poi>& poi_index) {
    auto resolve = [&poi_index](const std::string& id) -> Poi {
        const auto it = poi_index.find(id);
        if (it == poi_index.end()) throw CorpusError("record references unknown poi " + id);
        return it->second;
    };

    const std::string seq_id = row.at("seq_id").get<std::string>();
    Itinerary original;
    original.seq_id = seq_id;
    for (const auto& id : row.at("original")) original.pois.push_back(resolve(id));

    std::vector<Intent> intents;
    for (const auto& z : row.at("intents")) intents.push_back(intent_from_string(z));

    const Operation op = operation_from_string(row.at("op").get<std::string>());
    const auto position = row.at("position").get<std::size_t>();
    std::optional<Poi> poi_in;
    if (!row.at("poi_in").is_null()) poi_in = resolve(row.at("poi_in").get<std::string>());

    PerturbationRecord record =
        make_record(original, op, position, poi_in, IntentSet::from_vector(intents));

    // Cross-check the persisted perturbed sequence against the recomputed one.
    std::vector<std::string> persisted;
    for (const auto& id : row.at("perturbed")) persisted.push_back(id.get<std::string>());
    if (persisted != poi_ids(record.perturbed))
        throw DomainError("record " + seq_id + ": perturbed sequence does not match op/position");
    if (!row.at("poi_out").is_null()) {
        if (!record.poi_out || record.poi_out->id != row.at("poi_out").get<std::string>())
            throw DomainError("record " + seq_id + ": poi_out mismatch");
    } else if (record.poi_out) {
        throw DomainError("record " + seq_id + ": poi_out missing");
    }

    if (row.contains("verdicts")) {
        for (const auto& [key, value] : row.at("verdicts").items())
            record.verdicts[intent_from_string(key)] = value.get<bool>();
    }
    if (row.contains("diagnostics")) {
        for (const auto& [key, value] : row.at("diagnostics").items()) {
            const Intent aspect = intent_from_string(key);
            record.diagnostics[aspect] = verdict_from_json(aspect, value);
        }
    }
    return record;
}

std::vector<ordered_json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open " + path.string());
    std::vector<ordered_json> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(ordered_json::parse(line));
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<ordered_json>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw CorpusError("cannot write " + path.string());
    for (const auto& row : rows) out << row.dump() << "\n";
}

}  // namespace itmod
