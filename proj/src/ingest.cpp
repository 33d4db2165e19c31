#include "itmod/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "itmod/metrics.hpp"
#include "itmod/util.hpp"

namespace itmod {

using ordered_json = nlohmann::ordered_json;

VisitSchema VisitSchema::from_mapping(const std::string& mapping, char delimiter) {
    VisitSchema schema;
    schema.delimiter = delimiter;
    if (trim(mapping).empty()) return schema;
    for (const std::string& pair : split(mapping, ',')) {
        const auto kv = split(pair, '=');
        if (kv.size() != 2) throw SchemaError("bad schema mapping entry: " + pair);
        const std::string key = trim(kv[0]);
        const std::string value = trim(kv[1]);
        if (value.empty()) throw SchemaError("empty column name for " + key);
        if (key == "user_id") schema.user_id = value;
        else if (key == "poi_id") schema.poi_id = value;
        else if (key == "timestamp") schema.timestamp = value;
        else if (key == "seq_id") schema.seq_id = value;
        else if (key == "category") schema.category = value;
        else if (key == "lat") schema.lat = value;
        else if (key == "lon") schema.lon = value;
        else throw SchemaError("unknown schema field: " + key);
    }
    return schema;
}

namespace {

// Splits one CSV line; supports double-quoted fields with "" escapes.
std::vector<std::string> parse_csv_line(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == delim) {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(t, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == t.size() && std::isfinite(out);
}

struct VisitRow {
    std::string user_id, poi_id, seq_id, category, timestamp;
    double lat = 0.0, lon = 0.0;
    std::size_t input_order = 0;
};

// Numeric when both sides parse as numbers, lexicographic otherwise (covers
// ISO-8601 timestamps, which sort correctly as strings).
bool timestamp_less(const std::string& a, const std::string& b) {
    double da = 0.0, db = 0.0;
    if (parse_double(a, da) && parse_double(b, db)) return da < db;
    return a < b;
}

}  // namespace

ParseResult parse_visits(const std::filesystem::path& path, const VisitSchema& schema) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open input file: " + path.string());

    std::string header_line;
    if (!std::getline(in, header_line)) throw CorpusError("empty input file: " + path.string());
    const auto header = parse_csv_line(header_line, schema.delimiter);

    auto column = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return i;
        }
        throw SchemaError("missing mandatory column: " + name);
    };
    const std::size_t c_user = column(schema.user_id);
    const std::size_t c_poi = column(schema.poi_id);
    const std::size_t c_ts = column(schema.timestamp);
    const std::size_t c_seq = column(schema.seq_id);
    const std::size_t c_cat = column(schema.category);
    const std::size_t c_lat = column(schema.lat);
    const std::size_t c_lon = column(schema.lon);
    const std::size_t needed =
        1 + std::max({c_user, c_poi, c_ts, c_seq, c_cat, c_lat, c_lon});

    ParseResult result;
    std::vector<VisitRow> rows;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = parse_csv_line(line, schema.delimiter);
        auto reject = [&](const std::string& reason) {
            result.rejects.push_back({line_no, reason, line});
        };
        if (fields.size() < needed) {
            reject("too few columns");
            continue;
        }
        VisitRow row;
        row.user_id = trim(fields[c_user]);
        row.poi_id = trim(fields[c_poi]);
        row.seq_id = trim(fields[c_seq]);
        row.category = trim(fields[c_cat]);
        row.timestamp = trim(fields[c_ts]);
        if (row.user_id.empty() || row.seq_id.empty()) {
            reject("empty user/sequence id");
            continue;
        }
        if (row.poi_id.empty()) {
            reject("empty poi id");
            continue;
        }
        if (row.category.empty()) {
            reject("empty category");
            continue;
        }
        if (!parse_double(fields[c_lat], row.lat) || !parse_double(fields[c_lon], row.lon)) {
            reject("unparseable coordinate");
            continue;
        }
        if (row.lat < -90.0 || row.lat > 90.0 || row.lon < -180.0 || row.lon > 180.0) {
            reject("coordinate out of range");
            continue;
        }
        row.input_order = rows.size();
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw CorpusError("no valid rows in " + path.string());

    // POI registry: first valid occurrence fixes category/coordinates.
    std::map<std::string, Poi> poi_map;
    for (const auto& row : rows) {
        if (!poi_map.count(row.poi_id)) {
            poi_map[row.poi_id] = Poi{row.poi_id, row.category, row.lat, row.lon, 0};
        }
    }

    // Group rows into (user, seq) visits ordered by timestamp.
    std::map<std::pair<std::string, std::string>, std::vector<const VisitRow*>> groups;
    for (const auto& row : rows) groups[{row.user_id, row.seq_id}].push_back(&row);

    std::map<std::string, std::set<std::pair<std::string, std::string>>> visits_per_poi;
    for (auto& [key, group] : groups) {
        std::stable_sort(group.begin(), group.end(), [](const VisitRow* a, const VisitRow* b) {
            if (a->timestamp != b->timestamp) return timestamp_less(a->timestamp, b->timestamp);
            return a->input_order < b->input_order;
        });
        Itinerary itinerary;
        itinerary.user_id = key.first;
        itinerary.seq_id = key.second;
        for (const VisitRow* row : group) {
            itinerary.pois.push_back(poi_map.at(row->poi_id));
            visits_per_poi[row->poi_id].insert(key);
        }
        result.itineraries.push_back(std::move(itinerary));
    }

    for (auto& [id, poi] : poi_map) {
        poi.visit_freq = visits_per_poi[id].size();
        result.pois.push_back(poi);
    }
    // visit_freq was filled after grouping, so refresh the POI copies held
    // by the itineraries.
    for (auto& itinerary : result.itineraries) {
        for (auto& poi : itinerary.pois) poi.visit_freq = poi_map.at(poi.id).visit_freq;
    }
    return result;
}

std::vector<Itinerary> preprocess(const std::vector<Itinerary>& itineraries, std::size_t min_len,
                                  std::size_t window) {
    if (min_len < 3) throw ParameterError("preprocess: min_len must be >= 3");
    if (window < min_len) throw ParameterError("preprocess: window must be >= min_len");

    std::vector<Itinerary> out;
    for (const auto& itinerary : itineraries) {
        const std::size_t n = itinerary.size();
        if (n < min_len) continue;
        if (n <= window) {
            out.push_back(itinerary);
            continue;
        }
        std::size_t chunk_index = 0;
        for (std::size_t start = 0; start < n; start += window, ++chunk_index) {
            const std::size_t len = std::min(window, n - start);
            if (len < min_len) break;  // drop short remainder
            Itinerary chunk;
            chunk.user_id = itinerary.user_id;
            chunk.seq_id = itinerary.seq_id + "#" + std::to_string(chunk_index);
            chunk.pois.assign(itinerary.pois.begin() + static_cast<std::ptrdiff_t>(start),
                              itinerary.pois.begin() + static_cast<std::ptrdiff_t>(start + len));
            out.push_back(std::move(chunk));
        }
    }
    return out;
}

double nearest_rank_third(std::vector<double> values, int k) {
    if (values.empty()) throw ParameterError("percentile of empty set");
    if (k < 1 || k > 2) throw ParameterError("tertile index must be 1 or 2");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    // nearest-rank at exact fraction k/3: rank = ceil(k*n/3)
    const std::size_t rank = (static_cast<std::size_t>(k) * n + 2) / 3;
    return values[rank - 1];
}

CorpusProfile profile_corpus(const std::vector<Poi>& pois,
                             const std::vector<Itinerary>& itineraries,
                             const std::string& corpus_name) {
    if (pois.empty()) throw CorpusError("profile: no POIs");
    if (itineraries.empty()) throw CorpusError("profile: no itineraries");

    std::vector<double> segment_km;
    for (const auto& itinerary : itineraries) {
        if (itinerary.size() < 2)
            throw DomainError("profile: itinerary " + itinerary.seq_id + " has fewer than 2 POIs");
        for (std::size_t k = 0; k + 1 < itinerary.size(); ++k) {
            const Poi& a = itinerary.pois[k];
            const Poi& b = itinerary.pois[k + 1];
            segment_km.push_back(haversine_km(a.lat, a.lon, b.lat, b.lon));
        }
    }
    std::set<double> distinct(segment_km.begin(), segment_km.end());
    if (distinct.size() < 3)
        throw CorpusError("profile: fewer than 3 distinct segment distances (degenerate corpus)");

    std::vector<double> freqs;
    freqs.reserve(pois.size());
    for (const auto& poi : pois) freqs.push_back(static_cast<double>(poi.visit_freq));

    CorpusProfile profile;
    profile.source_corpus = corpus_name;
    profile.n_pois = pois.size();
    profile.n_itineraries = itineraries.size();
    profile.pop_t1 = nearest_rank_third(freqs, 1);
    profile.pop_t2 = nearest_rank_third(freqs, 2);
    profile.dist_t1 = nearest_rank_third(segment_km, 1);
    profile.dist_t2 = nearest_rank_third(segment_km, 2);
    validate(profile);
    return profile;
}

void validate(const CorpusProfile& profile) {
    if (profile.pop_t1 > profile.pop_t2)
        throw DomainError("profile: popularity thresholds out of order");
    if (profile.dist_t1 > profile.dist_t2)
        throw DomainError("profile: distance thresholds out of order");
}

std::vector<Poi> CorpusBundle::poi_list() const {
    std::vector<Poi> out;
    out.reserve(pois.size());
    for (const auto& [id, poi] : pois) out.push_back(poi);
    return out;
}

void save_bundle(const std::filesystem::path& dir, const CorpusBundle& bundle) {
    std::filesystem::create_directories(dir);

    ordered_json pois_json = ordered_json::array();
    for (const auto& [id, poi] : bundle.pois) {
        pois_json.push_back({{"id", poi.id},
                             {"category", poi.category},
                             {"lat", poi.lat},
                             {"lon", poi.lon},
                             {"visit_freq", poi.visit_freq}});
    }
    std::ofstream pois_out(dir / "pois.json");
    pois_out << pois_json.dump(2) << "\n";

    std::ofstream itin_out(dir / "itineraries.jsonl");
    for (const auto& itinerary : bundle.itineraries) {
        ordered_json row = {{"seq_id", itinerary.seq_id},
                            {"user_id", itinerary.user_id},
                            {"pois", poi_ids(itinerary)}};
        itin_out << row.dump() << "\n";
    }

    ordered_json profile_json = {
        {"schema_version", 1},
        {"source_corpus", bundle.profile.source_corpus},
        {"n_pois", bundle.profile.n_pois},
        {"n_itineraries", bundle.profile.n_itineraries},
        {"pop_thresholds", {bundle.profile.pop_t1, bundle.profile.pop_t2}},
        {"dist_thresholds", {bundle.profile.dist_t1, bundle.profile.dist_t2}},
    };
    std::ofstream profile_out(dir / "profile.json");
    profile_out << profile_json.dump(2) << "\n";
}

CorpusBundle load_bundle(const std::filesystem::path& dir) {
    CorpusBundle bundle;

    std::ifstream pois_in(dir / "pois.json");
    if (!pois_in) throw CorpusError("bundle: missing pois.json in " + dir.string());
    ordered_json pois_json;
    pois_in >> pois_json;
    for (const auto& entry : pois_json) {
        Poi poi{entry.at("id").get<std::string>(), entry.at("category").get<std::string>(),
                entry.at("lat").get<double>(), entry.at("lon").get<double>(),
                entry.at("visit_freq").get<std::uint64_t>()};
        validate(poi);
        bundle.pois[poi.id] = std::move(poi);
    }

    std::ifstream itin_in(dir / "itineraries.jsonl");
    if (!itin_in) throw CorpusError("bundle: missing itineraries.jsonl in " + dir.string());
    std::string line;
    while (std::getline(itin_in, line)) {
        if (trim(line).empty()) continue;
        const ordered_json row = ordered_json::parse(line);
        Itinerary itinerary;
        itinerary.seq_id = row.at("seq_id").get<std::string>();
        itinerary.user_id = row.at("user_id").get<std::string>();
        for (const auto& id : row.at("pois")) {
            const auto it = bundle.pois.find(id.get<std::string>());
            if (it == bundle.pois.end())
                throw CorpusError("bundle: itinerary " + itinerary.seq_id +
                                  " references unknown poi " + id.get<std::string>());
            itinerary.pois.push_back(it->second);
        }
        bundle.itineraries.push_back(std::move(itinerary));
    }

    std::ifstream profile_in(dir / "profile.json");
    if (!profile_in) throw CorpusError("bundle: missing profile.json in " + dir.string());
    ordered_json profile_json;
    profile_in >> profile_json;
    bundle.profile.source_corpus = profile_json.at("source_corpus").get<std::string>();
    bundle.profile.n_pois = profile_json.at("n_pois").get<std::size_t>();
    bundle.profile.n_itineraries = profile_json.at("n_itineraries").get<std::size_t>();
    bundle.profile.pop_t1 = profile_json.at("pop_thresholds").at(0).get<double>();
    bundle.profile.pop_t2 = profile_json.at("pop_thresholds").at(1).get<double>();
    bundle.profile.dist_t1 = profile_json.at("dist_thresholds").at(0).get<double>();
    bundle.profile.dist_t2 = profile_json.at("dist_thresholds").at(1).get<double>();
    validate(bundle.profile);
    bundle.name = bundle.profile.source_corpus;
    return bundle;
}

}  // namespace itmod
