#include "itmod/core.hpp"

#include <algorithm>
#include <set>

#include "itmod/util.hpp"

namespace itmod {

const char* to_string(Operation op) {
    switch (op) {
        case Operation::Add: return "add";
        case Operation::Delete: return "delete";
        case Operation::Replace: return "replace";
    }
    return "?";
}

const char* to_string(Intent z) {
    switch (z) {
        case Intent::Popularity: return "popularity";
        case Intent::Distance: return "distance";
        case Intent::Diversity: return "diversity";
    }
    return "?";
}

const char* to_string(Level l) {
    switch (l) {
        case Level::Low: return "low";
        case Level::Medium: return "medium";
        case Level::High: return "high";
    }
    return "?";
}

Operation operation_from_string(const std::string& s) {
    if (s == "add") return Operation::Add;
    if (s == "delete") return Operation::Delete;
    if (s == "replace") return Operation::Replace;
    throw DomainError("unknown operation: " + s);
}

Intent intent_from_string(const std::string& s) {
    if (s == "popularity") return Intent::Popularity;
    if (s == "distance") return Intent::Distance;
    if (s == "diversity") return Intent::Diversity;
    throw DomainError("unknown intent: " + s);
}

Level level_from_string(const std::string& s) {
    if (s == "low") return Level::Low;
    if (s == "medium") return Level::Medium;
    if (s == "high") return Level::High;
    throw DomainError("unknown level: " + s);
}

void validate(const Poi& poi) {
    if (trim(poi.id).empty()) throw DomainError("poi: empty id");
    if (poi.lat < -90.0 || poi.lat > 90.0)
        throw DomainError("poi " + poi.id + ": latitude out of range");
    if (poi.lon < -180.0 || poi.lon > 180.0)
        throw DomainError("poi " + poi.id + ": longitude out of range");
    if (trim(poi.category).empty()) throw DomainError("poi " + poi.id + ": empty category");
}

bool Itinerary::contains_poi(const std::string& poi_id) const {
    return std::any_of(pois.begin(), pois.end(),
                       [&](const Poi& p) { return p.id == poi_id; });
}

std::vector<std::string> poi_ids(const Itinerary& itinerary) {
    std::vector<std::string> ids;
    ids.reserve(itinerary.pois.size());
    for (const auto& p : itinerary.pois) ids.push_back(p.id);
    return ids;
}

std::string serialize_ids(const Itinerary& itinerary) {
    std::string out = "[";
    for (std::size_t k = 0; k < itinerary.pois.size(); ++k) {
        if (k > 0) out += ",";
        out += '"';
        out += itinerary.pois[k].id;
        out += '"';
    }
    out += "]";
    return out;
}

IntentSet IntentSet::of(std::initializer_list<Intent> intents) {
    IntentSet z;
    for (Intent i : intents) z.add(i);
    z.validate();
    return z;
}

IntentSet IntentSet::from_vector(const std::vector<Intent>& intents) {
    IntentSet z;
    for (Intent i : intents) z.add(i);
    z.validate();
    return z;
}

int IntentSet::size() const {
    int n = 0;
    for (unsigned m = mask_; m != 0; m >>= 1) n += static_cast<int>(m & 1u);
    return n;
}

std::vector<Intent> IntentSet::to_vector() const {
    std::vector<Intent> out;
    for (Intent z : {Intent::Popularity, Intent::Distance, Intent::Diversity}) {
        if (contains(z)) out.push_back(z);
    }
    return out;
}

void IntentSet::validate() const {
    const int n = size();
    if (n < 1 || n > 3) throw DomainError("intent set must contain 1..3 distinct intents");
}

CandidatePool candidate_pool(const std::vector<Poi>& corpus_pois, const Itinerary& itinerary) {
    if (corpus_pois.empty()) throw DomainError("candidate_pool: empty corpus POI set");
    std::set<std::string> in_itinerary;
    for (const auto& p : itinerary.pois) in_itinerary.insert(p.id);

    CandidatePool pool;
    for (const auto& p : corpus_pois) {
        if (!in_itinerary.count(p.id)) pool.pois.push_back(p);
    }
    std::sort(pool.pois.begin(), pool.pois.end(),
              [](const Poi& a, const Poi& b) { return a.id < b.id; });
    pool.pois.erase(std::unique(pool.pois.begin(), pool.pois.end(),
                                [](const Poi& a, const Poi& b) { return a.id == b.id; }),
                    pool.pois.end());
    return pool;
}

CandidatePool candidate_pool(const std::map<std::string, Poi>& corpus_pois,
                             const Itinerary& itinerary) {
    std::vector<Poi> flat;
    flat.reserve(corpus_pois.size());
    for (const auto& [id, poi] : corpus_pois) flat.push_back(poi);
    return candidate_pool(flat, itinerary);
}

Itinerary apply_operation(const Itinerary& itinerary, Operation op, std::size_t position,
                          const std::optional<Poi>& poi_in) {
    Itinerary out = itinerary;
    switch (op) {
        case Operation::Add:
            if (position > itinerary.size())
                throw DomainError("add: position out of range [0, |i|]");
            if (!poi_in) throw DomainError("add: poi_in required");
            out.pois.insert(out.pois.begin() + static_cast<std::ptrdiff_t>(position), *poi_in);
            break;
        case Operation::Delete:
            if (position >= itinerary.size())
                throw DomainError("delete: position out of range [0, |i|-1]");
            if (poi_in) throw DomainError("delete: poi_in must be absent");
            out.pois.erase(out.pois.begin() + static_cast<std::ptrdiff_t>(position));
            break;
        case Operation::Replace:
            if (position >= itinerary.size())
                throw DomainError("replace: position out of range [0, |i|-1]");
            if (!poi_in) throw DomainError("replace: poi_in required");
            out.pois[position] = *poi_in;
            break;
    }
    return out;
}

PerturbationRecord make_record(const Itinerary& original, Operation op, std::size_t position,
                               const std::optional<Poi>& poi_in, const IntentSet& intents) {
    intents.validate();
    PerturbationRecord rec;
    rec.original = original;
    rec.op = op;
    rec.position = position;
    rec.intents = intents;

    if (op == Operation::Add || op == Operation::Replace) {
        if (!poi_in) throw DomainError(std::string(to_string(op)) + ": poi_in required");
        if (original.contains_poi(poi_in->id))
            throw DomainError(std::string(to_string(op)) + ": poi_in " + poi_in->id +
                              " already in itinerary (must come from the candidate pool)");
        rec.poi_in = poi_in;
    } else if (poi_in) {
        throw DomainError("delete: poi_in must be absent");
    }

    if (op == Operation::Delete || op == Operation::Replace) {
        if (position >= original.size())
            throw DomainError(std::string(to_string(op)) + ": position out of range");
        rec.poi_out = original.pois[position];
    }
    if (op == Operation::Delete && original.size() < 3)
        throw DomainError("delete: itinerary must keep at least 2 POIs");

    rec.perturbed = apply_operation(original, op, position, rec.poi_in);
    rec.perturbed.seq_id = original.seq_id;
    rec.perturbed.user_id = original.user_id;
    return rec;
}

Itinerary revert(const PerturbationRecord& record) {
    switch (record.op) {
        case Operation::Add:
            return apply_operation(record.perturbed, Operation::Delete, record.position,
                                   std::nullopt);
        case Operation::Delete:
            if (!record.poi_out) throw DomainError("revert delete: poi_out missing");
            return apply_operation(record.perturbed, Operation::Add, record.position,
                                   record.poi_out);
        case Operation::Replace:
            if (!record.poi_out) throw DomainError("revert replace: poi_out missing");
            return apply_operation(record.perturbed, Operation::Replace, record.position,
                                   record.poi_out);
    }
    throw DomainError("revert: bad operation");
}

bool round_trips(const PerturbationRecord& record) {
    return serialize_ids(revert(record)) == serialize_ids(record.original);
}

}  // namespace itmod
