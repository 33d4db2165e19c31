#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "itmod/errors.hpp"

namespace itmod {

// Perturbation/modification edit applied to an itinerary.
enum class Operation { Add, Delete, Replace };

// Itinerary attribute a perturbation is meant to disrupt.
enum class Intent { Popularity, Distance, Diversity };

// Ordinal level used for popularity and segment-distance binning.
// The encoding Low=0 < Medium=1 < High=2 is relied on by rank correlation.
enum class Level : int { Low = 0, Medium = 1, High = 2 };

const char* to_string(Operation op);
const char* to_string(Intent z);
const char* to_string(Level l);
Operation operation_from_string(const std::string& s);
Intent intent_from_string(const std::string& s);
Level level_from_string(const std::string& s);

struct Poi {
    std::string id;
    std::string category;
    double lat = 0.0;
    double lon = 0.0;
    std::uint64_t visit_freq = 0;
};

// Throws DomainError on out-of-range coordinates, blank category/id.
void validate(const Poi& poi);

struct Itinerary {
    std::string seq_id;
    std::string user_id;
    std::vector<Poi> pois;

    std::size_t size() const { return pois.size(); }
    bool contains_poi(const std::string& poi_id) const;
};

std::vector<std::string> poi_ids(const Itinerary& itinerary);
// Canonical serialization: JSON array of POI ids. Byte-stable; used for the
// round-trip identity checks.
std::string serialize_ids(const Itinerary& itinerary);

// Non-empty subset of the three intents. Value type, canonical order
// Popularity < Distance < Diversity.
class IntentSet {
public:
    IntentSet() = default;

    static IntentSet of(std::initializer_list<Intent> intents);
    static IntentSet from_vector(const std::vector<Intent>& intents);

    bool contains(Intent z) const { return (mask_ & bit(z)) != 0; }
    int size() const;
    bool empty() const { return mask_ == 0; }
    std::vector<Intent> to_vector() const;

    // Throws DomainError unless 1 <= size <= 3.
    void validate() const;

    friend bool operator==(const IntentSet& a, const IntentSet& b) { return a.mask_ == b.mask_; }
    friend bool operator!=(const IntentSet& a, const IntentSet& b) { return a.mask_ != b.mask_; }
    friend bool operator<(const IntentSet& a, const IntentSet& b) { return a.mask_ < b.mask_; }

private:
    static unsigned bit(Intent z) { return 1u << static_cast<unsigned>(z); }
    void add(Intent z) { mask_ |= bit(z); }
    unsigned mask_ = 0;
};

// Per-aspect disruption decision with its supporting numbers.
// h_value/tau_b are set for popularity and distance; diversity carries the
// before/after diversity ratios instead. tau_b is empty when the rank
// correlation is undefined (all pairs tied in one variable).
struct DisruptionVerdict {
    Intent aspect = Intent::Popularity;
    bool disrupted = false;
    std::optional<double> h_value;
    std::optional<double> tau_b;
    std::optional<double> diversity_before;
    std::optional<double> diversity_after;
    double threshold_used = 0.0;
};

// Pool of corpus POIs not present in a given itinerary, sorted by id.
struct CandidatePool {
    std::vector<Poi> pois;

    bool empty() const { return pois.empty(); }
    std::size_t size() const { return pois.size(); }
};

// One row of the synthesized dataset: an original itinerary, its perturbed
// version, the edit that produced it, and the verification outcome.
struct PerturbationRecord {
    Itinerary original;
    Itinerary perturbed;
    Operation op = Operation::Add;
    IntentSet intents;
    // Zero-based. Add: insert-before index in [0, |i|]. Delete/Replace:
    // element index in [0, |i|-1].
    std::size_t position = 0;
    std::optional<Poi> poi_in;
    std::optional<Poi> poi_out;
    std::map<Intent, bool> verdicts;
    std::map<Intent, DisruptionVerdict> diagnostics;
};

// corpus_pois minus the itinerary's POI ids; exclusion is by id, so repeated
// visits in the itinerary do not matter. Result sorted by id.
CandidatePool candidate_pool(const std::vector<Poi>& corpus_pois, const Itinerary& itinerary);
CandidatePool candidate_pool(const std::map<std::string, Poi>& corpus_pois,
                             const Itinerary& itinerary);

// Applies op at position. Add/Replace require poi_in. Throws DomainError on
// bad position or missing/forbidden POI arguments.
Itinerary apply_operation(const Itinerary& itinerary, Operation op, std::size_t position,
                          const std::optional<Poi>& poi_in);

// Builds a structurally validated record (without verdicts). poi_out is
// taken from the original for Delete/Replace. Enforces: poi_in not already
// in the itinerary, Delete keeps at least 2 POIs.
PerturbationRecord make_record(const Itinerary& original, Operation op, std::size_t position,
                               const std::optional<Poi>& poi_in, const IntentSet& intents);

// Applies the inverse edit to `perturbed`; must reconstruct `original`.
Itinerary revert(const PerturbationRecord& record);

// True iff revert(record) serializes byte-identically to record.original.
bool round_trips(const PerturbationRecord& record);

}  // namespace itmod
