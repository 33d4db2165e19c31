#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "itmod/core.hpp"
#include "itmod/metrics.hpp"
#include "itmod/profile.hpp"

namespace itmod {

// One candidate edit before verification.
struct PerturbationDraft {
    Operation op = Operation::Add;
    std::size_t position = 0;
    std::optional<Poi> poi_in;
};

// Full deterministic edit space for one operation: Delete yields |i| drafts,
// Replace |i|*|pool|, Add (|i|+1)*|pool|; position-major, pool sorted by id.
// Throws FeasibilityError naming the violated precondition.
std::vector<PerturbationDraft> enumerate_perturbations(const Itinerary& itinerary,
                                                       const CandidatePool& pool, Operation op,
                                                       std::size_t limit = SIZE_MAX);

// Scans the draft space in a seed-shuffled order and returns the first draft
// whose record passes verification for every intent in z (verdicts and
// diagnostics attached); nullopt when the space is exhausted.
std::optional<PerturbationRecord> find_satisfying(const Itinerary& itinerary,
                                                  const CandidatePool& pool, Operation op,
                                                  const IntentSet& intents,
                                                  const CorpusProfile& profile, double theta,
                                                  std::uint64_t seed);

// Extreme-case popularity distributions for the closed-form analysis:
// a POIs in one level group, the rest in a second, and the affected POI the
// sole member of the third. Exact rational histograms.
//   Delete:  P=(a/n,(n-a-1)/n,1/n)      Q=(a/(n-1),(n-a-1)/(n-1),0)
//   Add:     P=(a/n,(n-a)/n,0)          Q=(a/(n+1),(n-a)/(n+1),1/(n+1))
//   Replace: P=(a/n,(n-a)/n,0)          Q=((a-1)/n,(n-a)/n,1/n)
// Components map to (high, medium, low) slots in that order.
std::pair<LevelHistogram, LevelHistogram> lemma_case(Operation op, std::int64_t n,
                                                     std::int64_t a);

// Closed-form Hellinger distance of lemma_case(op, n, a), evaluated through
// the cancellation-free identities.
double lemma_closed_form(Operation op, std::int64_t n, std::int64_t a);

// Analytic lower bound: 1/sqrt(2n) for Delete/Replace, 1/sqrt(2(n+1)) for Add.
double lemma_lower_bound(Operation op, std::int64_t n);

struct LemmaReport {
    Operation op = Operation::Add;
    std::int64_t n_max = 0;
    std::size_t cases = 0;
    double max_abs_deviation = 0.0;  // |numeric - closed form|
    double min_slack = 0.0;          // min (H - lower bound)
    std::size_t violations = 0;      // closed-form mismatches or bound misses
    // Largest n for which every admissible a keeps H above theta.
    std::int64_t theta_coverage_n_max = 0;
    double theta = 0.0;
};

// Sweeps every admissible (n <= n_max, a) case: numeric Hellinger must match
// the closed form within 1e-12 and meet the lower bound. A failed check
// increments `violations` rather than throwing.
LemmaReport verify_lemma_bounds(Operation op, std::int64_t n_max, double theta = 0.1);

}  // namespace itmod
