#pragma once

#include <cstdint>
#include <string>

#include "itmod/core.hpp"

namespace itmod {

// Hellinger disruption threshold used across the detectors.
inline constexpr double kDefaultTheta = 0.1;

// Corpus-relative tertile thresholds that turn raw visit frequencies and
// segment kilometres into {low, medium, high} levels. Computed once per
// corpus and persisted in the bundle; pure function of the corpus.
struct CorpusProfile {
    std::string source_corpus;
    std::size_t n_pois = 0;
    std::size_t n_itineraries = 0;
    double pop_t1 = 0.0, pop_t2 = 0.0;    // visit-frequency cut points, t1 <= t2
    double dist_t1 = 0.0, dist_t2 = 0.0;  // segment-km cut points, d1 <= d2

    Level popularity_level(std::uint64_t visit_freq) const {
        return bin_value(static_cast<double>(visit_freq), pop_t1, pop_t2);
    }
    Level distance_level(double km) const { return bin_value(km, dist_t1, dist_t2); }

    // v <= t1 -> Low, t1 < v <= t2 -> Medium, v > t2 -> High. When the
    // thresholds collapse (t1 == t2) the boundary value classifies Medium,
    // so a uniform corpus maps entirely to the middle bin.
    static Level bin_value(double v, double t1, double t2) {
        if (v > t2) return Level::High;
        if (v <= t1 && v < t2) return Level::Low;
        return Level::Medium;
    }
};

void validate(const CorpusProfile& profile);

}  // namespace itmod
