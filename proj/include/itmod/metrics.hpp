#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itmod/core.hpp"
#include "itmod/rational.hpp"

namespace itmod {

// Three-bin (low, medium, high) fraction vector. Components are exact
// rationals that sum to exactly 1; conversion to double happens only at the
// metric boundary.
class LevelHistogram {
public:
    static LevelHistogram from_counts(std::uint64_t low, std::uint64_t med, std::uint64_t high);
    static LevelHistogram from_labels(std::span<const Level> labels);
    // Validates each component in [0,1] and an exact sum of 1.
    static LevelHistogram from_fractions(Rational low, Rational med, Rational high);

    const Rational& low() const { return low_; }
    const Rational& med() const { return med_; }
    const Rational& high() const { return high_; }
    std::array<Rational, 3> components() const { return {low_, med_, high_}; }
    std::array<double, 3> to_doubles() const;

    friend bool operator==(const LevelHistogram& a, const LevelHistogram& b) {
        return a.low_ == b.low_ && a.med_ == b.med_ && a.high_ == b.high_;
    }

private:
    LevelHistogram(Rational low, Rational med, Rational high)
        : low_(low), med_(med), high_(high) {}
    Rational low_, med_, high_;
};

// Diversity of a category sequence: 0 when there is exactly one unique
// category (case-insensitive, whitespace-trimmed), otherwise unique/len.
Rational category_diversity_exact(std::span<const std::string> categories);
double category_diversity(std::span<const std::string> categories);

// Hellinger distance, (1/sqrt(2)) * sqrt(sum (sqrt(p)-sqrt(q))^2). In [0,1].
double hellinger(const LevelHistogram& p, const LevelHistogram& q);

// Jensen-Shannon divergence. Log base 2 by default; the frozen reference
// values in the test suite were calibrated under base 2 (natural log does
// not reproduce them), so the default stays fixed.
double jsd(const LevelHistogram& p, const LevelHistogram& q, double log_base = 2.0);

// Total variation distance, (1/2) * sum |p - q|. In [0,1].
double tvd(const LevelHistogram& p, const LevelHistogram& q);

struct KendallCounts {
    std::int64_t concordant = 0;   // n_c
    std::int64_t discordant = 0;   // n_d
    std::int64_t total_pairs = 0;  // n_0 = n(n-1)/2
    std::int64_t tied_x = 0;       // n_1
    std::int64_t tied_y = 0;       // n_2
    std::int64_t tied_both = 0;    // pairs tied in x and y
};

// Pair counts via sort + merge (Knight's algorithm), O(n log n). The naive
// O(n^2) classifier is kept test-side as the independent oracle.
KendallCounts kendall_counts(std::span<const int> x, std::span<const int> y);

// tau_b = (n_c - n_d) / sqrt((n_0 - n_1)(n_0 - n_2)). Empty optional when a
// variable is fully tied (denominator zero), so callers can apply their own
// policy. Throws ParameterError for |x| != |y| or n < 2.
std::optional<double> kendall_tau_b(std::span<const int> x, std::span<const int> y);

inline constexpr double kEarthRadiusKm = 6371.0;

// Great-circle distance in kilometres between two (lat, lon) degree pairs.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

}  // namespace itmod
