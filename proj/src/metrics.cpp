#include "itmod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "itmod/util.hpp"

namespace itmod {

LevelHistogram LevelHistogram::from_counts(std::uint64_t low, std::uint64_t med,
                                           std::uint64_t high) {
    const std::uint64_t total = low + med + high;
    if (total == 0) throw DomainError("level histogram: empty label set");
    const auto t = static_cast<std::int64_t>(total);
    return LevelHistogram(Rational(static_cast<std::int64_t>(low), t),
                          Rational(static_cast<std::int64_t>(med), t),
                          Rational(static_cast<std::int64_t>(high), t));
}

LevelHistogram LevelHistogram::from_labels(std::span<const Level> labels) {
    if (labels.empty()) throw DomainError("level histogram: empty label list");
    std::uint64_t counts[3] = {0, 0, 0};
    for (Level l : labels) counts[static_cast<int>(l)]++;
    return from_counts(counts[0], counts[1], counts[2]);
}

LevelHistogram LevelHistogram::from_fractions(Rational low, Rational med, Rational high) {
    for (const Rational& r : {low, med, high}) {
        if (r < Rational(0, 1) || Rational(1, 1) < r)
            throw DomainError("level histogram: component outside [0,1]");
    }
    if (low + med + high != Rational(1, 1))
        throw DomainError("level histogram: components must sum to 1");
    return LevelHistogram(low, med, high);
}

std::array<double, 3> LevelHistogram::to_doubles() const {
    return {low_.to_double(), med_.to_double(), high_.to_double()};
}

Rational category_diversity_exact(std::span<const std::string> categories) {
    if (categories.empty()) throw DomainError("category diversity: empty category list");
    std::set<std::string> unique;
    for (const auto& c : categories) unique.insert(to_lower(trim(c)));
    if (unique.size() == 1) return Rational(0, 1);
    return Rational(static_cast<std::int64_t>(unique.size()),
                    static_cast<std::int64_t>(categories.size()));
}

double category_diversity(std::span<const std::string> categories) {
    return category_diversity_exact(categories).to_double();
}

double hellinger(const LevelHistogram& p, const LevelHistogram& q) {
    const auto pv = p.to_doubles();
    const auto qv = q.to_doubles();
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = std::sqrt(pv[k]) - std::sqrt(qv[k]);
        sum += d * d;
    }
    return std::sqrt(sum) / std::sqrt(2.0);
}

double jsd(const LevelHistogram& p, const LevelHistogram& q, double log_base) {
    if (log_base <= 0.0 || log_base == 1.0) throw ParameterError("jsd: bad log base");
    const auto pv = p.to_doubles();
    const auto qv = q.to_doubles();
    const double scale = 1.0 / std::log(log_base);
    double kl_p = 0.0, kl_q = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double m = 0.5 * (pv[k] + qv[k]);
        if (pv[k] > 0.0) kl_p += pv[k] * std::log(pv[k] / m) * scale;
        if (qv[k] > 0.0) kl_q += qv[k] * std::log(qv[k] / m) * scale;
    }
    return 0.5 * (kl_p + kl_q);
}

double tvd(const LevelHistogram& p, const LevelHistogram& q) {
    const auto pv = p.to_doubles();
    const auto qv = q.to_doubles();
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) sum += std::abs(pv[k] - qv[k]);
    return 0.5 * sum;
}

namespace {

// Counts swaps needed to sort `y` (already ordered by x) via merge sort;
// each swap is one discordant pair.
std::int64_t merge_count(std::vector<int>& v, std::vector<int>& buf, std::size_t lo,
                         std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += static_cast<std::int64_t>(mid - i);
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
              buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

template <typename Pred>
std::int64_t tie_pairs(const std::vector<std::pair<int, int>>& sorted, Pred same_group) {
    std::int64_t pairs = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= sorted.size(); ++i) {
        if (i < sorted.size() && same_group(sorted[i - 1], sorted[i])) {
            ++run;
        } else {
            pairs += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
            run = 1;
        }
    }
    return pairs;
}

}  // namespace

KendallCounts kendall_counts(std::span<const int> x, std::span<const int> y) {
    if (x.size() != y.size()) throw ParameterError("kendall: sequence length mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw ParameterError("kendall: need at least 2 observations");

    std::vector<std::pair<int, int>> pairs(n);
    for (std::size_t i = 0; i < n; ++i) pairs[i] = {x[i], y[i]};
    std::sort(pairs.begin(), pairs.end());

    KendallCounts c;
    c.total_pairs = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
    c.tied_x = tie_pairs(pairs, [](const auto& a, const auto& b) { return a.first == b.first; });
    c.tied_both = tie_pairs(pairs, [](const auto& a, const auto& b) { return a == b; });

    std::vector<int> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = pairs[i].second;
    {
        std::vector<std::pair<int, int>> by_y(n);
        for (std::size_t i = 0; i < n; ++i) by_y[i] = {ys[i], 0};
        std::sort(by_y.begin(), by_y.end());
        c.tied_y = tie_pairs(by_y, [](const auto& a, const auto& b) { return a.first == b.first; });
    }

    std::vector<int> buf(n);
    c.discordant = merge_count(ys, buf, 0, n);
    // Pairs untied in both variables split into concordant and discordant.
    c.concordant = c.total_pairs - c.tied_x - c.tied_y + c.tied_both - c.discordant;
    return c;
}

std::optional<double> kendall_tau_b(std::span<const int> x, std::span<const int> y) {
    const KendallCounts c = kendall_counts(x, y);
    const std::int64_t dx = c.total_pairs - c.tied_x;
    const std::int64_t dy = c.total_pairs - c.tied_y;
    if (dx == 0 || dy == 0) return std::nullopt;
    return static_cast<double>(c.concordant - c.discordant) /
           std::sqrt(static_cast<double>(dx) * static_cast<double>(dy));
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    const double deg = std::acos(-1.0) / 180.0;
    const double dlat = (lat2 - lat1) * deg;
    const double dlon = (lon2 - lon1) * deg;
    const double s1 = std::sin(dlat / 2.0);
    const double s2 = std::sin(dlon / 2.0);
    double a = s1 * s1 + s2 * s2 * std::cos(lat1 * deg) * std::cos(lat2 * deg);
    a = std::clamp(a, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::atan2(std::sqrt(a), std::sqrt(1.0 - a));
}

}  // namespace itmod
