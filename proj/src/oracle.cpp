#include "itmod/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "itmod/disruption.hpp"
#include "itmod/util.hpp"

namespace itmod {

namespace {

void check_feasible(const Itinerary& itinerary, const CandidatePool& pool, Operation op) {
    switch (op) {
        case Operation::Delete:
            if (itinerary.size() < 3)
                throw FeasibilityError(
                    "delete infeasible: itinerary shorter than 3 POIs (result would not be "
                    "analyzable)");
            break;
        case Operation::Add:
        case Operation::Replace:
            if (pool.empty())
                throw FeasibilityError(std::string(to_string(op)) +
                                       " infeasible: empty candidate pool");
            // Both sides of the pair must be segment-analyzable.
            if (itinerary.size() < 2)
                throw FeasibilityError(std::string(to_string(op)) +
                                       " infeasible: itinerary shorter than 2 POIs");
            break;
    }
}

std::size_t draft_space_size(const Itinerary& itinerary, const CandidatePool& pool,
                             Operation op) {
    switch (op) {
        case Operation::Delete: return itinerary.size();
        case Operation::Replace: return itinerary.size() * pool.size();
        case Operation::Add: return (itinerary.size() + 1) * pool.size();
    }
    return 0;
}

// Position-major, then sorted pool id (the pool is already id-sorted).
PerturbationDraft draft_at(const CandidatePool& pool, Operation op, std::size_t index) {
    PerturbationDraft draft;
    draft.op = op;
    switch (op) {
        case Operation::Delete:
            draft.position = index;
            break;
        case Operation::Replace:
        case Operation::Add:
            draft.position = index / pool.size();
            draft.poi_in = pool.pois[index % pool.size()];
            break;
    }
    return draft;
}

}  // namespace

std::vector<PerturbationDraft> enumerate_perturbations(const Itinerary& itinerary,
                                                       const CandidatePool& pool, Operation op,
                                                       std::size_t limit) {
    check_feasible(itinerary, pool, op);
    const std::size_t total = draft_space_size(itinerary, pool, op);
    std::vector<PerturbationDraft> drafts;
    drafts.reserve(std::min(total, limit));
    for (std::size_t i = 0; i < total && i < limit; ++i)
        drafts.push_back(draft_at(pool, op, i));
    return drafts;
}

std::optional<PerturbationRecord> find_satisfying(const Itinerary& itinerary,
                                                  const CandidatePool& pool, Operation op,
                                                  const IntentSet& intents,
                                                  const CorpusProfile& profile, double theta,
                                                  std::uint64_t seed) {
    check_feasible(itinerary, pool, op);
    intents.validate();

    const std::size_t total = draft_space_size(itinerary, pool, op);
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    for (const std::size_t index : order) {
        const PerturbationDraft draft = draft_at(pool, op, index);
        PerturbationRecord record =
            make_record(itinerary, op, draft.position, draft.poi_in, intents);
        if (annotate_verification(record, profile, theta)) return record;
    }
    return std::nullopt;
}

std::pair<LevelHistogram, LevelHistogram> lemma_case(Operation op, std::int64_t n,
                                                     std::int64_t a) {
    switch (op) {
        case Operation::Delete: {
            if (n < 2 || a < 0 || a > n - 1)
                throw ParameterError("lemma delete: need n >= 2, 0 <= a <= n-1");
            const auto p = LevelHistogram::from_fractions(Rational(1, n), Rational(n - a - 1, n),
                                                          Rational(a, n));
            const auto q = LevelHistogram::from_fractions(
                Rational(0, 1), Rational(n - a - 1, n - 1), Rational(a, n - 1));
            return {p, q};
        }
        case Operation::Add: {
            if (n < 1 || a < 0 || a > n)
                throw ParameterError("lemma add: need n >= 1, 0 <= a <= n");
            const auto p = LevelHistogram::from_fractions(Rational(0, 1), Rational(n - a, n),
                                                          Rational(a, n));
            const auto q = LevelHistogram::from_fractions(
                Rational(1, n + 1), Rational(n - a, n + 1), Rational(a, n + 1));
            return {p, q};
        }
        case Operation::Replace: {
            if (n < 2 || a < 1 || a > n)
                throw ParameterError("lemma replace: need n >= 2, 1 <= a <= n");
            const auto p = LevelHistogram::from_fractions(Rational(0, 1), Rational(n - a, n),
                                                          Rational(a, n));
            const auto q = LevelHistogram::from_fractions(Rational(1, n), Rational(n - a, n),
                                                          Rational(a - 1, n));
            return {p, q};
        }
    }
    throw ParameterError("lemma: bad operation");
}

double lemma_closed_form(Operation op, std::int64_t n, std::int64_t a) {
    const double nd = static_cast<double>(n);
    switch (op) {
        case Operation::Delete:
            // H^2 = 1 - sqrt((n-1)/n) = (1/n) / (1 + sqrt(1 - 1/n))
            return std::sqrt((1.0 / nd) / (1.0 + std::sqrt(1.0 - 1.0 / nd)));
        case Operation::Add:
            // H^2 = 1 - sqrt(n/(n+1)) = (1/(n+1)) / (1 + sqrt(n/(n+1)))
            return std::sqrt((1.0 / (nd + 1.0)) / (1.0 + std::sqrt(nd / (nd + 1.0))));
        case Operation::Replace: {
            // H^2 = (a - sqrt(a(a-1)))/n = a / (n (a + sqrt(a(a-1))))
            const double ad = static_cast<double>(a);
            return std::sqrt(ad / (nd * (ad + std::sqrt(ad * (ad - 1.0)))));
        }
    }
    throw ParameterError("lemma: bad operation");
}

double lemma_lower_bound(Operation op, std::int64_t n) {
    const double nd = static_cast<double>(n);
    if (op == Operation::Add) return 1.0 / std::sqrt(2.0 * (nd + 1.0));
    return 1.0 / std::sqrt(2.0 * nd);
}

LemmaReport verify_lemma_bounds(Operation op, std::int64_t n_max, double theta) {
    if (n_max < 2) throw ParameterError("lemma sweep: n_max must be >= 2");

    LemmaReport report;
    report.op = op;
    report.n_max = n_max;
    report.theta = theta;
    report.min_slack = std::numeric_limits<double>::infinity();

    const std::int64_t n_min = (op == Operation::Add) ? 1 : 2;
    std::int64_t coverage = n_min - 1;
    for (std::int64_t n = n_min; n <= n_max; ++n) {
        std::int64_t a_lo = (op == Operation::Replace) ? 1 : 0;
        std::int64_t a_hi = (op == Operation::Delete) ? n - 1 : n;
        double min_h_at_n = std::numeric_limits<double>::infinity();
        for (std::int64_t a = a_lo; a <= a_hi; ++a) {
            const auto [p, q] = lemma_case(op, n, a);
            const double numeric = hellinger(p, q);
            const double closed = lemma_closed_form(op, n, a);
            const double bound = lemma_lower_bound(op, n);

            report.cases++;
            const double deviation = std::abs(numeric - closed);
            report.max_abs_deviation = std::max(report.max_abs_deviation, deviation);
            const double slack = numeric - bound;
            report.min_slack = std::min(report.min_slack, slack);
            if (deviation > 1e-12 || slack < 0.0) report.violations++;
            min_h_at_n = std::min(min_h_at_n, numeric);
        }
        if (min_h_at_n > theta && coverage == n - 1) coverage = n;
    }
    // Coverage counts the unbroken run from the smallest admissible n; for
    // Add the run starts at n=1.
    report.theta_coverage_n_max = coverage;
    return report;
}

}  // namespace itmod
