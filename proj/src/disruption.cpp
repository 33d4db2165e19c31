#include "itmod/disruption.hpp"

#include <algorithm>

#include "itmod/util.hpp"

namespace itmod {

std::vector<std::string> categories_from_itinerary(const Itinerary& itinerary) {
    if (itinerary.size() < 1) throw DomainError("categories: empty itinerary");
    std::vector<std::string> out;
    out.reserve(itinerary.size());
    for (const auto& poi : itinerary.pois) out.push_back(trim(poi.category));
    return out;
}

CdResult cd_from_categories(std::span<const std::string> original,
                            std::span<const std::string> perturbed) {
    CdResult result;
    result.div_original = category_diversity_exact(original);
    result.div_perturbed = category_diversity_exact(perturbed);
    result.disrupted = result.div_original != result.div_perturbed;
    return result;
}

SegmentLabels geo_distance_segments(const Itinerary& original, const Itinerary& perturbed,
                                    const CorpusProfile& profile) {
    auto segments = [&profile](const Itinerary& itinerary, std::vector<Level>& labels,
                               std::vector<double>& km, std::vector<std::string>& ids) {
        if (itinerary.size() < 2)
            throw DomainError("segments: itinerary " + itinerary.seq_id +
                              " needs at least 2 POIs");
        for (std::size_t k = 0; k + 1 < itinerary.size(); ++k) {
            const Poi& a = itinerary.pois[k];
            const Poi& b = itinerary.pois[k + 1];
            const double d = haversine_km(a.lat, a.lon, b.lat, b.lon);
            km.push_back(d);
            labels.push_back(profile.distance_level(d));
            ids.push_back(a.id + "->" + b.id);
        }
    };
    SegmentLabels out;
    segments(original, out.original, out.original_km, out.original_ids);
    segments(perturbed, out.perturbed, out.perturbed_km, out.perturbed_ids);
    return out;
}

std::vector<Level> popularity_labels(const Itinerary& itinerary, const CorpusProfile& profile) {
    if (itinerary.size() < 1) throw DomainError("popularity labels: empty itinerary");
    std::vector<Level> labels;
    labels.reserve(itinerary.size());
    for (const auto& poi : itinerary.pois) labels.push_back(profile.popularity_level(poi.visit_freq));
    return labels;
}

AlignedOrdinals align_label_sequences(std::span<const Level> original,
                                      std::span<const Level> perturbed,
                                      std::span<const std::string> original_ids,
                                      std::span<const std::string> perturbed_ids) {
    if (original.size() != original_ids.size() || perturbed.size() != perturbed_ids.size())
        throw ParameterError("align: id list not parallel to label list");

    AlignedOrdinals out;
    const std::size_t n = original.size(), m = perturbed.size();
    auto ord = [](Level l) { return static_cast<int>(l); };

    if (n == m) {
        // Positional identity alignment (replace / no-op).
        for (std::size_t k = 0; k < n; ++k) {
            out.x.push_back(ord(original[k]));
            out.y.push_back(ord(perturbed[k]));
        }
        return out;
    }

    std::size_t prefix = 0;
    while (prefix < n && prefix < m && original_ids[prefix] == perturbed_ids[prefix]) ++prefix;
    std::size_t suffix = 0;
    while (suffix < n - prefix && suffix < m - prefix &&
           original_ids[n - 1 - suffix] == perturbed_ids[m - 1 - suffix])
        ++suffix;

    for (std::size_t k = 0; k < prefix; ++k) {
        out.x.push_back(ord(original[k]));
        out.y.push_back(ord(perturbed[k]));
    }
    const std::size_t mid_n = n - prefix - suffix, mid_m = m - prefix - suffix;
    const std::size_t overlap = std::min(mid_n, mid_m);
    for (std::size_t k = 0; k < overlap; ++k) {
        out.x.push_back(ord(original[prefix + k]));
        out.y.push_back(ord(perturbed[prefix + k]));
    }
    for (std::size_t k = overlap; k < mid_n; ++k) {  // deleted
        out.x.push_back(ord(original[prefix + k]));
        out.y.push_back(kAlignGap);
    }
    for (std::size_t k = overlap; k < mid_m; ++k) {  // added
        out.x.push_back(kAlignGap);
        out.y.push_back(ord(perturbed[prefix + k]));
    }
    for (std::size_t k = 0; k < suffix; ++k) {
        out.x.push_back(ord(original[n - suffix + k]));
        out.y.push_back(ord(perturbed[m - suffix + k]));
    }
    return out;
}

DisruptionVerdict stats_from_categories(std::span<const Level> original,
                                        std::span<const Level> perturbed,
                                        std::span<const std::string> original_ids,
                                        std::span<const std::string> perturbed_ids, double theta,
                                        Intent aspect) {
    if (original.empty() || perturbed.empty())
        throw DomainError("stats: empty label sequence");
    if (theta <= 0.0) throw ParameterError("stats: theta must be positive");

    DisruptionVerdict verdict;
    verdict.aspect = aspect;
    verdict.threshold_used = theta;

    const LevelHistogram p = LevelHistogram::from_labels(original);
    const LevelHistogram q = LevelHistogram::from_labels(perturbed);
    verdict.h_value = hellinger(p, q);

    const AlignedOrdinals aligned =
        align_label_sequences(original, perturbed, original_ids, perturbed_ids);
    std::optional<double> tau;
    if (aligned.x.size() >= 2) tau = kendall_tau_b(aligned.x, aligned.y);
    verdict.tau_b = tau;

    verdict.disrupted = (*verdict.h_value > theta) || (tau.has_value() && *tau < 1.0);
    return verdict;
}

std::map<Intent, DisruptionVerdict> evaluate_aspects(const Itinerary& before,
                                                     const Itinerary& after,
                                                     const CorpusProfile& profile, double theta) {
    std::map<Intent, DisruptionVerdict> verdicts;

    {
        const auto labels_before = popularity_labels(before, profile);
        const auto labels_after = popularity_labels(after, profile);
        verdicts[Intent::Popularity] =
            stats_from_categories(labels_before, labels_after, poi_ids(before), poi_ids(after),
                                  theta, Intent::Popularity);
    }
    {
        const SegmentLabels seg = geo_distance_segments(before, after, profile);
        verdicts[Intent::Distance] =
            stats_from_categories(seg.original, seg.perturbed, seg.original_ids,
                                  seg.perturbed_ids, theta, Intent::Distance);
    }
    {
        const auto cats_before = categories_from_itinerary(before);
        const auto cats_after = categories_from_itinerary(after);
        const CdResult cd = cd_from_categories(cats_before, cats_after);
        DisruptionVerdict verdict;
        verdict.aspect = Intent::Diversity;
        verdict.threshold_used = theta;
        verdict.diversity_before = cd.div_original.to_double();
        verdict.diversity_after = cd.div_perturbed.to_double();
        verdict.disrupted = cd.disrupted;
        verdicts[Intent::Diversity] = verdict;
    }
    return verdicts;
}

std::map<Intent, DisruptionVerdict> verify_intents(const PerturbationRecord& record,
                                                   const CorpusProfile& profile, double theta) {
    return evaluate_aspects(record.original, record.perturbed, profile, theta);
}

bool satisfies_intents(const std::map<Intent, DisruptionVerdict>& verdicts, const IntentSet& z) {
    for (Intent intent : z.to_vector()) {
        const auto it = verdicts.find(intent);
        if (it == verdicts.end() || !it->second.disrupted) return false;
    }
    return true;
}

bool annotate_verification(PerturbationRecord& record, const CorpusProfile& profile,
                           double theta) {
    record.diagnostics = verify_intents(record, profile, theta);
    record.verdicts.clear();
    for (const auto& [aspect, verdict] : record.diagnostics)
        record.verdicts[aspect] = verdict.disrupted;
    return satisfies_intents(record.diagnostics, record.intents);
}

std::map<Intent, bool> aspect_invariance(const Itinerary& before, const Itinerary& after,
                                         const CorpusProfile& profile, double theta) {
    std::map<Intent, bool> invariant;
    for (const auto& [aspect, verdict] : evaluate_aspects(before, after, profile, theta))
        invariant[aspect] = !verdict.disrupted;
    return invariant;
}

}  // namespace itmod
