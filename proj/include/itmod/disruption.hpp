#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "itmod/core.hpp"
#include "itmod/metrics.hpp"
#include "itmod/profile.hpp"

namespace itmod {

// Ordinal used for one-sided alignment slots; strictly below Level::Low.
inline constexpr int kAlignGap = -1;

// Categories in visit order, whitespace-trimmed, case preserved (uniqueness
// downstream is case-insensitive).
std::vector<std::string> categories_from_itinerary(const Itinerary& itinerary);

struct CdResult {
    Rational div_original{0, 1};
    Rational div_perturbed{0, 1};
    bool disrupted = false;
};

// Category diversity of both sides; disruption is an exact rational
// inequality of the two ratios.
CdResult cd_from_categories(std::span<const std::string> original,
                            std::span<const std::string> perturbed);

struct SegmentLabels {
    std::vector<Level> original, perturbed;
    std::vector<double> original_km, perturbed_km;
    // Segment identity "fromId->toId"; feeds the alignment for tau_b.
    std::vector<std::string> original_ids, perturbed_ids;
};

// Haversine distance of each adjacent POI pair, binned by the profile's
// distance thresholds. Both itineraries need at least 2 POIs.
SegmentLabels geo_distance_segments(const Itinerary& original, const Itinerary& perturbed,
                                    const CorpusProfile& profile);

// Per-POI popularity level in visit order.
std::vector<Level> popularity_labels(const Itinerary& itinerary, const CorpusProfile& profile);

struct AlignedOrdinals {
    std::vector<int> x, y;
};

// Pairs the two label sequences for rank correlation. Equal lengths pair
// positionally. Otherwise the longest common prefix and suffix (by id) pair
// up, the leftover middles pair positionally, and unmatched leftovers get a
// one-sided (level, GAP) / (GAP, level) slot with GAP = -1 < low.
AlignedOrdinals align_label_sequences(std::span<const Level> original,
                                      std::span<const Level> perturbed,
                                      std::span<const std::string> original_ids,
                                      std::span<const std::string> perturbed_ids);

// Macro + micro decision for one distributional aspect: disrupted iff
// Hellinger(histograms) > theta OR tau_b < 1 over the aligned sequences.
// An undefined tau_b (fully tied variable) leaves the decision to the
// Hellinger clause alone.
DisruptionVerdict stats_from_categories(std::span<const Level> original,
                                        std::span<const Level> perturbed,
                                        std::span<const std::string> original_ids,
                                        std::span<const std::string> perturbed_ids, double theta,
                                        Intent aspect);

// All three aspect detectors between a before/after itinerary pair.
std::map<Intent, DisruptionVerdict> evaluate_aspects(const Itinerary& before,
                                                     const Itinerary& after,
                                                     const CorpusProfile& profile, double theta);

// Evaluates every aspect regardless of the record's intent set (the bench
// needs all three); the record satisfies its intents iff each aspect in z
// is disrupted.
std::map<Intent, DisruptionVerdict> verify_intents(const PerturbationRecord& record,
                                                   const CorpusProfile& profile,
                                                   double theta = kDefaultTheta);

bool satisfies_intents(const std::map<Intent, DisruptionVerdict>& verdicts, const IntentSet& z);

// Fills record.verdicts and record.diagnostics; returns whether every
// intent in record.intents is disrupted.
bool annotate_verification(PerturbationRecord& record, const CorpusProfile& profile,
                           double theta = kDefaultTheta);

// invariant(aspect) == NOT disrupted(aspect) under the same detectors.
std::map<Intent, bool> aspect_invariance(const Itinerary& before, const Itinerary& after,
                                         const CorpusProfile& profile,
                                         double theta = kDefaultTheta);

}  // namespace itmod
