#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "itmod/core.hpp"
#include "itmod/ingest.hpp"
#include "itmod/metrics.hpp"
#include "itmod/profile.hpp"
#include "itmod/util.hpp"

namespace fixtures {

inline itmod::Poi poi(const std::string& id, const std::string& category, double lat, double lon,
                      std::uint64_t visit_freq) {
    return itmod::Poi{id, category, lat, lon, visit_freq};
}

inline itmod::Itinerary itinerary(const std::string& seq_id,
                                  const std::vector<itmod::Poi>& pois) {
    itmod::Itinerary out;
    out.seq_id = seq_id;
    out.user_id = "u";
    out.pois = pois;
    return out;
}

// Fixed thresholds: visit_freq 5 -> low, 15 -> medium, 25 -> high;
// segment km <=1 low, <=5 medium, >5 high.
inline itmod::CorpusProfile fixed_profile() {
    itmod::CorpusProfile profile;
    profile.source_corpus = "fixture";
    profile.pop_t1 = 10.0;
    profile.pop_t2 = 20.0;
    profile.dist_t1 = 1.0;
    profile.dist_t2 = 5.0;
    profile.n_pois = 0;
    profile.n_itineraries = 0;
    return profile;
}

inline std::uint64_t freq_for(itmod::Level level) {
    switch (level) {
        case itmod::Level::Low: return 5;
        case itmod::Level::Medium: return 15;
        case itmod::Level::High: return 25;
    }
    return 0;
}

// Grid of POIs around a city centre; ~0.27 km per 0.0025 deg step keeps
// nearby POIs in the low distance bin and far ones higher.
struct SyntheticCorpus {
    itmod::CorpusBundle bundle;
};

inline SyntheticCorpus synthetic_corpus(std::uint64_t seed, std::size_t n_pois = 60,
                                        std::size_t n_itineraries = 30) {
    static const std::vector<std::string> categories = {"Museum", "Park",   "Cafe",
                                                        "Temple", "Market", "Gallery"};
    itmod::Rng rng(seed);
    SyntheticCorpus corpus;
    corpus.bundle.name = "synthetic";

    std::vector<itmod::Poi> pois;
    for (std::size_t k = 0; k < n_pois; ++k) {
        itmod::Poi p;
        p.id = "p" + std::to_string(100 + k);
        p.category = categories[rng.below(categories.size())];
        p.lat = -37.8 + 0.0025 * static_cast<double>(rng.below(40));
        p.lon = 144.95 + 0.0025 * static_cast<double>(rng.below(40));
        p.visit_freq = 1 + rng.below(30);
        pois.push_back(p);
        corpus.bundle.pois[p.id] = p;
    }

    for (std::size_t k = 0; k < n_itineraries; ++k) {
        const std::size_t len = 4 + rng.below(7);  // 4..10
        std::vector<std::size_t> order(n_pois);
        for (std::size_t i = 0; i < n_pois; ++i) order[i] = i;
        rng.shuffle(order);
        itmod::Itinerary itin;
        itin.seq_id = "s" + std::to_string(k);
        itin.user_id = "u" + std::to_string(k % 7);
        for (std::size_t i = 0; i < len; ++i) itin.pois.push_back(pois[order[i]]);
        corpus.bundle.itineraries.push_back(std::move(itin));
    }

    corpus.bundle.profile = itmod::profile_corpus(
        pois, corpus.bundle.itineraries, corpus.bundle.name);
    return corpus;
}

// Naive O(n^2) pair classifier: the independent oracle for Kendall tau-b.
struct NaiveKendall {
    std::int64_t concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, tied_both = 0,
                 total = 0;
    std::optional<double> tau;
};

inline NaiveKendall naive_kendall(const std::vector<int>& x, const std::vector<int>& y) {
    NaiveKendall out;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            out.total++;
            const int dx = (x[i] < x[j]) ? -1 : (x[i] > x[j] ? 1 : 0);
            const int dy = (y[i] < y[j]) ? -1 : (y[i] > y[j] ? 1 : 0);
            if (dx == 0 && dy == 0) {
                out.tied_x++;
                out.tied_y++;
                out.tied_both++;
            } else if (dx == 0) {
                out.tied_x++;
            } else if (dy == 0) {
                out.tied_y++;
            } else if (dx == dy) {
                out.concordant++;
            } else {
                out.discordant++;
            }
        }
    }
    const double den_x = static_cast<double>(out.total - out.tied_x);
    const double den_y = static_cast<double>(out.total - out.tied_y);
    if (den_x > 0 && den_y > 0)
        out.tau = static_cast<double>(out.concordant - out.discordant) /
                  std::sqrt(den_x * den_y);
    return out;
}

}  // namespace fixtures
