#include "itmod/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>

#include "itmod/util.hpp"

namespace itmod {

SplitIndices split_indices(std::size_t n, std::array<int, 3> ratios, std::uint64_t seed) {
    if (n == 0) throw ParameterError("split: empty record list");
    for (int r : ratios)
        if (r < 0) throw ParameterError("split: negative ratio");
    const long long total = ratios[0] + ratios[1] + ratios[2];
    if (total <= 0) throw ParameterError("split: ratios sum to zero");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    const std::size_t n_valid = static_cast<std::size_t>(
        static_cast<long long>(n) * ratios[1] / total);
    const std::size_t n_test = static_cast<std::size_t>(
        static_cast<long long>(n) * ratios[2] / total);
    const std::size_t n_train = n - n_valid - n_test;  // remainder goes to train

    SplitIndices split;
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                       order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid),
                      order.end());
    return split;
}

std::string hint_text(const IntentSet& intents) {
    std::string out;
    for (Intent z : intents.to_vector()) {
        if (!out.empty()) out += "; ";
        switch (z) {
            case Intent::Popularity: out += "modify the popularity distribution"; break;
            case Intent::Distance: out += "modify the spatial-distance distribution"; break;
            case Intent::Diversity: out += "modify the category diversity"; break;
        }
    }
    return out;
}

namespace {

Operation inverse_operation(Operation op) {
    switch (op) {
        case Operation::Add: return Operation::Delete;
        case Operation::Delete: return Operation::Add;
        case Operation::Replace: return Operation::Replace;
    }
    throw DomainError("bad operation");
}

}  // namespace

std::optional<BenchTask> build_task(const PerturbationRecord& record,
                                    const std::map<std::string, Poi>& corpus_pois,
                                    const std::string& corpus_name, std::uint64_t seed,
                                    TaskBuildFailure* failure) {
    BenchTask task;
    task.corpus = corpus_name;
    task.seq_id = record.original.seq_id;
    task.source_op = record.op;
    task.op = inverse_operation(record.op);
    task.need_to_modify = poi_ids(record.perturbed);
    task.intents = record.intents;
    task.hint = hint_text(record.intents);
    task.ground_truth.position = record.position;
    task.ground_truth.original_ids = poi_ids(record.original);

    // The POI the modifier must put back: the deleted POI for add tasks,
    // the replaced-away POI for replace tasks. Delete tasks need none.
    std::optional<std::string> gt_poi;
    if (task.op == Operation::Add || task.op == Operation::Replace) {
        if (!record.poi_out) throw DomainError("record lacks poi_out for " + task.seq_id);
        gt_poi = record.poi_out->id;
    }
    task.ground_truth.poi_id = gt_poi;

    if (gt_poi) {
        std::set<std::string> excluded(task.need_to_modify.begin(), task.need_to_modify.end());
        excluded.insert(*gt_poi);
        std::vector<std::string> negatives_pool;
        for (const auto& [id, poi] : corpus_pois)
            if (!excluded.count(id)) negatives_pool.push_back(id);
        if (negatives_pool.size() < 4) {
            if (failure) failure->reason = "corpus too small for 4 negative candidates";
            return std::nullopt;
        }
        Rng rng(splitmix64(seed) ^ 0x6e656773ULL);
        rng.shuffle(negatives_pool);
        negatives_pool.resize(4);
        task.candidates = negatives_pool;
        task.candidates.push_back(*gt_poi);
        Rng shuffle_rng(splitmix64(seed) ^ 0x63616e64ULL);
        shuffle_rng.shuffle(task.candidates);
    }
    return task;
}

int score_mod(const BenchTask& task, const std::vector<std::string>& answer_ids) {
    return answer_ids == task.ground_truth.original_ids ? 1 : 0;
}

AprScore score_apr(const BenchTask& task, const std::vector<std::string>& answer_ids,
                   const std::map<std::string, Poi>& corpus_pois, const CorpusProfile& profile,
                   double theta) {
    AprScore score;

    const std::ptrdiff_t have = static_cast<std::ptrdiff_t>(answer_ids.size());
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(task.need_to_modify.size());
    std::ptrdiff_t expected = base;
    if (task.op == Operation::Add) expected = base + 1;
    if (task.op == Operation::Delete) expected = base - 1;
    if (have != expected) {
        score.reason = "STRUCTURAL: answer length does not match the operation";
        return score;
    }

    auto resolve = [&corpus_pois](const std::vector<std::string>& ids, const std::string& seq,
                                  Itinerary& out) {
        out.seq_id = seq;
        for (const auto& id : ids) {
            const auto it = corpus_pois.find(id);
            if (it == corpus_pois.end()) return false;
            out.pois.push_back(it->second);
        }
        return true;
    };
    Itinerary before, after;
    if (!resolve(task.need_to_modify, task.seq_id, before) ||
        !resolve(answer_ids, task.seq_id, after)) {
        score.reason = "UNKNOWN_POI: answer references a POI outside the corpus";
        return score;
    }

    std::map<Intent, DisruptionVerdict> verdicts;
    try {
        verdicts = evaluate_aspects(before, after, profile, theta);
    } catch (const DomainError& e) {
        score.reason = std::string("STRUCTURAL: ") + e.what();
        return score;
    }

    score.hinted_changed = true;
    score.others_invariant = true;
    for (const auto& [aspect, verdict] : verdicts) {
        if (task.intents.contains(aspect)) {
            if (!verdict.disrupted) score.hinted_changed = false;
        } else if (verdict.disrupted) {
            score.others_invariant = false;
        }
    }
    score.apr = (score.hinted_changed && score.others_invariant) ? 1 : 0;
    return score;
}

RagStrategy rag_from_string(const std::string& s) {
    if (s == "random") return RagStrategy::Random;
    if (s == "sparse") return RagStrategy::Sparse;
    if (s == "dense") return RagStrategy::Dense;
    throw ParameterError("unknown rag strategy: " + s);
}

const char* to_string(RagStrategy strategy) {
    switch (strategy) {
        case RagStrategy::Random: return "random";
        case RagStrategy::Sparse: return "sparse";
        case RagStrategy::Dense: return "dense";
    }
    return "?";
}

std::vector<double> HashEmbedder::embed(const std::string& text) {
    std::vector<double> v(kDim, 0.0);
    const std::string s = to_lower(text);
    if (s.size() >= 3) {
        for (std::size_t i = 0; i + 3 <= s.size(); ++i) {
            // FNV-1a over the trigram bytes; low bits pick the bucket, the
            // next bit the sign.
            std::uint64_t h = 1469598103934665603ULL;
            for (std::size_t j = i; j < i + 3; ++j) {
                h ^= static_cast<unsigned char>(s[j]);
                h *= 1099511628211ULL;
            }
            const std::size_t bucket = h % kDim;
            const double sign = ((h >> 32) & 1ULL) ? 1.0 : -1.0;
            v[bucket] += sign;
        }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

std::string task_query_text(const BenchTask& task) {
    std::ostringstream out;
    out << to_string(task.op) << " | " << task.hint << " | itinerary:";
    for (const auto& id : task.need_to_modify) out << " " << id;
    if (!task.candidates.empty()) {
        out << " | candidates:";
        for (const auto& id : task.candidates) out << " " << id;
    }
    return out.str();
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Okapi BM25 over whitespace tokens; k1/b fixed.
class Bm25 {
public:
    explicit Bm25(const std::vector<std::vector<std::string>>& docs) : docs_(docs) {
        double total_len = 0.0;
        for (const auto& doc : docs_) {
            total_len += static_cast<double>(doc.size());
            std::set<std::string> seen(doc.begin(), doc.end());
            for (const auto& term : seen) df_[term]++;
        }
        avg_len_ = docs_.empty() ? 0.0 : total_len / static_cast<double>(docs_.size());
    }

    double score(const std::vector<std::string>& query, std::size_t doc_index) const {
        static constexpr double k1 = 1.2, b = 0.75;
        const auto& doc = docs_[doc_index];
        if (doc.empty() || avg_len_ == 0.0) return 0.0;
        double total = 0.0;
        const double n_docs = static_cast<double>(docs_.size());
        for (const auto& term : query) {
            const auto df_it = df_.find(term);
            if (df_it == df_.end()) continue;
            const double df = static_cast<double>(df_it->second);
            const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
            const double tf = static_cast<double>(std::count(doc.begin(), doc.end(), term));
            if (tf == 0.0) continue;
            const double len_norm =
                tf + k1 * (1.0 - b + b * static_cast<double>(doc.size()) / avg_len_);
            total += idf * tf * (k1 + 1.0) / len_norm;
        }
        return total;
    }

private:
    const std::vector<std::vector<std::string>>& docs_;
    std::map<std::string, std::size_t> df_;
    double avg_len_ = 0.0;
};

}  // namespace

std::vector<std::size_t> retrieve_examples(const BenchTask& query,
                                           std::span<const BenchTask> train,
                                           RagStrategy strategy, std::size_t k,
                                           std::uint64_t seed, Embedder* embedder) {
    if (k > train.size())
        throw ParameterError("retrieve: k=" + std::to_string(k) + " exceeds train size " +
                             std::to_string(train.size()));
    if (k == 0) return {};

    std::vector<std::size_t> indices(train.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

    switch (strategy) {
        case RagStrategy::Random: {
            Rng rng(seed);
            rng.shuffle(indices);
            indices.resize(k);
            return indices;
        }
        case RagStrategy::Sparse: {
            std::vector<std::vector<std::string>> docs;
            docs.reserve(train.size());
            for (const auto& task : train) docs.push_back(split_ws(to_lower(task.hint)));
            const Bm25 bm25(docs);
            const auto query_tokens = split_ws(to_lower(query.hint));
            std::vector<double> scores(train.size());
            for (std::size_t i = 0; i < train.size(); ++i)
                scores[i] = bm25.score(query_tokens, i);
            std::stable_sort(indices.begin(), indices.end(),
                             [&](std::size_t a, std::size_t b) {
                                 if (scores[a] != scores[b]) return scores[a] > scores[b];
                                 return train[a].task_id < train[b].task_id;
                             });
            indices.resize(k);
            return indices;
        }
        case RagStrategy::Dense: {
            if (!embedder) {
                static bool warned = false;
                if (!warned) {
                    std::cerr << "retrieve: no embedder configured, using the "
                                 "feature-hash fallback\n";
                    warned = true;
                }
            }
            HashEmbedder fallback;
            Embedder& e = embedder ? *embedder : fallback;
            const auto query_vec = e.embed(task_query_text(query));
            std::vector<double> scores(train.size());
            for (std::size_t i = 0; i < train.size(); ++i)
                scores[i] = cosine(query_vec, e.embed(task_query_text(train[i])));
            std::stable_sort(indices.begin(), indices.end(),
                             [&](std::size_t a, std::size_t b) {
                                 if (scores[a] != scores[b]) return scores[a] > scores[b];
                                 return train[a].task_id < train[b].task_id;
                             });
            indices.resize(k);
            return indices;
        }
    }
    throw ParameterError("retrieve: bad strategy");
}

std::vector<BordaEntry> borda_aggregate(std::span<const ScoreRow> rows,
                                        const std::optional<std::string>& baseline) {
    std::set<std::string> settings;
    std::map<std::string, std::map<std::string, double>> cases;     // case key -> setting -> score
    std::map<std::string, double> baseline_scores;                  // case key -> baseline score
    for (const auto& row : rows) {
        const std::string key = row.model + "\x1f" + row.dataset + "\x1f" + row.op;
        if (baseline && row.setting == *baseline) {
            baseline_scores[key] = row.score;
            continue;
        }
        settings.insert(row.setting);
        if (cases[key].count(row.setting))
            throw AggregationError("duplicate cell: " + row.model + "/" + row.dataset + "/" +
                                   row.op + "/" + row.setting);
        cases[key][row.setting] = row.score;
    }
    if (settings.size() < 2) throw AggregationError("borda needs at least 2 settings");
    if (cases.empty()) throw AggregationError("borda: no cases");

    const std::size_t s = settings.size();
    std::map<std::string, double> totals;
    std::map<std::string, double> delta_sums;
    std::size_t delta_cases = 0;

    for (const auto& [key, scores] : cases) {
        for (const auto& setting : settings) {
            if (!scores.count(setting)) {
                std::string pretty = key;
                std::replace(pretty.begin(), pretty.end(), '\x1f', '/');
                throw AggregationError("missing cell: " + pretty + "/" + setting);
            }
        }
        // Descending by score; tie groups get the mean of spanned points
        // (S-1 .. 0).
        std::vector<std::pair<double, std::string>> ranked;
        for (const auto& [setting, score] : scores) ranked.push_back({score, setting});
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        std::size_t i = 0;
        while (i < ranked.size()) {
            std::size_t j = i;
            while (j + 1 < ranked.size() && ranked[j + 1].first == ranked[i].first) ++j;
            // positions i..j share points (s-1-i) down to (s-1-j)
            const double points =
                (static_cast<double>(s - 1 - i) + static_cast<double>(s - 1 - j)) / 2.0;
            for (std::size_t t = i; t <= j; ++t) totals[ranked[t].second] += points;
            i = j + 1;
        }

        if (baseline) {
            const auto base_it = baseline_scores.find(key);
            if (base_it != baseline_scores.end()) {
                ++delta_cases;
                for (const auto& [setting, score] : scores)
                    delta_sums[setting] += score - base_it->second;
            }
        }
    }

    std::vector<BordaEntry> entries;
    for (const auto& setting : settings) {
        BordaEntry entry;
        entry.setting = setting;
        entry.borda = totals[setting];
        if (baseline && delta_cases > 0)
            entry.mean_delta = delta_sums[setting] / static_cast<double>(delta_cases);
        entries.push_back(std::move(entry));
    }
    std::sort(entries.begin(), entries.end(), [](const BordaEntry& a, const BordaEntry& b) {
        if (a.borda != b.borda) return a.borda > b.borda;
        return a.setting < b.setting;
    });
    for (std::size_t i = 0; i < entries.size(); ++i) {
        // Tied totals share the better rank.
        if (i > 0 && entries[i].borda == entries[i - 1].borda)
            entries[i].rank = entries[i - 1].rank;
        else
            entries[i].rank = static_cast<int>(i) + 1;
    }
    return entries;
}

BenchRunOutput run_benchmark(std::span<const BenchTask> tasks, const AnswerSource& answers,
                             const std::map<std::string, Poi>& corpus_pois,
                             const CorpusProfile& profile, double theta,
                             const std::string& model_label, const std::string& setting_label) {
    BenchRunOutput output;
    struct Agg {
        double mod_sum = 0.0, apr_sum = 0.0;
        std::size_t n = 0;
    };
    std::map<std::pair<std::string, std::string>, Agg> groups;

    for (const auto& task : tasks) {
        TaskVerdict verdict;
        verdict.task_id = task.task_id;
        const auto answer = answers(task);
        if (!answer) {
            verdict.reason = "NO_ANSWER";
        } else {
            verdict.mod = score_mod(task, *answer);
            const AprScore apr = score_apr(task, *answer, corpus_pois, profile, theta);
            verdict.apr = apr.apr;
            verdict.apr_hinted = apr.hinted_changed;
            verdict.apr_invariant = apr.others_invariant;
            verdict.reason = apr.reason;
        }
        Agg& agg = groups[{task.corpus, to_string(task.op)}];
        agg.mod_sum += verdict.mod;
        agg.apr_sum += verdict.apr;
        agg.n++;
        output.verdicts.push_back(std::move(verdict));
    }

    for (const auto& [key, agg] : groups) {
        BenchResultRow row;
        row.model = model_label;
        row.dataset = key.first;
        row.op = key.second;
        row.setting = setting_label;
        row.mod = agg.n ? agg.mod_sum / static_cast<double>(agg.n) : 0.0;
        row.apr = agg.n ? agg.apr_sum / static_cast<double>(agg.n) : 0.0;
        row.n = agg.n;
        output.results.push_back(std::move(row));
    }
    return output;
}

ordered_json task_to_json(const BenchTask& task) {
    ordered_json row;
    row["schema_version"] = 1;
    row["task_id"] = task.task_id;
    row["corpus"] = task.corpus;
    row["seq_id"] = task.seq_id;
    row["split"] = task.split;
    row["op"] = to_string(task.op);
    row["source_op"] = to_string(task.source_op);
    row["need_to_modify"] = task.need_to_modify;
    row["hint"] = task.hint;
    ordered_json intents = ordered_json::array();
    for (Intent z : task.intents.to_vector()) intents.push_back(to_string(z));
    row["intents"] = intents;
    row["candidates"] = task.candidates;
    ordered_json gt;
    gt["position"] = task.ground_truth.position;
    gt["poi"] = task.ground_truth.poi_id ? ordered_json(*task.ground_truth.poi_id) : nullptr;
    gt["original"] = task.ground_truth.original_ids;
    row["ground_truth"] = gt;
    return row;
}

BenchTask task_from_json(const ordered_json& row) {
    BenchTask task;
    task.task_id = row.at("task_id").get<std::string>();
    task.corpus = row.at("corpus").get<std::string>();
    task.seq_id = row.at("seq_id").get<std::string>();
    task.split = row.at("split").get<std::string>();
    task.op = operation_from_string(row.at("op").get<std::string>());
    task.source_op = operation_from_string(row.at("source_op").get<std::string>());
    for (const auto& id : row.at("need_to_modify"))
        task.need_to_modify.push_back(id.get<std::string>());
    task.hint = row.at("hint").get<std::string>();
    std::vector<Intent> intents;
    for (const auto& z : row.at("intents")) intents.push_back(intent_from_string(z));
    task.intents = IntentSet::from_vector(intents);
    for (const auto& id : row.at("candidates")) task.candidates.push_back(id.get<std::string>());
    const auto& gt = row.at("ground_truth");
    task.ground_truth.position = gt.at("position").get<std::size_t>();
    if (!gt.at("poi").is_null()) task.ground_truth.poi_id = gt.at("poi").get<std::string>();
    for (const auto& id : gt.at("original"))
        task.ground_truth.original_ids.push_back(id.get<std::string>());
    return task;
}

}  // namespace itmod
