#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itmod/core.hpp"
#include "itmod/disruption.hpp"
#include "itmod/profile.hpp"
#include "itmod/records.hpp"

namespace itmod {

// The reverting action: apply (op, position, poi) to the need-to-modify
// itinerary to reconstruct the original.
struct GroundTruthAction {
    std::size_t position = 0;
    std::optional<std::string> poi_id;           // absent for delete tasks
    std::vector<std::string> original_ids;       // the target sequence
};

// One benchmark item. `op` is the modification operation (the inverse of
// the perturbation that produced the record): a deleted POI is added back,
// an added POI is deleted, a replacement is reverted.
struct BenchTask {
    std::string task_id;
    std::string corpus;
    std::string seq_id;
    std::string split;  // train | valid | test
    Operation op = Operation::Add;
    Operation source_op = Operation::Delete;
    std::vector<std::string> need_to_modify;  // POI ids of i*
    std::string hint;
    IntentSet intents;
    // 4 negatives + the ground-truth POI, seed-shuffled; empty for delete.
    std::vector<std::string> candidates;
    GroundTruthAction ground_truth;
};

struct SplitIndices {
    std::vector<std::size_t> train, valid, test;
};

// Seed-shuffled partition with floor allocation for valid/test and the
// remainder going to train. Disjoint and exhaustive.
SplitIndices split_indices(std::size_t n, std::array<int, 3> ratios, std::uint64_t seed);

// Fixed hint phrase per aspect, joined with "; " in canonical intent order.
std::string hint_text(const IntentSet& intents);

struct TaskBuildFailure {
    std::string reason;
};

// Builds the modification task for a verified record: inverse operation,
// hint from the record's intents, 4 seeded negatives from
// P \ (pois(i*) + ground truth). Returns the failure reason when the corpus
// cannot supply 4 negatives.
std::optional<BenchTask> build_task(const PerturbationRecord& record,
                                    const std::map<std::string, Poi>& corpus_pois,
                                    const std::string& corpus_name, std::uint64_t seed,
                                    TaskBuildFailure* failure = nullptr);

// Strict exact match of the proposed id sequence against the ground truth.
int score_mod(const BenchTask& task, const std::vector<std::string>& answer_ids);

struct AprScore {
    int apr = 0;  // 1 iff hinted aspects changed AND non-hinted stayed invariant
    bool hinted_changed = false;
    bool others_invariant = false;
    std::string reason;  // failure channel (STRUCTURAL, UNKNOWN_POI, ...)
};

// Soft metric: hinted aspects must show disruption between i* and the
// answer; every non-hinted aspect must stay invariant under the same
// detectors and theta.
AprScore score_apr(const BenchTask& task, const std::vector<std::string>& answer_ids,
                   const std::map<std::string, Poi>& corpus_pois, const CorpusProfile& profile,
                   double theta = kDefaultTheta);

enum class RagStrategy { Random, Sparse, Dense };
RagStrategy rag_from_string(const std::string& s);
const char* to_string(RagStrategy strategy);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
};

// Deterministic offline fallback: 256-dim feature hashing of character
// trigrams, L2-normalized. Test-grade, no external calls.
class HashEmbedder : public Embedder {
public:
    static constexpr std::size_t kDim = 256;
    std::vector<double> embed(const std::string& text) override;
};

// Canonical query serialization of a task input (used by dense retrieval).
std::string task_query_text(const BenchTask& task);

// Indices into `train` of the k selected examples.
//   Random: seeded uniform k-sample.
//   Sparse: BM25 (k1=1.2, b=0.75) over lowercased whitespace hint tokens,
//           ties by ascending task id.
//   Dense:  cosine over embeddings of the serialized inputs; falls back to
//           HashEmbedder when none is supplied.
std::vector<std::size_t> retrieve_examples(const BenchTask& query,
                                           std::span<const BenchTask> train,
                                           RagStrategy strategy, std::size_t k,
                                           std::uint64_t seed, Embedder* embedder = nullptr);

struct ScoreRow {
    std::string model, dataset, op, setting;
    double score = 0.0;
};

struct BordaEntry {
    std::string setting;
    double borda = 0.0;
    int rank = 0;
    std::optional<double> mean_delta;  // vs the baseline setting, when given
};

// Per (model, dataset, op) case: settings ranked by descending score get
// S-1..0 points, tie groups receive the mean of their spanned points; totals
// are summed across cases. Rows whose setting equals `baseline` are excluded
// from ranking and used for the mean-improvement column. Throws
// AggregationError when any case misses a setting.
std::vector<BordaEntry> borda_aggregate(std::span<const ScoreRow> rows,
                                        const std::optional<std::string>& baseline = {});

struct TaskVerdict {
    std::string task_id;
    int mod = 0;
    int apr = 0;
    bool apr_hinted = false;
    bool apr_invariant = false;
    std::string reason;
};

struct BenchResultRow {
    std::string model, dataset, op, setting;
    double mod = 0.0, apr = 0.0;
    std::size_t n = 0;
};

// Answer ids for a task, or nullopt when the source failed (scores 0 with a
// reason).
using AnswerSource = std::function<std::optional<std::vector<std::string>>(const BenchTask&)>;

struct BenchRunOutput {
    std::vector<TaskVerdict> verdicts;
    std::vector<BenchResultRow> results;  // grouped by (dataset, op)
};

BenchRunOutput run_benchmark(std::span<const BenchTask> tasks, const AnswerSource& answers,
                             const std::map<std::string, Poi>& corpus_pois,
                             const CorpusProfile& profile, double theta,
                             const std::string& model_label, const std::string& setting_label);

// Task (de)serialization for tasks.jsonl.
ordered_json task_to_json(const BenchTask& task);
BenchTask task_from_json(const ordered_json& row);

}  // namespace itmod
