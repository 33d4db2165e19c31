#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "itmod/core.hpp"
#include "itmod/ingest.hpp"
#include "itmod/model_client.hpp"
#include "itmod/profile.hpp"

namespace itmod {

// Operation-specific prompt pair. Slots ({{intents}}, {{itinerary}}, ...)
// are replaced at render time; rendering is pure string substitution, so
// identical inputs produce identical bytes.
struct PromptTemplate {
    Operation operation = Operation::Add;
    std::string system_text;
    std::string user_text;

    static PromptTemplate for_operation(Operation op);
};

struct MemoryEntry {
    std::string seq_id;
    std::size_t position = 0;
    std::optional<std::string> poi_in;
    std::optional<std::string> poi_out;
};

// Append-only history of accepted perturbation targets for one
// (corpus, operation) run. The rendered block is bounded to the most recent
// `cap` entries; the full log is retained for persistence.
class MemoryLog {
public:
    MemoryLog(std::string corpus, Operation op, std::size_t cap = 50)
        : corpus_(std::move(corpus)), op_(op), cap_(cap) {}

    void append(const PerturbationRecord& record);
    std::string render_block() const;
    const std::vector<MemoryEntry>& entries() const { return entries_; }
    const std::string& corpus() const { return corpus_; }
    Operation op() const { return op_; }

private:
    std::string corpus_;
    Operation op_;
    std::size_t cap_;
    std::vector<MemoryEntry> entries_;
};

// |z| uniform over {1,2,3}, then a uniform subset of that size.
IntentSet sample_intents(std::uint64_t seed);

struct RenderedPrompt {
    std::string system_text;
    std::string user_text;
};

// Fills the operation template with the itinerary table, a candidate table
// (seed-sampled down to max_candidates when larger), the intent list, and
// the memory block.
RenderedPrompt build_prompt(const PromptTemplate& prompt, const Itinerary& itinerary,
                            const CandidatePool& pool, const IntentSet& intents,
                            const MemoryLog& memory, const CorpusProfile& profile,
                            std::size_t max_candidates = 100, std::uint64_t seed = 0);

// Executes the four verification functions on behalf of the model. Bad
// arguments and unknown names come back as structured error payloads, never
// exceptions.
class ToolDispatcher {
public:
    ToolDispatcher(const std::map<std::string, Poi>& poi_index, const CorpusProfile& profile,
                   double theta);

    ordered_json dispatch(const std::string& name, const ordered_json& args) const;
    static std::vector<ToolSpec> tool_specs();

private:
    ordered_json geo_distance_segments_tool(const ordered_json& args) const;
    ordered_json stats_from_categories_tool(const ordered_json& args) const;
    ordered_json cd_from_categories_tool(const ordered_json& args) const;
    ordered_json categories_from_itinerary_tool(const ordered_json& args) const;
    Itinerary resolve_itinerary(const ordered_json& ids, const std::string& field) const;

    const std::map<std::string, Poi>& poi_index_;
    const CorpusProfile& profile_;
    double theta_;
};

enum class RejectionReason { Parse, Structural, Intent, Budget, Transport };
const char* to_string(RejectionReason reason);

struct PerturbLimits {
    int max_tool_rounds = 12;
    int max_retries = 2;
};

struct PerturbRequest {
    Itinerary itinerary;
    CandidatePool pool;
    IntentSet intents;
    Operation op = Operation::Add;
};

struct PerturbOutcome {
    std::optional<PerturbationRecord> record;
    std::optional<RejectionReason> rejection;
    std::string detail;
    ordered_json transcript = ordered_json::array();
    TokenUsage usage;
};

// Conversation loop: prompt, dispatch tool calls against the toolbox,
// parse/validate/verify the final structured answer, retry with diagnostics
// on failure, reject with a reason code when budgets run out.
PerturbOutcome run_perturbation(ModelClient& client, const PerturbRequest& request,
                                const CorpusProfile& profile, double theta,
                                const PerturbLimits& limits, const MemoryLog& memory,
                                std::uint64_t seed, std::size_t max_candidates = 100);

struct CampaignOptions {
    Operation op = Operation::Add;
    std::string backend = "oracle";  // oracle | model
    std::uint64_t seed = 0;
    double theta = kDefaultTheta;
    std::size_t memory_cap = 50;
    std::size_t max_candidates = 100;
    PerturbLimits limits;
    std::optional<std::size_t> max_itineraries;  // cap for sampling runs
};

struct CampaignResult {
    std::size_t attempted = 0;  // itineraries fed to the backend
    std::size_t accepted = 0;
    std::size_t rejected = 0;  // model answers that failed a gate
    std::size_t skipped = 0;   // infeasible op or exhausted oracle search
    std::map<std::string, std::size_t> rejection_reasons;
    double pert_acc = 0.0;  // accepted / graded answers
    double poi_div = 0.0;   // distinct target POIs / accepted
    std::map<std::size_t, std::size_t> position_histogram;
    TokenUsage usage;
    bool live_client = false;
    double wall_seconds = 0.0;
};

// Sequential loop over the bundle's itineraries (memory consistency needs
// order). Writes <out>.jsonl, plus sibling rejects/diagnostics/positions
// files. `client` may be null for the oracle backend.
CampaignResult run_campaign(const CorpusBundle& bundle, const CampaignOptions& options,
                            ModelClient* client, const std::filesystem::path& out_jsonl);

}  // namespace itmod
