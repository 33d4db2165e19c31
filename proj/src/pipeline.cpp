#include "itmod/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "itmod/disruption.hpp"
#include "itmod/oracle.hpp"
#include "itmod/records.hpp"
#include "itmod/util.hpp"

namespace itmod {

namespace {

std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string replace_slot(std::string text, const std::string& slot, const std::string& value) {
    const std::string needle = "{{" + slot + "}}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return text;
}

const char* operation_rules(Operation op) {
    switch (op) {
        case Operation::Add:
            return "Rules for add: position is the insertion index in [0, length]; poi_in must "
                   "be the id of a candidate POI (never one already in the itinerary); poi_out "
                   "must be null.";
        case Operation::Delete:
            return "Rules for delete: position is the index of the POI to remove in "
                   "[0, length-1]; poi_out is the id at that position; poi_in must be null.";
        case Operation::Replace:
            return "Rules for replace: position is the index of the replaced POI in "
                   "[0, length-1]; poi_in must be the id of a candidate POI (never one already "
                   "in the itinerary); poi_out is the id currently at that position.";
    }
    return "";
}

}  // namespace

PromptTemplate PromptTemplate::for_operation(Operation op) {
    PromptTemplate prompt;
    prompt.operation = op;
    std::string system =
        "You are a travel-itinerary perturbation assistant. Apply exactly one {{operation}} "
        "edit to the given itinerary so that every listed intent is measurably disrupted.\n"
        "\n"
        "Disruption is decided by these metrics:\n"
        "- diversity: div(i) = 0 when the itinerary has exactly one unique category "
        "(case-insensitive), otherwise unique_categories / length. Disrupted when div(original) "
        "!= div(perturbed), compared exactly.\n"
        "- popularity: every POI carries a {low, medium, high} popularity level from "
        "corpus-relative visit-frequency tertiles. Disrupted when the Hellinger distance "
        "between the two level histograms exceeds {{theta}}, or when Kendall's tau-b over the "
        "aligned level sequences is below 1.\n"
        "- distance: the same Hellinger/tau-b rule over {low, medium, high} levels of the "
        "consecutive segment distances (Haversine kilometres between adjacent POIs).\n"
        "\n"
        "Never estimate these numbers yourself. Use the tools: geo_distance_segments, "
        "stats_from_categories, cd_from_categories, categories_from_itinerary.\n"
        "\n"
        "When confident, reply with one JSON object and nothing else:\n"
        "{\"operation\": \"{{operation}}\", \"position\": <zero-based integer>, "
        "\"poi_in\": <candidate id or null>, \"poi_out\": <removed/replaced id or null>}\n"
        "{{operation_rules}}";
    prompt.system_text = replace_slot(std::move(system), "operation_rules", operation_rules(op));

    prompt.user_text =
        "Perturbation intents to disrupt: {{intents}}\n"
        "\n"
        "Original itinerary (seq {{seq_id}}, {{length}} POIs):\n"
        "{{itinerary_table}}\n"
        "\n"
        "Candidate POIs ({{candidate_count}} shown):\n"
        "{{candidate_table}}\n"
        "\n"
        "{{memory_block}}\n";
    return prompt;
}

void MemoryLog::append(const PerturbationRecord& record) {
    MemoryEntry entry;
    entry.seq_id = record.original.seq_id;
    entry.position = record.position;
    if (record.poi_in) entry.poi_in = record.poi_in->id;
    if (record.poi_out) entry.poi_out = record.poi_out->id;
    entries_.push_back(std::move(entry));
}

std::string MemoryLog::render_block() const {
    if (entries_.empty()) return "Perturbation history: no prior perturbations.";
    std::ostringstream out;
    out << "Perturbation history (most recent " << std::min(cap_, entries_.size())
        << "; avoid repeating these positions and POIs):";
    const std::size_t start = entries_.size() > cap_ ? entries_.size() - cap_ : 0;
    for (std::size_t k = start; k < entries_.size(); ++k) {
        const MemoryEntry& e = entries_[k];
        out << "\n- seq=" << e.seq_id << " position=" << e.position;
        if (e.poi_in) out << " poi_in=" << *e.poi_in;
        if (e.poi_out) out << " poi_out=" << *e.poi_out;
    }
    return out.str();
}

IntentSet sample_intents(std::uint64_t seed) {
    Rng rng(seed);
    const int size = static_cast<int>(rng.below(3)) + 1;
    std::vector<Intent> all = {Intent::Popularity, Intent::Distance, Intent::Diversity};
    rng.shuffle(all);
    all.resize(static_cast<std::size_t>(size));
    return IntentSet::from_vector(all);
}

RenderedPrompt build_prompt(const PromptTemplate& prompt, const Itinerary& itinerary,
                            const CandidatePool& pool, const IntentSet& intents,
                            const MemoryLog& memory, const CorpusProfile& profile,
                            std::size_t max_candidates, std::uint64_t seed) {
    char theta_buf[32];
    std::snprintf(theta_buf, sizeof(theta_buf), "%g", kDefaultTheta);

    RenderedPrompt rendered;
    rendered.system_text = replace_slot(prompt.system_text, "operation",
                                        to_string(prompt.operation));
    rendered.system_text = replace_slot(std::move(rendered.system_text), "theta", theta_buf);

    std::string intent_list;
    for (Intent z : intents.to_vector()) {
        if (!intent_list.empty()) intent_list += ", ";
        intent_list += to_string(z);
    }

    std::ostringstream table;
    for (std::size_t k = 0; k < itinerary.size(); ++k) {
        const Poi& poi = itinerary.pois[k];
        if (k > 0) table << "\n";
        table << k << " | " << poi.id << " | " << poi.category << " | "
              << format_coord(poi.lat) << " | " << format_coord(poi.lon) << " | "
              << to_string(profile.popularity_level(poi.visit_freq));
    }

    // Seed-stable down-sample when the pool exceeds the cap; presentation is
    // id-sorted either way.
    std::vector<const Poi*> shown;
    if (pool.size() > max_candidates) {
        std::vector<std::size_t> order(pool.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(splitmix64(seed) ^ 0x706f6f6cULL);
        rng.shuffle(order);
        order.resize(max_candidates);
        for (std::size_t i : order) shown.push_back(&pool.pois[i]);
        std::sort(shown.begin(), shown.end(),
                  [](const Poi* a, const Poi* b) { return a->id < b->id; });
    } else {
        for (const Poi& poi : pool.pois) shown.push_back(&poi);
    }

    std::ostringstream candidates;
    for (std::size_t k = 0; k < shown.size(); ++k) {
        const Poi* poi = shown[k];
        if (k > 0) candidates << "\n";
        candidates << poi->id << " | " << poi->category << " | " << format_coord(poi->lat)
                   << " | " << format_coord(poi->lon) << " | "
                   << to_string(profile.popularity_level(poi->visit_freq));
    }
    if (shown.empty()) candidates << "(none)";

    std::string user = prompt.user_text;
    user = replace_slot(std::move(user), "intents", intent_list);
    user = replace_slot(std::move(user), "seq_id", itinerary.seq_id);
    user = replace_slot(std::move(user), "length", std::to_string(itinerary.size()));
    user = replace_slot(std::move(user), "itinerary_table", table.str());
    user = replace_slot(std::move(user), "candidate_count", std::to_string(shown.size()));
    user = replace_slot(std::move(user), "candidate_table", candidates.str());
    user = replace_slot(std::move(user), "memory_block", memory.render_block());
    rendered.user_text = std::move(user);
    return rendered;
}

// ---------------------------------------------------------------------------
// Tool dispatch

ToolDispatcher::ToolDispatcher(const std::map<std::string, Poi>& poi_index,
                               const CorpusProfile& profile, double theta)
    : poi_index_(poi_index), profile_(profile), theta_(theta) {}

std::vector<ToolSpec> ToolDispatcher::tool_specs() {
    auto id_array = [](const char* desc) {
        return ordered_json{{"type", "array"}, {"items", {{"type", "string"}}},
                            {"description", desc}};
    };
    std::vector<ToolSpec> specs;
    specs.push_back(
        {"geo_distance_segments",
         "Computes consecutive Haversine distances between adjacent POIs of the original and "
         "perturbed itineraries and discretizes each segment into low/medium/high classes.",
         {{"type", "object"},
          {"properties",
           {{"original", id_array("POI ids of the original itinerary, in visit order")},
            {"perturbed", id_array("POI ids of the perturbed itinerary, in visit order")}}},
          {"required", {"original", "perturbed"}}}});
    specs.push_back(
        {"stats_from_categories",
         "Given low/medium/high label sequences of the original and perturbed itineraries "
         "(popularity labels or segment distance classes), computes the Hellinger distribution "
         "shift and Kendall tau-b rank stability and returns the thresholded disruption "
         "decision. Pass the matching id sequences when lengths differ so the alignment is "
         "exact.",
         {{"type", "object"},
          {"properties",
           {{"original_labels", id_array("labels of the original sequence: low|medium|high")},
            {"perturbed_labels", id_array("labels of the perturbed sequence: low|medium|high")},
            {"original_ids", id_array("optional ids parallel to original_labels")},
            {"perturbed_ids", id_array("optional ids parallel to perturbed_labels")},
            {"aspect",
             {{"type", "string"}, {"description", "popularity or distance (labeling only)"}}}}},
          {"required", {"original_labels", "perturbed_labels"}}}});
    specs.push_back(
        {"cd_from_categories",
         "Computes the category-diversity ratio of the original and perturbed itineraries "
         "using case-insensitive unique categories and reports whether the ratio changes.",
         {{"type", "object"},
          {"properties",
           {{"original", id_array("category of each original POI, in visit order")},
            {"perturbed", id_array("category of each perturbed POI, in visit order")}}},
          {"required", {"original", "perturbed"}}}});
    specs.push_back({"categories_from_itinerary",
                     "Extracts the category of each POI id, in order.",
                     {{"type", "object"},
                      {"properties", {{"itinerary", id_array("POI ids in visit order")}}},
                      {"required", {"itinerary"}}}});
    return specs;
}

Itinerary ToolDispatcher::resolve_itinerary(const ordered_json& ids,
                                            const std::string& field) const {
    if (!ids.is_array()) throw DomainError(field + " must be an array of POI ids");
    Itinerary itinerary;
    itinerary.seq_id = field;
    for (const auto& id : ids) {
        if (!id.is_string()) throw DomainError(field + " must contain string ids");
        const auto it = poi_index_.find(id.get<std::string>());
        if (it == poi_index_.end())
            throw DomainError("unknown poi id in " + field + ": " + id.get<std::string>());
        itinerary.pois.push_back(it->second);
    }
    return itinerary;
}

ordered_json ToolDispatcher::geo_distance_segments_tool(const ordered_json& args) const {
    const Itinerary original = resolve_itinerary(args.at("original"), "original");
    const Itinerary perturbed = resolve_itinerary(args.at("perturbed"), "perturbed");
    const SegmentLabels seg = geo_distance_segments(original, perturbed, profile_);
    auto labels = [](const std::vector<Level>& levels) {
        ordered_json out = ordered_json::array();
        for (Level l : levels) out.push_back(to_string(l));
        return out;
    };
    return {{"original_labels", labels(seg.original)},
            {"perturbed_labels", labels(seg.perturbed)},
            {"original_km", seg.original_km},
            {"perturbed_km", seg.perturbed_km},
            {"original_ids", seg.original_ids},
            {"perturbed_ids", seg.perturbed_ids}};
}

ordered_json ToolDispatcher::stats_from_categories_tool(const ordered_json& args) const {
    auto parse_labels = [](const ordered_json& arr, const std::string& field) {
        if (!arr.is_array() || arr.empty())
            throw DomainError(field + " must be a non-empty array of labels");
        std::vector<Level> out;
        for (const auto& l : arr) out.push_back(level_from_string(to_lower(l.get<std::string>())));
        return out;
    };
    const auto original = parse_labels(args.at("original_labels"), "original_labels");
    const auto perturbed = parse_labels(args.at("perturbed_labels"), "perturbed_labels");

    auto parse_ids = [](const ordered_json& args_obj, const char* key, std::size_t expected,
                        const std::vector<Level>& fallback) {
        std::vector<std::string> ids;
        if (args_obj.contains(key) && args_obj.at(key).is_array() &&
            args_obj.at(key).size() == expected) {
            for (const auto& id : args_obj.at(key)) ids.push_back(id.get<std::string>());
        } else {
            // Without ids, equal lengths pair positionally and unequal ones
            // align on matching label runs.
            for (const Level l : fallback) ids.emplace_back(to_string(l));
        }
        return ids;
    };
    const auto original_ids = parse_ids(args, "original_ids", original.size(), original);
    const auto perturbed_ids = parse_ids(args, "perturbed_ids", perturbed.size(), perturbed);

    Intent aspect = Intent::Popularity;
    if (args.contains("aspect") && args.at("aspect").is_string() &&
        args.at("aspect").get<std::string>() == "distance")
        aspect = Intent::Distance;

    const DisruptionVerdict verdict = stats_from_categories(
        original, perturbed, original_ids, perturbed_ids, theta_, aspect);
    return {{"aspect", to_string(verdict.aspect)},
            {"hellinger", *verdict.h_value},
            {"tau_b", verdict.tau_b ? ordered_json(*verdict.tau_b) : nullptr},
            {"threshold", verdict.threshold_used},
            {"disrupted", verdict.disrupted}};
}

ordered_json ToolDispatcher::cd_from_categories_tool(const ordered_json& args) const {
    auto parse = [](const ordered_json& arr, const std::string& field) {
        if (!arr.is_array() || arr.empty())
            throw DomainError(field + " must be a non-empty array of categories");
        std::vector<std::string> out;
        for (const auto& c : arr) out.push_back(c.get<std::string>());
        return out;
    };
    const auto original = parse(args.at("original"), "original");
    const auto perturbed = parse(args.at("perturbed"), "perturbed");
    const CdResult cd = cd_from_categories(original, perturbed);
    return {{"diversity_original", cd.div_original.to_double()},
            {"diversity_original_exact", cd.div_original.to_string()},
            {"diversity_perturbed", cd.div_perturbed.to_double()},
            {"diversity_perturbed_exact", cd.div_perturbed.to_string()},
            {"disrupted", cd.disrupted}};
}

ordered_json ToolDispatcher::categories_from_itinerary_tool(const ordered_json& args) const {
    const Itinerary itinerary = resolve_itinerary(args.at("itinerary"), "itinerary");
    return {{"categories", categories_from_itinerary(itinerary)}};
}

ordered_json ToolDispatcher::dispatch(const std::string& name, const ordered_json& args) const {
    try {
        if (name == "geo_distance_segments") return geo_distance_segments_tool(args);
        if (name == "stats_from_categories") return stats_from_categories_tool(args);
        if (name == "cd_from_categories") return cd_from_categories_tool(args);
        if (name == "categories_from_itinerary") return categories_from_itinerary_tool(args);
        return {{"error", "unknown tool: " + name +
                              " (available: geo_distance_segments, stats_from_categories, "
                              "cd_from_categories, categories_from_itinerary)"}};
    } catch (const ordered_json::exception& e) {
        return {{"error", std::string("malformed arguments: ") + e.what()}};
    } catch (const std::exception& e) {
        return {{"error", e.what()}};
    }
}

// ---------------------------------------------------------------------------
// Perturbation loop

const char* to_string(RejectionReason reason) {
    switch (reason) {
        case RejectionReason::Parse: return "PARSE";
        case RejectionReason::Structural: return "STRUCTURAL";
        case RejectionReason::Intent: return "INTENT";
        case RejectionReason::Budget: return "BUDGET";
        case RejectionReason::Transport: return "TRANSPORT";
    }
    return "?";
}

namespace {

// First balanced top-level JSON object in the text, tolerant of fences and
// prose around it.
std::optional<ordered_json> extract_json_object(const std::string& text) {
    for (std::size_t start = text.find('{'); start != std::string::npos;
         start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (c == '\\') ++i;
                else if (c == '"') in_string = false;
            } else if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    try {
                        return ordered_json::parse(text.substr(start, i - start + 1));
                    } catch (const ordered_json::parse_error&) {
                        break;  // try the next candidate start
                    }
                }
            }
        }
    }
    return std::nullopt;
}

struct ParsedAnswer {
    Operation op = Operation::Add;
    std::size_t position = 0;
    std::optional<std::string> poi_in;
    std::optional<std::string> poi_out;
};

std::optional<ParsedAnswer> parse_answer(const std::string& text, std::string& error) {
    const auto obj = extract_json_object(text);
    if (!obj) {
        error = "no JSON object found in the reply";
        return std::nullopt;
    }
    try {
        ParsedAnswer answer;
        answer.op = operation_from_string(obj->at("operation").get<std::string>());
        if (!obj->at("position").is_number_integer() ||
            obj->at("position").get<std::int64_t>() < 0) {
            error = "position must be a non-negative integer";
            return std::nullopt;
        }
        answer.position = obj->at("position").get<std::size_t>();
        if (obj->contains("poi_in") && !obj->at("poi_in").is_null())
            answer.poi_in = obj->at("poi_in").get<std::string>();
        if (obj->contains("poi_out") && !obj->at("poi_out").is_null())
            answer.poi_out = obj->at("poi_out").get<std::string>();
        return answer;
    } catch (const std::exception& e) {
        error = std::string("answer JSON missing required fields: ") + e.what();
        return std::nullopt;
    }
}

}  // namespace

PerturbOutcome run_perturbation(ModelClient& client, const PerturbRequest& request,
                                const CorpusProfile& profile, double theta,
                                const PerturbLimits& limits, const MemoryLog& memory,
                                std::uint64_t seed, std::size_t max_candidates) {
    PerturbOutcome outcome;

    std::map<std::string, Poi> poi_index;
    for (const auto& poi : request.itinerary.pois) poi_index[poi.id] = poi;
    for (const auto& poi : request.pool.pois) poi_index[poi.id] = poi;
    std::set<std::string> pool_ids;
    for (const auto& poi : request.pool.pois) pool_ids.insert(poi.id);

    const ToolDispatcher dispatcher(poi_index, profile, theta);
    const auto specs = ToolDispatcher::tool_specs();

    const RenderedPrompt rendered =
        build_prompt(PromptTemplate::for_operation(request.op), request.itinerary, request.pool,
                     request.intents, memory, profile, max_candidates, seed);

    std::vector<ChatMessage> messages;
    messages.push_back({"system", rendered.system_text, {}, {}});
    messages.push_back({"user", rendered.user_text, {}, {}});
    outcome.transcript.push_back(message_to_json(messages[0]));
    outcome.transcript.push_back(message_to_json(messages[1]));

    auto log_message = [&outcome, &messages](ChatMessage message) {
        outcome.transcript.push_back(message_to_json(message));
        messages.push_back(std::move(message));
    };
    auto reject = [&outcome](RejectionReason reason, const std::string& detail) {
        outcome.rejection = reason;
        outcome.detail = detail;
        return outcome;
    };

    int tool_rounds = 0;
    int retries = 0;
    while (true) {
        ChatResponse response;
        try {
            response = client.complete(messages, specs);
        } catch (const TransportError& e) {
            return reject(RejectionReason::Transport, e.what());
        }
        if (response.usage) {
            outcome.usage.prompt_tokens += response.usage->prompt_tokens;
            outcome.usage.completion_tokens += response.usage->completion_tokens;
        }

        if (response.has_tool_calls()) {
            if (++tool_rounds > limits.max_tool_rounds)
                return reject(RejectionReason::Budget,
                              "tool-round limit (" + std::to_string(limits.max_tool_rounds) +
                                  ") exhausted");
            log_message({"assistant", response.text, response.tool_calls, {}});
            for (const auto& call : response.tool_calls) {
                const ordered_json result = dispatcher.dispatch(call.name, call.arguments);
                ChatMessage tool_msg;
                tool_msg.role = "tool";
                tool_msg.content = result.dump();
                tool_msg.tool_call_id = call.id;
                log_message(std::move(tool_msg));
            }
            continue;
        }

        log_message({"assistant", response.text, {}, {}});

        std::string parse_error;
        const auto answer = parse_answer(response.text, parse_error);
        std::string failure;
        if (!answer) {
            failure = "Could not parse your answer: " + parse_error +
                      ". Reply with exactly one JSON object in the required format.";
            if (retries++ >= limits.max_retries)
                return reject(RejectionReason::Parse, parse_error);
        } else {
            try {
                if (answer->op != request.op)
                    throw DomainError(std::string("operation must be ") + to_string(request.op));
                std::optional<Poi> poi_in;
                if (answer->poi_in) {
                    if (!pool_ids.count(*answer->poi_in))
                        throw DomainError("poi_in " + *answer->poi_in +
                                          " is not in the candidate pool");
                    poi_in = poi_index.at(*answer->poi_in);
                }
                PerturbationRecord record = make_record(request.itinerary, request.op,
                                                        answer->position, poi_in,
                                                        request.intents);
                if (answer->poi_out && record.poi_out &&
                    *answer->poi_out != record.poi_out->id)
                    throw DomainError("poi_out " + *answer->poi_out +
                                      " does not match the POI at position " +
                                      std::to_string(answer->position));

                if (annotate_verification(record, profile, theta)) {
                    outcome.record = std::move(record);
                    return outcome;
                }

                ordered_json verdicts;
                for (const auto& [aspect, verdict] : record.diagnostics) {
                    verdicts[to_string(aspect)] =
                        ordered_json{{"disrupted", verdict.disrupted}};
                }
                failure = "Verification failed: not every requested intent was disrupted. "
                          "Per-aspect verdicts: " +
                          verdicts.dump() + ". Choose a different edit and try again.";
                if (retries++ >= limits.max_retries)
                    return reject(RejectionReason::Intent,
                                  "intent verification failed after retries");
            } catch (const DomainError& e) {
                failure = std::string("Structurally invalid answer: ") + e.what() +
                          ". Fix the edit and reply again.";
                if (retries++ >= limits.max_retries)
                    return reject(RejectionReason::Structural, e.what());
            }
        }
        log_message({"user", failure, {}, {}});
    }
}

// ---------------------------------------------------------------------------
// Campaign

CampaignResult run_campaign(const CorpusBundle& bundle, const CampaignOptions& options,
                            ModelClient* client, const std::filesystem::path& out_jsonl) {
    if (options.backend != "oracle" && options.backend != "model")
        throw ParameterError("campaign backend must be oracle or model");
    if (options.backend == "model" && client == nullptr)
        throw ParameterError("model backend requires a client");

    const bool live = client != nullptr && client->is_live();
    const auto t0 = std::chrono::steady_clock::now();

    CampaignResult result;
    result.live_client = live;

    MemoryLog memory(bundle.name, options.op, options.memory_cap);
    const std::vector<Poi> all_pois = bundle.poi_list();

    std::vector<ordered_json> dataset_rows, reject_rows, transcript_rows;
    std::set<std::string> target_poi_ids;

    std::size_t processed = 0;
    for (std::size_t idx = 0; idx < bundle.itineraries.size(); ++idx) {
        if (options.max_itineraries && processed >= *options.max_itineraries) break;
        ++processed;
        const Itinerary& itinerary = bundle.itineraries[idx];
        const std::uint64_t item_seed =
            splitmix64(options.seed + 0x9e3779b97f4a7c15ULL * (idx + 1));
        const IntentSet intents = sample_intents(item_seed);
        result.attempted++;

        auto skip = [&](const std::string& reason) {
            result.skipped++;
            reject_rows.push_back({{"schema_version", 1},
                                   {"seq_id", itinerary.seq_id},
                                   {"reason", reason},
                                   {"op", to_string(options.op)}});
        };

        CandidatePool pool;
        try {
            pool = candidate_pool(all_pois, itinerary);
        } catch (const DomainError& e) {
            skip(std::string("INFEASIBLE: ") + e.what());
            continue;
        }

        std::optional<PerturbationRecord> accepted;
        if (options.backend == "oracle") {
            try {
                accepted = find_satisfying(itinerary, pool, options.op, intents, bundle.profile,
                                           options.theta, item_seed);
            } catch (const FeasibilityError& e) {
                skip(std::string("INFEASIBLE: ") + e.what());
                continue;
            }
            if (!accepted) {
                skip("EXHAUSTED: no draft satisfies the sampled intents");
                continue;
            }
        } else {
            PerturbRequest request{itinerary, pool, intents, options.op};
            try {
                enumerate_perturbations(itinerary, pool, options.op, 1);  // feasibility gate
            } catch (const FeasibilityError& e) {
                skip(std::string("INFEASIBLE: ") + e.what());
                continue;
            }
            PerturbOutcome outcome =
                run_perturbation(*client, request, bundle.profile, options.theta,
                                 options.limits, memory, item_seed, options.max_candidates);
            transcript_rows.push_back({{"schema_version", 1},
                                       {"seq_id", itinerary.seq_id},
                                       {"transcript", outcome.transcript}});
            result.usage.prompt_tokens += outcome.usage.prompt_tokens;
            result.usage.completion_tokens += outcome.usage.completion_tokens;
            if (outcome.record) {
                accepted = std::move(outcome.record);
            } else {
                result.rejected++;
                const std::string reason = to_string(*outcome.rejection);
                result.rejection_reasons[reason]++;
                reject_rows.push_back({{"schema_version", 1},
                                       {"seq_id", itinerary.seq_id},
                                       {"reason", reason},
                                       {"detail", outcome.detail},
                                       {"op", to_string(options.op)}});
                continue;
            }
        }

        result.accepted++;
        memory.append(*accepted);
        result.position_histogram[accepted->position]++;
        if (accepted->poi_in) target_poi_ids.insert(accepted->poi_in->id);
        if (accepted->poi_out) target_poi_ids.insert(accepted->poi_out->id);
        dataset_rows.push_back(record_to_json(*accepted, bundle.name));
    }

    const std::size_t graded = result.accepted + result.rejected;
    result.pert_acc = graded == 0 ? 0.0 : static_cast<double>(result.accepted) / graded;
    result.poi_div = result.accepted == 0
                         ? 0.0
                         : static_cast<double>(target_poi_ids.size()) / result.accepted;
    result.wall_seconds =
        live ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
             : 0.0;

    // dataset + sibling artifacts
    write_jsonl(out_jsonl, dataset_rows);
    std::filesystem::path stem = out_jsonl;
    stem.replace_extension();
    write_jsonl(stem.string() + ".rejects.jsonl", reject_rows);
    if (options.backend == "model")
        write_jsonl(stem.string() + ".transcripts.jsonl", transcript_rows);

    {
        std::vector<ordered_json> memory_rows;
        for (const auto& entry : memory.entries()) {
            ordered_json row = {{"schema_version", 1},
                                {"seq_id", entry.seq_id},
                                {"position", entry.position}};
            row["poi_in"] = entry.poi_in ? ordered_json(*entry.poi_in) : nullptr;
            row["poi_out"] = entry.poi_out ? ordered_json(*entry.poi_out) : nullptr;
            memory_rows.push_back(std::move(row));
        }
        write_jsonl(stem.string() + ".memory.jsonl", memory_rows);
    }

    {
        std::ofstream positions(stem.string() + ".positions.csv");
        positions << "op,position,count\n";
        for (const auto& [position, count] : result.position_histogram)
            positions << to_string(options.op) << "," << position << "," << count << "\n";
    }

    {
        ordered_json diag;
        diag["schema_version"] = 1;
        diag["corpus"] = bundle.name;
        diag["op"] = to_string(options.op);
        diag["backend"] = options.backend;
        diag["seed"] = options.seed;
        diag["theta"] = options.theta;
        diag["attempted"] = result.attempted;
        diag["accepted"] = result.accepted;
        diag["rejected"] = result.rejected;
        diag["skipped"] = result.skipped;
        diag["rejection_reasons"] = result.rejection_reasons;
        diag["pert_acc"] = result.pert_acc;
        diag["poi_div"] = result.poi_div;
        if (live) {
            diag["usage"] = {{"prompt_tokens", result.usage.prompt_tokens},
                             {"completion_tokens", result.usage.completion_tokens}};
            diag["wall_seconds"] = result.wall_seconds;
        }
        std::ofstream out(stem.string() + ".diagnostics.json");
        out << diag.dump(2) << "\n";
    }

    return result;
}

}  // namespace itmod
