#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "itmod/bench.hpp"
#include "itmod/disruption.hpp"
#include "itmod/ingest.hpp"
#include "itmod/model_client.hpp"
#include "itmod/oracle.hpp"
#include "itmod/pipeline.hpp"
#include "itmod/records.hpp"
#include "itmod/util.hpp"

namespace {

using itmod::ordered_json;

void error_json(const std::string& kind, const std::string& message) {
    ordered_json err = {{"error", kind}, {"message", message}};
    std::cerr << err.dump() << "\n";
}

std::vector<itmod::Operation> parse_ops(const std::string& op_flag) {
    if (op_flag == "all")
        return {itmod::Operation::Add, itmod::Operation::Delete, itmod::Operation::Replace};
    return {itmod::operation_from_string(op_flag)};
}

// --- ingest ---------------------------------------------------------------

struct IngestArgs {
    std::string input, schema, out, name = "corpus";
    std::string delimiter = ",";
    std::size_t min_len = 3, window = 21;
};

int cmd_ingest(const IngestArgs& args) {
    if (args.delimiter.size() != 1) throw itmod::ParameterError("delimiter must be one character");
    const auto schema = itmod::VisitSchema::from_mapping(args.schema, args.delimiter[0]);
    itmod::ParseResult parsed = itmod::parse_visits(args.input, schema);
    const auto itineraries = itmod::preprocess(parsed.itineraries, args.min_len, args.window);
    if (itineraries.empty())
        throw itmod::CorpusError("no itinerary survived preprocessing");
    const auto profile = itmod::profile_corpus(parsed.pois, itineraries, args.name);

    itmod::CorpusBundle bundle;
    bundle.name = args.name;
    for (const auto& poi : parsed.pois) bundle.pois[poi.id] = poi;
    bundle.itineraries = itineraries;
    bundle.profile = profile;
    itmod::save_bundle(args.out, bundle);

    if (!parsed.rejects.empty()) {
        std::vector<ordered_json> rows;
        for (const auto& reject : parsed.rejects)
            rows.push_back({{"schema_version", 1},
                            {"line", reject.line_number},
                            {"reason", reject.reason},
                            {"raw", reject.raw}});
        itmod::write_jsonl(std::filesystem::path(args.out) / "rejects.jsonl", rows);
    }

    ordered_json summary = {{"corpus", args.name},
                            {"pois", bundle.pois.size()},
                            {"itineraries", bundle.itineraries.size()},
                            {"rejected_rows", parsed.rejects.size()},
                            {"pop_thresholds", {profile.pop_t1, profile.pop_t2}},
                            {"dist_thresholds", {profile.dist_t1, profile.dist_t2}}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// --- perturb ----------------------------------------------------------------

struct PerturbArgs {
    std::string bundle, op = "add", backend = "oracle", model_config, out;
    std::uint64_t seed = 0;
    double theta = itmod::kDefaultTheta;
    std::size_t memory_cap = 50, max_candidates = 100;
    std::optional<std::size_t> max_itineraries;
};

int cmd_perturb(const PerturbArgs& args) {
    const auto bundle = itmod::load_bundle(args.bundle);
    itmod::CampaignOptions options;
    options.op = itmod::operation_from_string(args.op);
    options.backend = args.backend;
    options.seed = args.seed;
    options.theta = args.theta;
    options.memory_cap = args.memory_cap;
    options.max_candidates = args.max_candidates;
    options.max_itineraries = args.max_itineraries;

    std::unique_ptr<itmod::ModelClient> client;
    if (args.backend == "model") {
        if (args.model_config.empty())
            throw itmod::ConfigError("--model-config is required for the model backend");
        client = itmod::make_client(itmod::ModelConfig::from_file(args.model_config));
    }

    const auto result = itmod::run_campaign(bundle, options, client.get(), args.out);
    ordered_json summary = {{"corpus", bundle.name},
                            {"op", itmod::to_string(options.op)},
                            {"backend", options.backend},
                            {"attempted", result.attempted},
                            {"accepted", result.accepted},
                            {"rejected", result.rejected},
                            {"skipped", result.skipped},
                            {"pert_acc", result.pert_acc},
                            {"poi_div", result.poi_div}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// --- verify -----------------------------------------------------------------

int cmd_verify(const std::string& bundle_dir, const std::string& records_path, double theta) {
    const auto bundle = itmod::load_bundle(bundle_dir);
    const auto rows = itmod::read_jsonl(records_path);
    std::size_t passed = 0, failed = 0;
    for (const auto& row : rows) {
        std::string seq = row.value("seq_id", "?");
        try {
            itmod::PerturbationRecord record = itmod::record_from_json(row, bundle.pois);
            if (!itmod::round_trips(record)) {
                std::cout << "FAIL " << seq << " round-trip mismatch\n";
                ++failed;
                continue;
            }
            if (itmod::annotate_verification(record, bundle.profile, theta)) {
                std::cout << "PASS " << seq << "\n";
                ++passed;
            } else {
                std::cout << "FAIL " << seq << " intent verification failed\n";
                ++failed;
            }
        } catch (const std::exception& e) {
            std::cout << "FAIL " << seq << " " << e.what() << "\n";
            ++failed;
        }
    }
    std::cout << "verified " << (passed + failed) << " records: " << passed << " pass, "
              << failed << " fail\n";
    return failed == 0 ? 0 : 1;
}

// --- lemmas -----------------------------------------------------------------

int cmd_lemmas(const std::string& op_flag, std::int64_t n_max, double theta,
               const std::string& out_path) {
    ordered_json report;
    report["schema_version"] = 1;
    report["n_max"] = n_max;
    report["theta"] = theta;
    std::size_t total_violations = 0;
    for (const itmod::Operation op : parse_ops(op_flag)) {
        const auto r = itmod::verify_lemma_bounds(op, n_max, theta);
        total_violations += r.violations;
        report[itmod::to_string(op)] = {{"cases", r.cases},
                                        {"max_abs_deviation", r.max_abs_deviation},
                                        {"min_slack", r.min_slack},
                                        {"violations", r.violations},
                                        {"theta_coverage_n_max", r.theta_coverage_n_max}};
    }
    report["violations"] = total_violations;
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << report.dump(2) << "\n";
    }
    std::cout << report.dump(2) << "\n";
    return total_violations == 0 ? 0 : 1;
}

// --- bench ------------------------------------------------------------------

struct BenchBuildArgs {
    std::string bundle, records, out;
    std::uint64_t split_seed = 0;
};

int cmd_bench_build(const BenchBuildArgs& args) {
    const auto bundle = itmod::load_bundle(args.bundle);
    const auto rows = itmod::read_jsonl(args.records);
    std::vector<itmod::PerturbationRecord> records;
    for (const auto& row : rows)
        records.push_back(itmod::record_from_json(row, bundle.pois));
    if (records.empty()) throw itmod::CorpusError("no records in " + args.records);

    const auto split =
        itmod::split_indices(records.size(), {7, 1, 2}, args.split_seed);
    std::vector<std::string> split_of(records.size());
    for (std::size_t i : split.train) split_of[i] = "train";
    for (std::size_t i : split.valid) split_of[i] = "valid";
    for (std::size_t i : split.test) split_of[i] = "test";

    std::vector<ordered_json> out_rows;
    std::size_t built = 0, skipped = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        itmod::TaskBuildFailure failure;
        auto task = itmod::build_task(records[i], bundle.pois, bundle.name,
                                      itmod::splitmix64(args.split_seed + i), &failure);
        if (!task) {
            ++skipped;
            continue;
        }
        char task_id[64];
        std::snprintf(task_id, sizeof(task_id), "%s-%06zu", bundle.name.c_str(), i);
        task->task_id = task_id;
        task->split = split_of[i];
        out_rows.push_back(itmod::task_to_json(*task));
        ++built;
    }
    itmod::write_jsonl(args.out, out_rows);
    ordered_json summary = {{"tasks", built},
                            {"skipped", skipped},
                            {"train", split.train.size()},
                            {"valid", split.valid.size()},
                            {"test", split.test.size()}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

struct BenchScoreArgs {
    std::string bundle, tasks, answers, model_config;
    std::string rag = "random";
    std::string split = "test";
    std::string model_label = "scripted", setting_label;
    std::size_t k = 3;
    std::uint64_t seed = 0;
    double theta = itmod::kDefaultTheta;
    std::string out_dir = ".";
};

// Modification prompt for the model-backed answer source.
std::string modification_prompt(const itmod::BenchTask& task,
                                std::span<const itmod::BenchTask> examples) {
    std::ostringstream out;
    out << "Task: revert a modified travel itinerary to its original form by one "
        << itmod::to_string(task.op) << " operation.\n";
    out << "Hint: " << task.hint << "\n";
    out << "Need-to-modify itinerary:";
    for (const auto& id : task.need_to_modify) out << " " << id;
    out << "\n";
    if (!task.candidates.empty()) {
        out << "Candidate POIs (exactly one is correct):";
        for (const auto& id : task.candidates) out << " " << id;
        out << "\n";
    }
    if (!examples.empty()) {
        out << "Solved examples:\n";
        for (const auto& example : examples) {
            out << "- input:";
            for (const auto& id : example.need_to_modify) out << " " << id;
            out << " | hint: " << example.hint << " | answer:";
            for (const auto& id : example.ground_truth.original_ids) out << " " << id;
            out << "\n";
        }
    }
    out << "Reply with one JSON object: {\"itinerary\": [\"poi-id\", ...]} giving the full "
           "restored POI sequence in order.\n";
    return out.str();
}

int cmd_bench_score(const BenchScoreArgs& args) {
    const auto bundle = itmod::load_bundle(args.bundle);
    std::vector<itmod::BenchTask> all_tasks;
    for (const auto& row : itmod::read_jsonl(args.tasks))
        all_tasks.push_back(itmod::task_from_json(row));

    std::vector<itmod::BenchTask> train, scored;
    for (const auto& task : all_tasks) {
        if (task.split == "train") train.push_back(task);
        if (args.split == "all" || task.split == args.split) scored.push_back(task);
    }
    if (scored.empty()) throw itmod::ParameterError("no tasks in split " + args.split);

    const std::string setting =
        args.setting_label.empty() ? args.rag : args.setting_label;

    itmod::AnswerSource source;
    std::unique_ptr<itmod::ModelClient> client;
    std::map<std::string, std::vector<std::string>> scripted;
    if (!args.answers.empty()) {
        for (const auto& row : itmod::read_jsonl(args.answers)) {
            std::vector<std::string> ids;
            for (const auto& id : row.at("itinerary")) ids.push_back(id.get<std::string>());
            scripted[row.at("task_id").get<std::string>()] = std::move(ids);
        }
        source = [&scripted](const itmod::BenchTask& task)
            -> std::optional<std::vector<std::string>> {
            const auto it = scripted.find(task.task_id);
            if (it == scripted.end()) return std::nullopt;
            return it->second;
        };
    } else if (!args.model_config.empty()) {
        client = itmod::make_client(itmod::ModelConfig::from_file(args.model_config));
        const auto strategy = itmod::rag_from_string(args.rag);
        source = [&, strategy](const itmod::BenchTask& task)
            -> std::optional<std::vector<std::string>> {
            std::vector<itmod::BenchTask> examples;
            if (!train.empty() && args.k > 0) {
                const std::size_t k = std::min(args.k, train.size());
                const std::uint64_t task_seed =
                    itmod::splitmix64(args.seed ^ itmod::fnv1a(task.task_id));
                for (std::size_t idx :
                     itmod::retrieve_examples(task, train, strategy, k, task_seed, nullptr))
                    examples.push_back(train[idx]);
            }
            std::vector<itmod::ChatMessage> messages;
            messages.push_back({"system",
                                "You are a travel-itinerary modification assistant. Follow the "
                                "hint and restore the original itinerary.",
                                {},
                                {}});
            messages.push_back({"user", modification_prompt(task, examples), {}, {}});
            try {
                const auto response = client->complete(messages, {});
                const auto obj_start = response.text.find('{');
                if (obj_start == std::string::npos) return std::nullopt;
                const auto parsed = ordered_json::parse(
                    response.text.substr(obj_start,
                                         response.text.rfind('}') - obj_start + 1));
                std::vector<std::string> ids;
                for (const auto& id : parsed.at("itinerary"))
                    ids.push_back(id.get<std::string>());
                return ids;
            } catch (const std::exception&) {
                return std::nullopt;
            }
        };
    } else {
        throw itmod::ParameterError("bench score needs --answers or --model-config");
    }

    const auto output = itmod::run_benchmark(scored, source, bundle.pois, bundle.profile,
                                             args.theta, args.model_label, setting);

    std::filesystem::create_directories(args.out_dir);
    const auto results_path = std::filesystem::path(args.out_dir) / "results.csv";
    const bool fresh = !std::filesystem::exists(results_path);
    std::ofstream results(results_path, std::ios::app);
    if (fresh) results << "model,dataset,op,setting,mod,apr,n\n";
    for (const auto& row : output.results) {
        results << row.model << "," << row.dataset << "," << row.op << "," << row.setting << ","
                << row.mod << "," << row.apr << "," << row.n << "\n";
    }

    {
        // verdicts.jsonl accumulates across settings, like results.csv
        std::ofstream verdicts(std::filesystem::path(args.out_dir) / "verdicts.jsonl",
                               std::ios::app);
        for (const auto& verdict : output.verdicts) {
            const ordered_json row = {{"schema_version", 1},
                                      {"task_id", verdict.task_id},
                                      {"model", args.model_label},
                                      {"setting", setting},
                                      {"mod", verdict.mod},
                                      {"apr", verdict.apr},
                                      {"apr_hinted", verdict.apr_hinted},
                                      {"apr_invariant", verdict.apr_invariant},
                                      {"reason", verdict.reason}};
            verdicts << row.dump() << "\n";
        }
    }

    ordered_json summary = ordered_json::array();
    for (const auto& row : output.results)
        summary.push_back({{"dataset", row.dataset},
                           {"op", row.op},
                           {"setting", row.setting},
                           {"mod", row.mod},
                           {"apr", row.apr},
                           {"n", row.n}});
    std::cout << summary.dump(2) << "\n";
    return 0;
}

std::vector<itmod::ScoreRow> load_score_rows(const std::string& results_csv,
                                             const std::string& metric) {
    std::ifstream in(results_csv);
    if (!in) throw itmod::CorpusError("cannot open " + results_csv);
    std::string line;
    if (!std::getline(in, line)) throw itmod::CorpusError("empty results file");
    const auto header = itmod::split(line, ',');
    auto col = [&header, &results_csv](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (itmod::trim(header[i]) == name) return i;
        throw itmod::SchemaError(results_csv + ": missing column " + name);
    };
    const std::size_t c_model = col("model"), c_dataset = col("dataset"), c_op = col("op"),
                      c_setting = col("setting"), c_metric = col(metric);
    std::vector<itmod::ScoreRow> rows;
    const std::size_t needed =
        1 + std::max({c_model, c_dataset, c_op, c_setting, c_metric});
    while (std::getline(in, line)) {
        if (itmod::trim(line).empty()) continue;
        const auto fields = itmod::split(line, ',');
        if (fields.size() < needed)
            throw itmod::SchemaError(results_csv + ": short row: " + line);
        itmod::ScoreRow row;
        row.model = fields[c_model];
        row.dataset = fields[c_dataset];
        row.op = fields[c_op];
        row.setting = fields[c_setting];
        row.score = std::stod(fields[c_metric]);
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_bench_aggregate(const std::string& results_csv, const std::string& baseline,
                        const std::string& out_path) {
    ordered_json report;
    report["schema_version"] = 1;
    for (const std::string metric : {"mod", "apr"}) {
        const auto rows = load_score_rows(results_csv, metric);
        const auto entries = itmod::borda_aggregate(
            rows, baseline.empty() ? std::nullopt : std::optional<std::string>(baseline));
        ordered_json table = ordered_json::array();
        for (const auto& entry : entries) {
            ordered_json item = {{"setting", entry.setting},
                                 {"borda", entry.borda},
                                 {"rank", entry.rank}};
            item["mean_delta"] =
                entry.mean_delta ? ordered_json(*entry.mean_delta) : nullptr;
            table.push_back(std::move(item));
        }
        report[metric] = table;
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << report.dump(2) << "\n";
    }
    std::cout << report.dump(2) << "\n";
    return 0;
}

// --- report -----------------------------------------------------------------

int cmd_report(const std::string& results_csv, const std::string& positions_csv,
               const std::string& baseline, const std::string& out_borda,
               const std::string& out_positions) {
    if (results_csv.empty() && positions_csv.empty())
        throw itmod::ParameterError("report needs --results and/or --positions");

    if (!results_csv.empty()) {
        for (const std::string metric : {"mod", "apr"}) {
            const auto rows = load_score_rows(results_csv, metric);
            const auto entries = itmod::borda_aggregate(
                rows, baseline.empty() ? std::nullopt : std::optional<std::string>(baseline));
            std::cout << "Borda (" << metric << "):\n";
            std::cout << "  rank  setting                borda    mean_delta\n";
            for (const auto& entry : entries) {
                char line[160];
                std::snprintf(line, sizeof(line), "  %-5d %-22s %-8.1f %s", entry.rank,
                              entry.setting.c_str(), entry.borda,
                              entry.mean_delta ? std::to_string(*entry.mean_delta).c_str()
                                               : "-");
                std::cout << line << "\n";
            }
        }
        if (!out_borda.empty()) cmd_bench_aggregate(results_csv, baseline, out_borda);
    }

    if (!positions_csv.empty()) {
        std::ifstream in(positions_csv);
        if (!in) throw itmod::CorpusError("cannot open " + positions_csv);
        std::string line;
        std::getline(in, line);  // header
        std::map<std::pair<std::string, std::size_t>, std::size_t> hist;
        while (std::getline(in, line)) {
            if (itmod::trim(line).empty()) continue;
            const auto fields = itmod::split(line, ',');
            if (fields.size() < 3) continue;
            hist[{fields[0], std::stoull(fields[1])}] += std::stoull(fields[2]);
        }
        std::ostringstream out;
        out << "op,position,count\n";
        for (const auto& [key, count] : hist)
            out << key.first << "," << key.second << "," << count << "\n";
        if (!out_positions.empty()) {
            std::ofstream f(out_positions);
            f << out.str();
        } else {
            std::cout << out.str();
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"itinerary perturbation & modification benchmark toolkit"};
    app.require_subcommand(1);

    // ingest
    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "parse a visit CSV into a corpus bundle");
    ingest->add_option("--input", ingest_args.input, "visit CSV")->required();
    ingest->add_option("--schema", ingest_args.schema,
                       "column mapping, e.g. user_id=uid,poi_id=poi");
    ingest->add_option("--delimiter", ingest_args.delimiter, "CSV delimiter (default ,)");
    ingest->add_option("--name", ingest_args.name, "corpus name");
    ingest->add_option("--min-len", ingest_args.min_len, "minimum itinerary length");
    ingest->add_option("--window", ingest_args.window, "segmentation window");
    ingest->add_option("--out", ingest_args.out, "bundle output directory")->required();

    // perturb
    PerturbArgs perturb_args;
    std::size_t perturb_max_itins = 0;
    auto* perturb = app.add_subcommand("perturb", "run a perturbation campaign");
    perturb->add_option("--bundle", perturb_args.bundle, "corpus bundle dir")->required();
    perturb->add_option("--op", perturb_args.op, "add|delete|replace")->required();
    perturb->add_option("--backend", perturb_args.backend, "oracle|model");
    perturb->add_option("--seed", perturb_args.seed, "campaign seed");
    perturb->add_option("--theta", perturb_args.theta, "Hellinger threshold");
    perturb->add_option("--model-config", perturb_args.model_config, "model endpoint config");
    perturb->add_option("--memory", perturb_args.memory_cap, "memory block size");
    perturb->add_option("--max-candidates", perturb_args.max_candidates,
                        "candidate cap in prompts");
    perturb->add_option("--max-itineraries", perturb_max_itins, "cap processed itineraries");
    perturb->add_option("--out", perturb_args.out, "dataset JSONL path")->required();

    // verify
    std::string verify_bundle, verify_records;
    double verify_theta = itmod::kDefaultTheta;
    auto* verify = app.add_subcommand("verify", "re-verify a perturbation dataset");
    verify->add_option("--bundle", verify_bundle, "corpus bundle dir")->required();
    verify->add_option("--records", verify_records, "dataset JSONL")->required();
    verify->add_option("--theta", verify_theta, "Hellinger threshold");

    // lemmas
    std::string lemmas_op = "all", lemmas_out;
    std::int64_t lemmas_n_max = 200;
    double lemmas_theta = itmod::kDefaultTheta;
    auto* lemmas = app.add_subcommand("lemmas", "verify the Hellinger bound sweep");
    lemmas->add_option("--op", lemmas_op, "all|add|delete|replace");
    lemmas->add_option("--n-max", lemmas_n_max, "sweep bound");
    lemmas->add_option("--theta", lemmas_theta, "threshold for coverage");
    lemmas->add_option("--out", lemmas_out, "JSON report path");

    // bench
    auto* bench = app.add_subcommand("bench", "benchmark task tools");
    bench->require_subcommand(1);

    BenchBuildArgs build_args;
    auto* bench_build = bench->add_subcommand("build", "turn records into tasks");
    bench_build->add_option("--bundle", build_args.bundle, "corpus bundle dir")->required();
    bench_build->add_option("--records", build_args.records, "dataset JSONL")->required();
    bench_build->add_option("--split-seed", build_args.split_seed, "split shuffle seed");
    bench_build->add_option("--out", build_args.out, "tasks JSONL path")->required();

    BenchScoreArgs score_args;
    auto* bench_score = bench->add_subcommand("score", "score answers against tasks");
    bench_score->add_option("--bundle", score_args.bundle, "corpus bundle dir")->required();
    bench_score->add_option("--tasks", score_args.tasks, "tasks JSONL")->required();
    bench_score->add_option("--answers", score_args.answers, "scripted answers JSONL");
    bench_score->add_option("--model-config", score_args.model_config, "model endpoint config");
    bench_score->add_option("--rag", score_args.rag, "random|sparse|dense");
    bench_score->add_option("--k", score_args.k, "examples per prompt");
    bench_score->add_option("--seed", score_args.seed, "retrieval seed");
    bench_score->add_option("--split", score_args.split, "train|valid|test|all");
    bench_score->add_option("--theta", score_args.theta, "Hellinger threshold");
    bench_score->add_option("--model-label", score_args.model_label, "model column value");
    bench_score->add_option("--setting", score_args.setting_label, "setting column value");
    bench_score->add_option("--out-dir", score_args.out_dir, "output directory");

    std::string agg_results, agg_baseline, agg_out;
    auto* bench_agg = bench->add_subcommand("aggregate", "Borda-aggregate a results table");
    bench_agg->add_option("--results", agg_results, "results.csv")->required();
    bench_agg->add_option("--baseline", agg_baseline, "baseline setting for mean delta");
    bench_agg->add_option("--out", agg_out, "borda.json path");

    // report
    std::string report_results, report_positions, report_baseline, report_out_borda,
        report_out_positions;
    auto* report = app.add_subcommand("report", "emit Borda tables and position histograms");
    report->add_option("--results", report_results, "results.csv");
    report->add_option("--positions", report_positions, "positions.csv");
    report->add_option("--baseline", report_baseline, "baseline setting");
    report->add_option("--out-borda", report_out_borda, "borda.json path");
    report->add_option("--out-positions", report_out_positions, "merged positions csv path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help();
        error_json("usage", e.what());
        return 2;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(ingest_args);
        if (perturb->parsed()) {
            if (perturb_max_itins > 0) perturb_args.max_itineraries = perturb_max_itins;
            return cmd_perturb(perturb_args);
        }
        if (verify->parsed()) return cmd_verify(verify_bundle, verify_records, verify_theta);
        if (lemmas->parsed())
            return cmd_lemmas(lemmas_op, lemmas_n_max, lemmas_theta, lemmas_out);
        if (bench->parsed()) {
            if (bench_build->parsed()) return cmd_bench_build(build_args);
            if (bench_score->parsed()) return cmd_bench_score(score_args);
            if (bench_agg->parsed())
                return cmd_bench_aggregate(agg_results, agg_baseline, agg_out);
        }
        if (report->parsed())
            return cmd_report(report_results, report_positions, report_baseline,
                              report_out_borda, report_out_positions);
    } catch (const itmod::SchemaError& e) {
        error_json("schema", e.what());
        return 1;
    } catch (const itmod::ConfigError& e) {
        error_json("config", e.what());
        return 1;
    } catch (const itmod::TransportError& e) {
        error_json("transport", e.what());
        return 1;
    } catch (const std::exception& e) {
        error_json("runtime", e.what());
        return 1;
    }
    return 0;
}
