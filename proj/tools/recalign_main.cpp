// recalign command-line tool: exact finite-domain diagnostics (examples,
// bounds, frontier) and the neural training wing (train, sweep, report).
// Exit codes: 0 success, 1 property/golden violation or computation
// failure, 2 usage or parse error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "recalign/frontier.hpp"
#include "recalign/instance_io.hpp"
#include "recalign/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace recalign;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

// ---- examples ----

struct ExampleGolden {
    double seen_risk, unseen_risk, i_seen, i_unseen, kl;
};

struct ExampleRow {
    std::string name;
    ExampleGolden computed;
    ExampleGolden golden;
};

ExampleGolden compute_example(repmap::ExampleCase which) {
    const repmap::DomainPair pair = repmap::example_domain_pair(which);
    const repmap::RepresentationMap f = repmap::identity_map(pair.seen.x_space);
    const prob::JointPmf seen_joint = repmap::pushforward_joint(pair.seen, f);
    const prob::JointPmf unseen_joint = repmap::pushforward_joint(pair.unseen, f);
    const repmap::ClassifierTable g = repmap::bayes_classifier(seen_joint);
    ExampleGolden out;
    out.seen_risk = repmap::classification_risk(pair.seen, f, g);
    out.unseen_risk = repmap::classification_risk(pair.unseen, f, g);
    out.i_seen = prob::mutual_information(seen_joint);
    out.i_unseen = prob::mutual_information(unseen_joint);
    out.kl = prob::kl_divergence(unseen_joint, seen_joint);
    return out;
}

ExampleGolden golden_from_json(const json& j) {
    ExampleGolden g;
    g.seen_risk = j.at("seen_risk").get<double>();
    g.unseen_risk = j.at("unseen_risk").get<double>();
    g.i_seen = j.at("i_seen").get<double>();
    g.i_unseen = j.at("i_unseen").get<double>();
    g.kl = j.at("kl").get<double>();
    return g;
}

int cmd_examples(bool as_json, const std::string& golden_path) {
    ExampleGolden golden_cov{0.1, 0.9, 0.53100440641071889, 0.53100440641071889,
                             2.53594000115385};
    ExampleGolden golden_con{0.139, 0.451, 0.064784563710282739, 0.050585503978912816,
                             2.5359400011538495};
    if (!golden_path.empty()) {
        const json j = json::parse(read_file(golden_path));
        golden_cov = golden_from_json(j.at("covariate_aligned"));
        golden_con = golden_from_json(j.at("concept_aligned"));
    }

    std::vector<ExampleRow> rows = {
        {"covariate-aligned", compute_example(repmap::ExampleCase::covariate_aligned),
         golden_cov},
        {"concept-aligned", compute_example(repmap::ExampleCase::concept_aligned), golden_con}};

    double max_dev = 0.0;
    for (const ExampleRow& r : rows) {
        max_dev = std::max({max_dev, std::abs(r.computed.seen_risk - r.golden.seen_risk),
                            std::abs(r.computed.unseen_risk - r.golden.unseen_risk),
                            std::abs(r.computed.i_seen - r.golden.i_seen),
                            std::abs(r.computed.i_unseen - r.golden.i_unseen),
                            std::abs(r.computed.kl - r.golden.kl)});
    }
    const bool ok = max_dev <= 1e-9;

    if (as_json) {
        json out;
        out["cases"] = json::array();
        for (const ExampleRow& r : rows)
            out["cases"].push_back({{"name", r.name},
                                    {"seen_risk", r.computed.seen_risk},
                                    {"unseen_risk", r.computed.unseen_risk},
                                    {"i_seen", r.computed.i_seen},
                                    {"i_unseen", r.computed.i_unseen},
                                    {"kl", r.computed.kl}});
        out["max_deviation"] = max_dev;
        out["ok"] = ok;
        std::cout << out.dump(2) << '\n';
    } else {
        std::printf("%-20s %10s %12s %10s %10s %10s\n", "case", "seen_risk", "unseen_risk",
                    "i_seen", "i_unseen", "kl_joint");
        for (const ExampleRow& r : rows)
            std::printf("%-20s %10.6f %12.6f %10.6f %10.6f %10.6f\n", r.name.c_str(),
                        r.computed.seen_risk, r.computed.unseen_risk, r.computed.i_seen,
                        r.computed.i_unseen, r.computed.kl);
        std::printf("golden check: %s (max deviation %.3g)\n", ok ? "OK" : "MISMATCH", max_dev);
    }
    return ok ? kExitOk : kExitViolation;
}

// ---- bounds ----

frontier::MapSearch make_search(bool deterministic, int resolution, int workers,
                                std::size_t cap) {
    return deterministic ? frontier::MapSearch::deterministic_maps(cap, workers)
                         : frontier::MapSearch::simplex(resolution, cap, workers);
}

int cmd_bounds(const std::string& instance_path, long long map_index, bool deterministic,
               int resolution, const std::string& divergence, int workers, std::size_t cap,
               const std::string& out_dir, bool as_json) {
    const instance_io::Instance inst = instance_io::load_instance(instance_path);
    const prob::DivergenceKind div = prob::divergence_from_string(divergence);
    const repmap::Distortion loss = inst.default_distortion();
    const frontier::MapFamily family(inst.x_space, inst.z_space,
                                     make_search(deterministic, resolution, workers, cap));

    frontier::BoundReport worst;
    double min_slack = std::numeric_limits<double>::infinity();
    if (map_index >= 0) {
        const repmap::RepresentationMap f =
            family.map_at(static_cast<std::size_t>(map_index));
        const repmap::Decoder theta = frontier::best_response_decoder(inst.unseen, f, loss);
        worst = frontier::mi_bound_report(inst.unseen, inst.seen, f, theta, loss, div, family);
        min_slack = std::min(worst.slack_1, worst.slack_2);
    } else {
        const auto reports =
            frontier::mi_bound_report_all(inst.unseen, inst.seen, loss, div, family);
        for (const frontier::BoundReport& rep : reports) {
            const double s = std::min(rep.slack_1, rep.slack_2);
            if (s < min_slack) {
                min_slack = s;
                worst = rep;
            }
        }
    }

    const std::string report = frontier::bound_report_json(worst, div);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "bound_report.json", report + "\n");
    }
    if (as_json) {
        std::cout << report << '\n';
    } else {
        std::printf("instance: %s, maps checked: %s, divergence: %s\n", inst.name.c_str(),
                    map_index >= 0 ? "1" : std::to_string(family.count()).c_str(),
                    divergence.c_str());
        std::printf("worst map %s: slack_1 = %.3g, slack_2 = %.3g\n", worst.map_id.c_str(),
                    worst.slack_1, worst.slack_2);
    }
    return min_slack >= -1e-9 ? kExitOk : kExitViolation;
}

// ---- frontier ----

std::vector<double> parse_gamma_grid(const std::string& text) {
    // a:b:n inclusive
    double lo = 0.0, hi = 0.0;
    int n = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 1 || hi < lo)
        throw ParseError("bad --gamma-grid '" + text + "' (expected a:b:n)");
    std::vector<double> grid;
    grid.reserve(n);
    if (n == 1) {
        grid.push_back(lo);
    } else {
        for (int i = 0; i < n; ++i)
            grid.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    }
    return grid;
}

int cmd_frontier(const std::string& instance_path, const std::string& gamma_grid_text,
                 const std::string& theta_mode, bool deterministic, int resolution,
                 const std::string& divergence, int workers, std::size_t cap,
                 const std::string& out_dir) {
    const instance_io::Instance inst = instance_io::load_instance(instance_path);
    const prob::DivergenceKind div = prob::divergence_from_string(divergence);
    const repmap::Distortion loss = inst.default_distortion();
    const std::vector<double> grid = parse_gamma_grid(gamma_grid_text);
    const frontier::MapFamily family(inst.x_space, inst.z_space,
                                     make_search(deterministic, resolution, workers, cap));

    repmap::Decoder theta;
    if (theta_mode == "identity") {
        theta = repmap::index_decoder(inst.z_space, inst.x_space.size());
    } else if (theta_mode == "center") {
        theta = frontier::best_response_decoder(
            inst.unseen, repmap::constant_map(inst.x_space, inst.z_space, 0), loss);
        theta.id = "center";
    } else {
        throw ParseError("unknown --theta mode '" + theta_mode + "'");
    }

    const auto curve = frontier::trade_off_curve(inst.unseen, inst.seen, theta, loss, grid,
                                                 family, div);
    // CurveTooShort propagates as a usage-level error (exit 2).
    const bool convexity = !deterministic && div == prob::DivergenceKind::kl;
    const frontier::ShapeReport shape =
        frontier::curve_shape_report(curve, deterministic ? 1 : resolution, convexity);

    std::ostringstream csv;
    frontier::write_frontier_csv(csv, curve);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "frontier.csv", csv.str());
    } else {
        std::cout << csv.str();
    }
    std::printf("feasible points: %zu / %zu\n", shape.feasible_points, curve.size());
    std::printf("max monotonicity violation: %.3g\n", shape.max_monotonicity_violation);
    if (shape.convexity_checked)
        std::printf("max convexity violation: %.3g (tolerance %.3g)\n",
                    shape.max_convexity_violation, shape.convexity_tolerance);
    std::printf("shape check: %s\n", shape.pass() ? "OK" : "VIOLATION");
    return shape.pass() ? kExitOk : kExitViolation;
}

// ---- train / sweep / report ----

datagen::SuiteOptions suite_options_from_json(const json& j) {
    datagen::SuiteOptions opts;
    opts.n = j.value("n", std::size_t{2000});
    opts.d = j.value("d", std::size_t{6});
    opts.sigma = j.value("sigma", 0.1);
    opts.p_inv = j.value("p_inv", 0.25);
    if (j.contains("p_sp_train"))
        opts.p_sp_train = j.at("p_sp_train").get<std::vector<double>>();
    opts.p_sp_test = j.value("p_sp_test", 0.9);
    opts.label_prior = j.value("label_prior", 0.5);
    return opts;
}

int cmd_train(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
    json j;
    try {
        j = json::parse(read_file(config_path));
    } catch (const json::exception& e) {
        throw ParseError(config_path + ": " + e.what());
    }
    datagen::SuiteOptions opts;
    if (j.contains("suite")) opts = suite_options_from_json(j.at("suite"));
    const std::uint64_t data_seed = j.value("data_seed", seed);

    // Suite-sized defaults overlaid with the file's "train" object.
    json full = json::parse(trainer::config_to_json(trainer::default_config(opts.d)));
    bool seed_in_file = false;
    if (j.contains("train")) {
        full.merge_patch(j.at("train"));
        seed_in_file = j.at("train").contains("seed");
    }
    trainer::TrainConfig config = trainer::config_from_json(full.dump());
    if (!seed_in_file) config.seed = seed;

    const datagen::Suite suite = datagen::cmnist_like_suite(data_seed, opts);
    const trainer::RunResult result = trainer::train(config, suite.seen, suite.test);

    std::ostringstream csv;
    trainer::write_results_csv(csv, {result});
    std::ostringstream log;
    trainer::write_run_log(log, result);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "results.csv", csv.str());
        write_file(fs::path(out_dir) / "run_log.jsonl", log.str());
        write_file(fs::path(out_dir) / "run_result.json", result.canonical_json() + "\n");
    }
    std::printf("%s: train %.4f, val %.4f, test %.4f (%.0f ms)\n",
                config.algorithm.c_str(), result.train_acc, result.val_acc, result.test_acc,
                result.wall_ms);
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, int workers, const std::string& out_dir) {
    const trainer::SweepSpec spec = trainer::sweep_spec_from_json(read_file(config_path));
    const trainer::SweepOutcome outcome = trainer::run_sweep(spec, workers);

    std::ostringstream results_csv;
    trainer::write_results_csv(results_csv, outcome.runs);
    std::ostringstream summary_csv;
    trainer::write_summary_csv(summary_csv, outcome.summary);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "results.csv", results_csv.str());
        write_file(fs::path(out_dir) / "summary.csv", summary_csv.str());
    }
    std::size_t diverged = 0;
    for (const trainer::RunResult& r : outcome.runs)
        if (r.diverged) {
            ++diverged;
            std::cerr << "diverged: " << r.divergence_note << " (" << r.config.algorithm
                      << ", alpha=" << r.config.objective.alpha
                      << ", beta=" << r.config.objective.beta << ")\n";
        }
    std::printf("%-12s %-18s %s\n", "algorithm", "test_acc", "n_seeds");
    for (const trainer::SummaryRow& row : outcome.summary)
        std::printf("%-12s %.4f +/- %.4f   %zu\n", row.variant.c_str(), row.mean_test_acc,
                    row.std_test_acc, row.n_seeds);
    if (diverged > 0)
        std::printf("diverged runs: %zu / %zu (excluded by model selection)\n", diverged,
                    outcome.runs.size());
    return kExitOk;
}

int cmd_report(const std::string& results_path, bool as_json) {
    std::ifstream in(results_path);
    if (!in) throw ParseError(results_path + ": cannot open file");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(results_path + ": empty file");
    if (line.rfind("algorithm,", 0) != 0)
        throw ParseError(results_path + ": unexpected header '" + line + "'");

    struct Row {
        std::string algorithm;
        std::uint64_t seed;
        double val_acc, test_acc;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 10)
            throw ParseError(results_path + ":" + std::to_string(line_no) +
                             ": expected 10 fields");
        Row r;
        r.algorithm = fields[0];
        r.seed = std::stoull(fields[6]);
        r.val_acc = std::stod(fields[7]);
        r.test_acc = std::stod(fields[8]);
        rows.push_back(std::move(r));
    }

    // Training-domain validation per (algorithm, seed), then mean +/- std
    // of the selected test accuracies per algorithm.
    std::vector<std::string> algorithms;
    for (const Row& r : rows)
        if (std::find(algorithms.begin(), algorithms.end(), r.algorithm) == algorithms.end())
            algorithms.push_back(r.algorithm);

    json out = json::array();
    for (const std::string& algo : algorithms) {
        std::vector<std::uint64_t> seeds;
        for (const Row& r : rows)
            if (r.algorithm == algo &&
                std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end())
                seeds.push_back(r.seed);
        std::vector<double> selected;
        for (std::uint64_t seed : seeds) {
            const Row* best = nullptr;
            for (const Row& r : rows)
                if (r.algorithm == algo && r.seed == seed)
                    if (best == nullptr || r.val_acc > best->val_acc) best = &r;
            if (best != nullptr) selected.push_back(best->test_acc);
        }
        const trainer::SeedStats stats = trainer::mean_std(selected);
        out.push_back({{"algorithm", algo},
                       {"mean_test_acc", stats.mean},
                       {"std_test_acc", stats.stddev},
                       {"n_seeds", stats.n}});
    }

    if (as_json) {
        std::cout << out.dump(2) << '\n';
    } else {
        std::printf("%-12s %-18s %s\n", "algorithm", "test_acc", "n_seeds");
        for (const auto& row : out)
            std::printf("%-12s %.4f +/- %.4f   %zu\n",
                        row.at("algorithm").get<std::string>().c_str(),
                        row.at("mean_test_acc").get<double>(),
                        row.at("std_test_acc").get<double>(),
                        row.at("n_seeds").get<std::size_t>());
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"recalign: reconstruction-alignment trade-off laboratory"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags usable after the subcommand name

    std::uint64_t seed = 0;
    std::string out_dir;
    bool as_json = false;
    std::string divergence = "kl";
    int resolution = 4;
    bool deterministic = false;
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    std::size_t cap = 1'000'000;
    app.add_option("--seed", seed, "base seed for all derived randomness");
    app.add_option("--out", out_dir, "output directory (stdout when omitted)");
    app.add_flag("--json", as_json, "machine-readable output");

    auto* examples = app.add_subcommand("examples", "built-in alignment counterexamples");
    std::string golden_path;
    examples->add_option("--golden", golden_path, "override golden constants (testing hook)");

    auto* bounds = app.add_subcommand("bounds", "two-sided lower-bound slack report");
    std::string instance_path;
    long long map_index = -1;
    bounds->add_option("--instance", instance_path, "instance JSON")->required();
    bounds->add_option("--map-index", map_index, "check one map (default: all)");
    bounds->add_option("--divergence", divergence, "kl or js");
    bounds->add_option("--resolution", resolution, "simplex grid resolution");
    bounds->add_flag("--deterministic", deterministic, "search deterministic maps only");
    bounds->add_option("--workers", workers, "parallel workers");
    bounds->add_option("--cap", cap, "map family size cap");

    auto* front = app.add_subcommand("frontier", "reconstruction-alignment trade-off curve");
    std::string gamma_grid = "0:1:11";
    std::string theta_mode = "identity";
    front->add_option("--instance", instance_path, "instance JSON")->required();
    front->add_option("--gamma-grid", gamma_grid, "a:b:n inclusive grid");
    front->add_option("--theta", theta_mode, "identity or center decoder");
    front->add_option("--divergence", divergence, "kl or js");
    front->add_option("--resolution", resolution, "simplex grid resolution");
    front->add_flag("--deterministic", deterministic, "search deterministic maps only");
    front->add_option("--workers", workers, "parallel workers");
    front->add_option("--cap", cap, "map family size cap");

    auto* train = app.add_subcommand("train", "single training run");
    std::string config_path;
    train->add_option("--config", config_path, "train config JSON")->required();

    auto* sweep = app.add_subcommand("sweep", "hyperparameter sweep + model selection");
    sweep->add_option("--config", config_path, "sweep spec JSON")->required();
    sweep->add_option("--workers", workers, "parallel workers");

    auto* report = app.add_subcommand("report", "summarize a results CSV");
    std::string results_path;
    report->add_option("--results", results_path, "results.csv from train/sweep")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (examples->parsed()) return cmd_examples(as_json, golden_path);
        if (bounds->parsed())
            return cmd_bounds(instance_path, map_index, deterministic, resolution, divergence,
                              workers, cap, out_dir, as_json);
        if (front->parsed())
            return cmd_frontier(instance_path, gamma_grid, theta_mode, deterministic,
                                resolution, divergence, workers, cap, out_dir);
        if (train->parsed()) return cmd_train(config_path, seed, out_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, workers, out_dir);
        if (report->parsed()) return cmd_report(results_path, as_json);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CurveTooShort& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitViolation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitViolation;
    }
    return kExitUsage;
}
