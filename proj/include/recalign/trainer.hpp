#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "recalign/datagen.hpp"
#include "recalign/losses.hpp"
#include "recalign/nn.hpp"

// Training loop over multi-environment data, hyperparameter search, and
// training-domain-validation model selection. A run is a pure function of
// (config, data): identical seeds reproduce identical results, and model
// selection never reads test metrics.

namespace recalign::trainer {

enum class OptimizerKind { sgd, adam };

OptimizerKind optimizer_from_string(const std::string& name);
const char* to_string(OptimizerKind k);

struct TrainConfig {
    losses::ObjectiveConfig objective;
    nn::NetworkSpec encoder;
    nn::NetworkSpec classifier;
    nn::NetworkSpec decoder;
    double lr = 0.1;
    std::size_t batch_size = 64;
    int steps = 200; // 0 evaluates the untouched initialization
    OptimizerKind optimizer = OptimizerKind::sgd;
    std::uint64_t seed = 0;
    double val_fraction = 0.2; // held out of each seen environment
    int lr_decay_every = 600;
    double lr_decay_factor = 0.1;
    int log_every = 50;
    double diverged_threshold = 1e6;
    std::string algorithm = "erm"; // tag for CSV reports

    void validate() const;
};

// Defaults sized for the synthetic suites: tanh encoder to an 8-wide
// representation, linear classifier head, tanh decoder back to the input.
TrainConfig default_config(std::size_t input_dim, std::size_t classes = 2);

// Maps a variant tag (erm, irm, mmd, coral, irm_mmd, each with an optional
// _rec suffix) onto the discrepancy kind and the reconstruction switch.
losses::ObjectiveConfig objective_for_variant(const std::string& variant, double alpha,
                                              double beta);

struct StepLog {
    int step = 0;
    double total = 0.0;
    double risk = 0.0;
    double discrepancy = 0.0;
    double reconstruction = 0.0;
    double lr = 0.0;
};

struct RunResult {
    TrainConfig config;
    losses::ObjectiveBreakdown final_loss;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
    std::vector<StepLog> log;
    bool diverged = false;       // set by the sweep runner when train() aborted
    std::string divergence_note; // the DivergedLoss diagnostic

    // Deterministic fields only (wall_ms excluded): equal strings iff the
    // run reproduced bit-for-bit.
    std::string canonical_json() const;
};

RunResult train(const TrainConfig& config, const std::vector<datagen::Dataset>& seen,
                const datagen::Dataset& test);

// Index of the run with the highest seen-domain validation accuracy; ties
// resolve to the lowest index. Never reads test metrics.
std::size_t training_domain_validation_select(const std::vector<RunResult>& results);

struct SearchSpace {
    double alpha_lo = 1e-1, alpha_hi = 1e4;
    double beta_lo = 1e-1, beta_hi = 1e4;
    double lr_lo = 3.1622776601683791e-05, lr_hi = 3.1622776601683796e-04; // 10^-4.5..10^-3.5
    double batch_lo = 8, batch_hi = 512;
};

// Log-uniform draws over the space, deterministic per seed.
std::vector<TrainConfig> random_search(const TrainConfig& base, const SearchSpace& space,
                                       int trials, std::uint64_t seed);

// Full cartesian product, alpha-major order.
std::vector<TrainConfig> grid_search(const TrainConfig& base, const std::vector<double>& alphas,
                                     const std::vector<double>& betas);

struct SeedStats {
    double mean = 0.0;
    double stddev = 0.0; // sample std, n - 1 denominator; 0 for a single value
    std::size_t n = 0;
};

SeedStats mean_std(const std::vector<double>& values);

// Trains the same config once per seed (data regenerated per seed) and
// aggregates the test accuracy.
SeedStats repeat_over_seeds(const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
                            const std::function<datagen::Suite(std::uint64_t)>& make_suite);

// ---- sweep runner ----

struct SweepSpec {
    datagen::SuiteOptions suite;
    std::vector<std::string> variants = {"erm", "erm_rec"};
    std::vector<double> alpha_grid; // grid mode when both grids non-empty
    std::vector<double> beta_grid;
    int random_trials = 0; // random mode when > 0
    SearchSpace space;
    std::vector<std::uint64_t> seeds = {1};
    TrainConfig base;
};

struct SelectedRun {
    std::uint64_t seed = 0;
    std::string variant;
    std::size_t run_index = 0; // into SweepOutcome::runs
    double val_acc = 0.0;
    double test_acc = 0.0;
};

struct SummaryRow {
    std::string variant;
    double mean_test_acc = 0.0;
    double std_test_acc = 0.0;
    std::size_t n_seeds = 0;
};

struct SweepOutcome {
    std::vector<RunResult> runs;      // deterministic order
    // (seed index, variant index) per run, aligned with `runs`.
    std::vector<std::pair<std::size_t, std::size_t>> job_keys;
    std::vector<SelectedRun> selected; // one per (seed, variant)
    std::vector<SummaryRow> summary;   // one per variant
};

// Runs every (seed, variant, config) combination, in parallel over
// `workers` isolated runs, then applies training-domain validation per
// (seed, variant) and aggregates over seeds. Output order is independent of
// the worker count.
SweepOutcome run_sweep(const SweepSpec& spec, int workers);

// algorithm,alpha,beta,lr,batch,steps,seed,val_acc,test_acc,wall_ms
void write_results_csv(std::ostream& out, const std::vector<RunResult>& runs);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& summary);

// JSON-lines step log.
void write_run_log(std::ostream& out, const RunResult& run);

std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& text);

std::string sweep_spec_to_json(const SweepSpec& spec);
SweepSpec sweep_spec_from_json(const std::string& text);

} // namespace recalign::trainer
