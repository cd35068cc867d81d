#include "recalign/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "recalign/rng.hpp"

namespace recalign::trainer {

using json = nlohmann::json;

namespace {

// Stream tags for the independent substreams of one run.
constexpr std::uint64_t kStreamSplit = 0x53504c49; // env split permutations
constexpr std::uint64_t kStreamBatch = 0x42415443; // batch sampling
constexpr std::uint64_t kStreamInitEnc = 0x496e6974'01;
constexpr std::uint64_t kStreamInitCls = 0x496e6974'02;
constexpr std::uint64_t kStreamInitDec = 0x496e6974'03;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json spec_to_json_obj(const nn::NetworkSpec& spec) {
    json j;
    j["widths"] = spec.widths;
    json acts = json::array();
    for (nn::Activation a : spec.acts) acts.push_back(nn::to_string(a));
    j["acts"] = std::move(acts);
    j["head"] = nn::to_string(spec.head);
    return j;
}

nn::NetworkSpec spec_from_json_obj(const json& j) {
    nn::NetworkSpec spec;
    spec.widths = j.at("widths").get<std::vector<std::size_t>>();
    for (const auto& a : j.at("acts"))
        spec.acts.push_back(nn::activation_from_string(a.get<std::string>()));
    spec.head = nn::head_from_string(j.value("head", "logits"));
    spec.validate();
    return spec;
}

json config_to_json_obj(const TrainConfig& c) {
    json j;
    j["algorithm"] = c.algorithm;
    j["objective"] = {{"alpha", c.objective.alpha},
                      {"beta", c.objective.beta},
                      {"discrepancy", losses::to_string(c.objective.discrepancy)},
                      {"reconstruction", c.objective.reconstruction}};
    if (!c.objective.mmd_bandwidths.empty())
        j["objective"]["mmd_bandwidths"] = c.objective.mmd_bandwidths;
    j["encoder"] = spec_to_json_obj(c.encoder);
    j["classifier"] = spec_to_json_obj(c.classifier);
    j["decoder"] = spec_to_json_obj(c.decoder);
    j["lr"] = c.lr;
    j["batch_size"] = c.batch_size;
    j["steps"] = c.steps;
    j["optimizer"] = to_string(c.optimizer);
    j["seed"] = c.seed;
    j["val_fraction"] = c.val_fraction;
    j["lr_decay_every"] = c.lr_decay_every;
    j["lr_decay_factor"] = c.lr_decay_factor;
    j["log_every"] = c.log_every;
    j["diverged_threshold"] = c.diverged_threshold;
    return j;
}

TrainConfig config_from_json_obj(const json& j) {
    TrainConfig c;
    c.algorithm = j.value("algorithm", "erm");
    if (j.contains("objective")) {
        const json& o = j.at("objective");
        c.objective.alpha = o.value("alpha", 0.0);
        c.objective.beta = o.value("beta", 0.0);
        c.objective.discrepancy = losses::discrepancy_from_string(o.value("discrepancy", "none"));
        c.objective.reconstruction = o.value("reconstruction", false);
        if (o.contains("mmd_bandwidths"))
            c.objective.mmd_bandwidths = o.at("mmd_bandwidths").get<std::vector<double>>();
    }
    c.encoder = spec_from_json_obj(j.at("encoder"));
    c.classifier = spec_from_json_obj(j.at("classifier"));
    c.decoder = spec_from_json_obj(j.at("decoder"));
    c.lr = j.value("lr", 0.1);
    c.batch_size = j.value("batch_size", std::size_t{64});
    c.steps = j.value("steps", 200);
    c.optimizer = optimizer_from_string(j.value("optimizer", "sgd"));
    c.seed = j.value("seed", 0ULL);
    c.val_fraction = j.value("val_fraction", 0.2);
    c.lr_decay_every = j.value("lr_decay_every", 600);
    c.lr_decay_factor = j.value("lr_decay_factor", 0.1);
    c.log_every = j.value("log_every", 50);
    c.diverged_threshold = j.value("diverged_threshold", 1e6);
    c.validate();
    return c;
}

struct EnvSplit {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
};

EnvSplit split_environment(const datagen::Dataset& env, double val_fraction,
                           std::uint64_t seed) {
    const std::size_t n = env.inputs.rows;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = derive_stream(seed, derive_seed(kStreamSplit, static_cast<std::uint64_t>(env.env_id)));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.next_index(i);
        std::swap(perm[i - 1], perm[j]);
    }
    std::size_t n_val = static_cast<std::size_t>(std::round(val_fraction * static_cast<double>(n)));
    if (n_val >= n) n_val = n - 1; // keep at least one training sample
    EnvSplit split;
    split.val_idx.assign(perm.begin(), perm.begin() + n_val);
    split.train_idx.assign(perm.begin() + n_val, perm.end());
    return split;
}

Mat gather_rows(const Mat& src, const std::vector<std::size_t>& rows) {
    Mat out(rows.size(), src.cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < src.cols; ++k) out(i, k) = src(rows[i], k);
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& src, const std::vector<std::size_t>& rows) {
    std::vector<int> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = src[rows[i]];
    return out;
}

// Fraction of rows whose argmax logit matches the label (ties -> lowest).
double accuracy(const TrainConfig& config, const nn::ParamSet& enc, const nn::ParamSet& cls,
                const Mat& inputs, const std::vector<int>& labels) {
    if (inputs.rows == 0) return 0.0;
    const Mat features = nn::eval_forward(config.encoder, enc, inputs);
    const Mat logits = nn::eval_forward(config.classifier, cls, features);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols; ++j)
            if (logits(i, j) > logits(i, best)) best = j;
        if (static_cast<int>(best) == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows);
}

} // namespace

OptimizerKind optimizer_from_string(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ParseError("unknown optimizer '" + name + "'");
}

const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

void TrainConfig::validate() const {
    objective.validate();
    encoder.validate();
    classifier.validate();
    decoder.validate();
    if (!(lr > 0.0)) throw Error("TrainConfig: lr must be positive");
    if (steps < 0) throw Error("TrainConfig: steps must be >= 0");
    if (batch_size < 1) throw Error("TrainConfig: batch_size must be >= 1");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw Error("TrainConfig: val_fraction outside [0, 1)");
    if (lr_decay_every < 1) throw Error("TrainConfig: lr_decay_every must be >= 1");
    if (encoder.output_width() != classifier.input_width())
        throw ShapeMismatch("TrainConfig: encoder output != classifier input");
    if (encoder.output_width() != decoder.input_width())
        throw ShapeMismatch("TrainConfig: encoder output != decoder input");
    if (decoder.output_width() != encoder.input_width())
        throw ShapeMismatch("TrainConfig: decoder output != encoder input");
}

TrainConfig default_config(std::size_t input_dim, std::size_t classes) {
    TrainConfig c;
    c.encoder.widths = {input_dim, 16, 8};
    c.encoder.acts = {nn::Activation::tanh, nn::Activation::identity};
    c.encoder.head = nn::HeadKind::logits;
    c.classifier.widths = {8, classes};
    c.classifier.acts = {nn::Activation::identity};
    c.classifier.head = nn::HeadKind::logits;
    c.decoder.widths = {8, 16, input_dim};
    c.decoder.acts = {nn::Activation::tanh, nn::Activation::identity};
    c.decoder.head = nn::HeadKind::reconstruction;
    return c;
}

losses::ObjectiveConfig objective_for_variant(const std::string& variant, double alpha,
                                              double beta) {
    std::string base = variant;
    bool rec = false;
    const std::string suffix = "_rec";
    if (base.size() > suffix.size() &&
        base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
        rec = true;
        base = base.substr(0, base.size() - suffix.size());
    }
    losses::ObjectiveConfig obj;
    obj.alpha = alpha;
    obj.beta = beta;
    obj.reconstruction = rec;
    if (base == "erm") obj.discrepancy = losses::DiscrepancyKind::none;
    else obj.discrepancy = losses::discrepancy_from_string(base);
    return obj;
}

std::string RunResult::canonical_json() const {
    json j;
    j["config"] = config_to_json_obj(config);
    j["final_loss"] = {{"risk", final_loss.risk},
                       {"discrepancy", final_loss.discrepancy},
                       {"reconstruction", final_loss.reconstruction},
                       {"total", final_loss.total}};
    j["train_acc"] = train_acc;
    j["val_acc"] = val_acc;
    j["test_acc"] = test_acc;
    j["seed"] = seed;
    if (diverged) j["diverged"] = divergence_note;
    json steps = json::array();
    for (const StepLog& s : log)
        steps.push_back({{"step", s.step},
                         {"total", s.total},
                         {"risk", s.risk},
                         {"discrepancy", s.discrepancy},
                         {"reconstruction", s.reconstruction},
                         {"lr", s.lr}});
    j["log"] = std::move(steps);
    return j.dump();
}

RunResult train(const TrainConfig& config, const std::vector<datagen::Dataset>& seen,
                const datagen::Dataset& test) {
    config.validate();
    if (seen.size() < 2) throw EmptyInput("train: need at least two seen environments");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<EnvSplit> splits;
    splits.reserve(seen.size());
    for (const datagen::Dataset& env : seen)
        splits.push_back(split_environment(env, config.val_fraction, config.seed));

    nn::ParamSet enc = nn::init_params(config.encoder, derive_seed(config.seed, kStreamInitEnc), "enc");
    nn::ParamSet cls = nn::init_params(config.classifier, derive_seed(config.seed, kStreamInitCls), "cls");
    nn::ParamSet dec = nn::init_params(config.decoder, derive_seed(config.seed, kStreamInitDec), "dec");
    nn::AdamState enc_state, cls_state, dec_state;

    std::vector<Rng> batch_rngs;
    for (std::size_t e = 0; e < seen.size(); ++e)
        batch_rngs.push_back(derive_stream(config.seed, derive_seed(kStreamBatch, e)));

    RunResult result;
    result.config = config;
    result.seed = config.seed;

    const bool needs_decoder = config.objective.reconstruction;
    for (int step = 0; step < config.steps; ++step) {
        const double lr =
            config.lr * std::pow(config.lr_decay_factor, step / config.lr_decay_every);

        std::vector<losses::EnvBatch> batches;
        batches.reserve(seen.size());
        for (std::size_t e = 0; e < seen.size(); ++e) {
            const auto& idx = splits[e].train_idx;
            std::vector<std::size_t> rows(config.batch_size);
            for (std::size_t i = 0; i < config.batch_size; ++i)
                rows[i] = idx[batch_rngs[e].next_index(idx.size())];
            losses::EnvBatch b;
            b.env_id = static_cast<int>(e) + 1;
            b.inputs = gather_rows(seen[e].inputs, rows);
            b.labels = gather_labels(seen[e].labels, rows);
            batches.push_back(std::move(b));
        }

        ad::Tape tape;
        nn::TapedNetwork enc_net = nn::register_network(tape, config.encoder, enc);
        nn::TapedNetwork cls_net = nn::register_network(tape, config.classifier, cls);
        nn::TapedNetwork dec_net = nn::register_network(tape, config.decoder, dec);

        losses::ObjectiveBreakdown breakdown;
        ad::Tensor loss = losses::composite_objective(tape, config.objective, batches, enc_net,
                                                      cls_net, needs_decoder ? &dec_net : nullptr,
                                                      &breakdown);
        if (!std::isfinite(breakdown.total) || breakdown.total > config.diverged_threshold)
            throw DivergedLoss("train: loss " + fmt_double(breakdown.total) + " at step " +
                               std::to_string(step));

        tape.backward(loss);
        nn::read_gradients(enc_net, enc);
        nn::read_gradients(cls_net, cls);
        if (needs_decoder) nn::read_gradients(dec_net, dec);

        if (config.optimizer == OptimizerKind::sgd) {
            nn::sgd_step(enc, lr);
            nn::sgd_step(cls, lr);
            if (needs_decoder) nn::sgd_step(dec, lr);
        } else {
            nn::adam_step(enc, enc_state, lr);
            nn::adam_step(cls, cls_state, lr);
            if (needs_decoder) nn::adam_step(dec, dec_state, lr);
        }

        result.final_loss = breakdown;
        if (step % config.log_every == 0 || step + 1 == config.steps) {
            result.log.push_back(StepLog{step, breakdown.total, breakdown.risk,
                                         breakdown.discrepancy, breakdown.reconstruction, lr});
        }
    }

    if (config.steps == 0) {
        // Record the objective of the untouched initialization.
        std::vector<losses::EnvBatch> batches;
        for (std::size_t e = 0; e < seen.size(); ++e) {
            losses::EnvBatch b;
            b.env_id = static_cast<int>(e) + 1;
            b.inputs = gather_rows(seen[e].inputs, splits[e].train_idx);
            b.labels = gather_labels(seen[e].labels, splits[e].train_idx);
            batches.push_back(std::move(b));
        }
        ad::Tape tape;
        nn::TapedNetwork enc_net = nn::register_network(tape, config.encoder, enc);
        nn::TapedNetwork cls_net = nn::register_network(tape, config.classifier, cls);
        nn::TapedNetwork dec_net = nn::register_network(tape, config.decoder, dec);
        losses::composite_objective(tape, config.objective, batches, enc_net, cls_net,
                                    needs_decoder ? &dec_net : nullptr, &result.final_loss);
    }

    // Pooled evaluations over full splits.
    std::size_t train_hits_n = 0, val_n = 0;
    double train_hits = 0.0, val_hits = 0.0;
    for (std::size_t e = 0; e < seen.size(); ++e) {
        const Mat train_x = gather_rows(seen[e].inputs, splits[e].train_idx);
        const auto train_y = gather_labels(seen[e].labels, splits[e].train_idx);
        train_hits += accuracy(config, enc, cls, train_x, train_y) *
                      static_cast<double>(train_x.rows);
        train_hits_n += train_x.rows;
        if (!splits[e].val_idx.empty()) {
            const Mat val_x = gather_rows(seen[e].inputs, splits[e].val_idx);
            const auto val_y = gather_labels(seen[e].labels, splits[e].val_idx);
            val_hits += accuracy(config, enc, cls, val_x, val_y) *
                        static_cast<double>(val_x.rows);
            val_n += val_x.rows;
        }
    }
    result.train_acc = train_hits_n ? train_hits / static_cast<double>(train_hits_n) : 0.0;
    result.val_acc = val_n ? val_hits / static_cast<double>(val_n) : 0.0;
    result.test_acc = accuracy(config, enc, cls, test.inputs, test.labels);

    const auto t1 = std::chrono::steady_clock::now();
    result.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return result;
}

std::size_t training_domain_validation_select(const std::vector<RunResult>& results) {
    if (results.empty()) throw EmptyInput("training_domain_validation_select: no results");
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i)
        if (results[i].val_acc > results[best].val_acc) best = i; // strict: ties keep lowest
    return best;
}

std::vector<TrainConfig> random_search(const TrainConfig& base, const SearchSpace& space,
                                       int trials, std::uint64_t seed) {
    if (trials < 1) throw EmptyInput("random_search: trials must be >= 1");
    Rng rng(seed);
    std::vector<TrainConfig> configs;
    configs.reserve(trials);
    for (int t = 0; t < trials; ++t) {
        TrainConfig c = base;
        c.objective.alpha = rng.next_log_range(space.alpha_lo, space.alpha_hi);
        c.objective.beta = rng.next_log_range(space.beta_lo, space.beta_hi);
        c.lr = rng.next_log_range(space.lr_lo, space.lr_hi);
        c.batch_size = static_cast<std::size_t>(
            std::llround(rng.next_log_range(space.batch_lo, space.batch_hi)));
        configs.push_back(std::move(c));
    }
    return configs;
}

std::vector<TrainConfig> grid_search(const TrainConfig& base, const std::vector<double>& alphas,
                                     const std::vector<double>& betas) {
    if (alphas.empty() || betas.empty()) throw EmptyInput("grid_search: empty grid");
    std::vector<TrainConfig> configs;
    configs.reserve(alphas.size() * betas.size());
    for (double a : alphas)
        for (double b : betas) {
            TrainConfig c = base;
            c.objective.alpha = a;
            c.objective.beta = b;
            configs.push_back(std::move(c));
        }
    return configs;
}

SeedStats mean_std(const std::vector<double>& values) {
    if (values.empty()) throw EmptyInput("mean_std: no values");
    SeedStats s;
    s.n = values.size();
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

SeedStats repeat_over_seeds(const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
                            const std::function<datagen::Suite(std::uint64_t)>& make_suite) {
    if (seeds.empty()) throw EmptyInput("repeat_over_seeds: no seeds");
    std::vector<double> accs;
    accs.reserve(seeds.size());
    for (std::uint64_t s : seeds) {
        datagen::Suite suite = make_suite(s);
        TrainConfig c = config;
        c.seed = s;
        accs.push_back(train(c, suite.seen, suite.test).test_acc);
    }
    return mean_std(accs);
}

SweepOutcome run_sweep(const SweepSpec& spec, int workers) {
    if (spec.variants.empty()) throw EmptyInput("run_sweep: no variants");
    if (spec.seeds.empty()) throw EmptyInput("run_sweep: no seeds");
    const bool grid_mode = !spec.alpha_grid.empty() && !spec.beta_grid.empty();
    if (!grid_mode && spec.random_trials < 1)
        throw EmptyInput("run_sweep: need a grid or random trials");

    struct Job {
        std::size_t seed_index;
        std::size_t variant_index;
        TrainConfig config;
    };

    // Data per seed is shared read-only across that seed's runs.
    std::vector<datagen::Suite> suites;
    suites.reserve(spec.seeds.size());
    for (std::uint64_t s : spec.seeds) suites.push_back(datagen::cmnist_like_suite(s, spec.suite));

    std::vector<Job> jobs;
    for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
        for (std::size_t vi = 0; vi < spec.variants.size(); ++vi) {
            TrainConfig base = spec.base;
            base.algorithm = spec.variants[vi];
            std::vector<TrainConfig> configs =
                grid_mode ? grid_search(base, spec.alpha_grid, spec.beta_grid)
                          : random_search(base, spec.space, spec.random_trials,
                                          derive_seed(spec.seeds[si], vi));
            for (std::size_t ci = 0; ci < configs.size(); ++ci) {
                TrainConfig c = std::move(configs[ci]);
                c.objective = objective_for_variant(spec.variants[vi], c.objective.alpha,
                                                    c.objective.beta);
                c.seed = derive_seed(spec.seeds[si], jobs.size());
                jobs.push_back(Job{si, vi, std::move(c)});
            }
        }
    }

    std::vector<RunResult> runs(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                const datagen::Suite& suite = suites[jobs[i].seed_index];
                runs[i] = train(jobs[i].config, suite.seen, suite.test);
            } catch (const DivergedLoss& e) {
                // Diverged configs stay in the results with zeroed metrics;
                // training-domain validation never selects them while any
                // run of the bucket survived.
                RunResult r;
                r.config = jobs[i].config;
                r.seed = jobs[i].config.seed;
                r.diverged = true;
                r.divergence_note = "run " + std::to_string(i) + ": " + e.what();
                runs[i] = std::move(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const int nw = std::max(1, workers);
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nw);
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    SweepOutcome outcome;
    outcome.runs = std::move(runs);
    outcome.job_keys.reserve(jobs.size());
    for (const Job& job : jobs) outcome.job_keys.emplace_back(job.seed_index, job.variant_index);

    // Training-domain validation per (seed, variant), then seed aggregation.
    std::vector<std::vector<double>> per_variant_accs(spec.variants.size());
    for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
        for (std::size_t vi = 0; vi < spec.variants.size(); ++vi) {
            std::vector<RunResult> bucket;
            std::vector<std::size_t> bucket_index;
            for (std::size_t i = 0; i < jobs.size(); ++i)
                if (jobs[i].seed_index == si && jobs[i].variant_index == vi) {
                    bucket.push_back(outcome.runs[i]);
                    bucket_index.push_back(i);
                }
            if (bucket.empty()) continue;
            const std::size_t pick = training_domain_validation_select(bucket);
            SelectedRun sel;
            sel.seed = spec.seeds[si];
            sel.variant = spec.variants[vi];
            sel.run_index = bucket_index[pick];
            sel.val_acc = bucket[pick].val_acc;
            sel.test_acc = bucket[pick].test_acc;
            per_variant_accs[vi].push_back(sel.test_acc);
            outcome.selected.push_back(std::move(sel));
        }
    }
    for (std::size_t vi = 0; vi < spec.variants.size(); ++vi) {
        const SeedStats stats = mean_std(per_variant_accs[vi]);
        outcome.summary.push_back(
            SummaryRow{spec.variants[vi], stats.mean, stats.stddev, stats.n});
    }
    return outcome;
}

void write_results_csv(std::ostream& out, const std::vector<RunResult>& runs) {
    out << "algorithm,alpha,beta,lr,batch,steps,seed,val_acc,test_acc,wall_ms\n";
    for (const RunResult& r : runs) {
        out << r.config.algorithm << ',' << fmt_double(r.config.objective.alpha) << ','
            << fmt_double(r.config.objective.beta) << ',' << fmt_double(r.config.lr) << ','
            << r.config.batch_size << ',' << r.config.steps << ',' << r.seed << ','
            << fmt_double(r.val_acc) << ',' << fmt_double(r.test_acc) << ','
            << fmt_double(r.wall_ms) << '\n';
    }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& summary) {
    out << "algorithm,mean_test_acc,std_test_acc,n_seeds\n";
    for (const SummaryRow& row : summary)
        out << row.variant << ',' << fmt_double(row.mean_test_acc) << ','
            << fmt_double(row.std_test_acc) << ',' << row.n_seeds << '\n';
}

void write_run_log(std::ostream& out, const RunResult& run) {
    for (const StepLog& s : run.log) {
        json j = {{"step", s.step},
                  {"total", s.total},
                  {"risk", s.risk},
                  {"discrepancy", s.discrepancy},
                  {"reconstruction", s.reconstruction},
                  {"lr", s.lr}};
        out << j.dump() << '\n';
    }
}

std::string config_to_json(const TrainConfig& config) {
    return config_to_json_obj(config).dump(2);
}

TrainConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config_from_json: ") + e.what());
    }
    return config_from_json_obj(j);
}

std::string sweep_spec_to_json(const SweepSpec& spec) {
    json j;
    j["suite"] = {{"n", spec.suite.n},
                  {"d", spec.suite.d},
                  {"sigma", spec.suite.sigma},
                  {"p_inv", spec.suite.p_inv},
                  {"p_sp_train", spec.suite.p_sp_train},
                  {"p_sp_test", spec.suite.p_sp_test},
                  {"label_prior", spec.suite.label_prior}};
    j["variants"] = spec.variants;
    if (!spec.alpha_grid.empty()) j["alpha_grid"] = spec.alpha_grid;
    if (!spec.beta_grid.empty()) j["beta_grid"] = spec.beta_grid;
    if (spec.random_trials > 0) j["random_trials"] = spec.random_trials;
    json seeds = json::array();
    for (std::uint64_t s : spec.seeds) seeds.push_back(s);
    j["seeds"] = std::move(seeds);
    j["train"] = config_to_json_obj(spec.base);
    return j.dump(2);
}

SweepSpec sweep_spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("sweep_spec_from_json: ") + e.what());
    }
    SweepSpec spec;
    if (j.contains("suite")) {
        const json& s = j.at("suite");
        spec.suite.n = s.value("n", std::size_t{2000});
        spec.suite.d = s.value("d", std::size_t{6});
        spec.suite.sigma = s.value("sigma", 0.1);
        spec.suite.p_inv = s.value("p_inv", 0.25);
        if (s.contains("p_sp_train"))
            spec.suite.p_sp_train = s.at("p_sp_train").get<std::vector<double>>();
        spec.suite.p_sp_test = s.value("p_sp_test", 0.9);
        spec.suite.label_prior = s.value("label_prior", 0.5);
    }
    if (j.contains("variants")) spec.variants = j.at("variants").get<std::vector<std::string>>();
    if (j.contains("alpha_grid")) spec.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
    if (j.contains("beta_grid")) spec.beta_grid = j.at("beta_grid").get<std::vector<double>>();
    spec.random_trials = j.value("random_trials", 0);
    if (j.contains("seeds")) spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    spec.base = default_config(spec.suite.d);
    if (j.contains("train")) {
        // Missing network specs fall back to the suite-sized defaults.
        json t = j.at("train");
        if (!t.contains("encoder")) t["encoder"] = spec_to_json_obj(spec.base.encoder);
        if (!t.contains("classifier")) t["classifier"] = spec_to_json_obj(spec.base.classifier);
        if (!t.contains("decoder")) t["decoder"] = spec_to_json_obj(spec.base.decoder);
        spec.base = config_from_json_obj(t);
    }
    return spec;
}

} // namespace recalign::trainer
