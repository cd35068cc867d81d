#include "recalign/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include <nlohmann/json.hpp>

#include "recalign/rng.hpp"

namespace recalign::datagen {

using json = nlohmann::json;

void EnvironmentSpec::validate() const {
    if (n < 1) throw Error("EnvironmentSpec: n >= 1 required");
    if (d < 2) throw Error("EnvironmentSpec: d >= 2 required");
    if (!(p_inv >= 0.0 && p_inv <= 1.0)) throw Error("EnvironmentSpec: p_inv outside [0,1]");
    if (!(p_sp >= 0.0 && p_sp <= 1.0)) throw Error("EnvironmentSpec: p_sp outside [0,1]");
    if (!(label_prior >= 0.0 && label_prior <= 1.0))
        throw Error("EnvironmentSpec: label_prior outside [0,1]");
    if (!(sigma >= 0.0)) throw Error("EnvironmentSpec: sigma must be >= 0");
}

Dataset generate_environment(const EnvironmentSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng = derive_stream(seed, static_cast<std::uint64_t>(spec.env_id));

    Dataset out;
    out.env_id = spec.env_id;
    out.seed = SeedRecord{seed, rng.state, kRngAlgorithmId};
    out.inputs = Mat(spec.n, spec.d);
    out.labels.resize(spec.n);

    const std::size_t u_block = (spec.d + 1) / 2; // first ceil(d/2) coordinates carry u
    for (std::size_t i = 0; i < spec.n; ++i) {
        const int y = rng.next_bernoulli(spec.label_prior) ? 1 : 0;
        const int u = y ^ (rng.next_bernoulli(spec.p_inv) ? 1 : 0);
        const int c = y ^ (rng.next_bernoulli(spec.p_sp) ? 1 : 0);
        out.labels[i] = y;
        const double uval = u ? 1.0 : -1.0;
        const double cval = c ? 1.0 : -1.0;
        for (std::size_t k = 0; k < spec.d; ++k) {
            double x = k < u_block ? uval : cval;
            if (spec.sigma > 0.0) x += spec.sigma * rng.next_gaussian();
            out.inputs(i, k) = x;
        }
    }
    return out;
}

Suite cmnist_like_suite(std::uint64_t seed, const SuiteOptions& opts) {
    Suite suite;
    int env_id = 1;
    for (double p_sp : opts.p_sp_train) {
        EnvironmentSpec spec;
        spec.env_id = env_id++;
        spec.n = opts.n;
        spec.d = opts.d;
        spec.sigma = opts.sigma;
        spec.p_inv = opts.p_inv;
        spec.p_sp = p_sp;
        spec.label_prior = opts.label_prior;
        suite.seen_specs.push_back(spec);
        suite.seen.push_back(generate_environment(spec, seed));
    }
    EnvironmentSpec test;
    test.env_id = env_id;
    test.n = opts.n;
    test.d = opts.d;
    test.sigma = opts.sigma;
    test.p_inv = opts.p_inv;
    test.p_sp = opts.p_sp_test;
    test.label_prior = opts.label_prior;
    suite.test_spec = test;
    suite.test = generate_environment(test, seed);
    return suite;
}

Suite separable_suite(std::uint64_t seed, std::size_t n, std::size_t d) {
    SuiteOptions opts;
    opts.n = n;
    opts.d = d;
    opts.sigma = 0.0;
    opts.p_inv = 0.0;
    opts.p_sp_train = {0.0, 0.0};
    opts.p_sp_test = 0.0;
    return cmnist_like_suite(seed, opts);
}

namespace {

// P(y, u, c) over the eight latent cells.
double cell_mass(const EnvironmentSpec& spec, int y, int u, int c) {
    const double py = y ? spec.label_prior : 1.0 - spec.label_prior;
    const double pu = u == y ? 1.0 - spec.p_inv : spec.p_inv;
    const double pc = c == y ? 1.0 - spec.p_sp : spec.p_sp;
    return py * pu * pc;
}

} // namespace

double bayes_reference_accuracy(const EnvironmentSpec& spec) {
    spec.validate();
    if (spec.sigma != 0.0)
        throw Unsupported("bayes_reference_accuracy: requires sigma == 0");
    double acc = 0.0;
    for (int u = 0; u < 2; ++u)
        for (int c = 0; c < 2; ++c)
            acc += std::max(cell_mass(spec, 0, u, c), cell_mass(spec, 1, u, c));
    return acc;
}

double invariant_only_accuracy(const EnvironmentSpec& spec) {
    spec.validate();
    if (spec.sigma != 0.0)
        throw Unsupported("invariant_only_accuracy: requires sigma == 0");
    double acc = 0.0;
    for (int u = 0; u < 2; ++u) {
        double m0 = cell_mass(spec, 0, u, 0) + cell_mass(spec, 0, u, 1);
        double m1 = cell_mass(spec, 1, u, 0) + cell_mass(spec, 1, u, 1);
        acc += std::max(m0, m1);
    }
    return acc;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    out << "env,y";
    for (std::size_t k = 0; k < data.inputs.cols; ++k) out << ",x" << k;
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < data.inputs.rows; ++i) {
        out << data.env_id << ',' << data.labels[i];
        for (std::size_t k = 0; k < data.inputs.cols; ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", data.inputs(i, k));
            out << ',' << buf;
        }
        out << '\n';
    }
}

std::string spec_to_json(const EnvironmentSpec& spec) {
    json j;
    j["env_id"] = spec.env_id;
    j["n"] = spec.n;
    j["p_inv"] = spec.p_inv;
    j["p_sp"] = spec.p_sp;
    j["d"] = spec.d;
    j["sigma"] = spec.sigma;
    j["label_prior"] = spec.label_prior;
    return j.dump();
}

EnvironmentSpec spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("spec_from_json: ") + e.what());
    }
    EnvironmentSpec spec;
    spec.env_id = j.value("env_id", 1);
    spec.n = j.value("n", std::size_t{1000});
    spec.p_inv = j.value("p_inv", 0.25);
    spec.p_sp = j.value("p_sp", 0.1);
    spec.d = j.value("d", std::size_t{6});
    spec.sigma = j.value("sigma", 0.0);
    spec.label_prior = j.value("label_prior", 0.5);
    spec.validate();
    return spec;
}

} // namespace recalign::datagen
