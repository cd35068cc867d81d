#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "recalign/mat.hpp"

// Synthetic multi-environment spurious-correlation data. Each sample draws
// a binary label y, an invariant bit u = y flipped with rate p_inv, and a
// per-environment spurious bit c = y flipped with rate p_sp; the input is a
// fixed +-1 block embedding of (u, c) into R^d plus isotropic gaussian
// noise. On training environments the spurious bit agrees with the label
// more often than the invariant bit does; on the test environment that
// correlation inverts, which is what defeats plain risk minimization.

namespace recalign::datagen {

struct EnvironmentSpec {
    int env_id = 1;
    std::size_t n = 1000;
    double p_inv = 0.25;     // invariant-bit flip rate
    double p_sp = 0.1;       // spurious-bit flip rate
    std::size_t d = 6;       // embed dimension, >= 2
    double sigma = 0.0;      // gaussian noise scale
    double label_prior = 0.5; // P(y = 1)

    void validate() const;
};

struct SeedRecord {
    std::uint64_t base_seed = 0;
    std::uint64_t derived_seed = 0;
    std::string algorithm; // documented generator identifier
};

struct Dataset {
    Mat inputs; // n x d
    std::vector<int> labels;
    int env_id = 0;
    SeedRecord seed;
};

// Deterministic per (spec, seed): the stream derives from (seed, env_id) so
// distinct environments can generate in parallel.
Dataset generate_environment(const EnvironmentSpec& spec, std::uint64_t seed);

struct Suite {
    std::vector<EnvironmentSpec> seen_specs;
    EnvironmentSpec test_spec;
    std::vector<Dataset> seen;
    Dataset test;
};

struct SuiteOptions {
    std::size_t n = 2000;
    std::size_t d = 6;
    double sigma = 0.1;
    double p_inv = 0.25;
    std::vector<double> p_sp_train = {0.1, 0.2};
    double p_sp_test = 0.9;
    double label_prior = 0.5;
};

// Two training environments plus one test environment with the spurious
// correlation inverted. Defaults: p_inv = 0.25 everywhere, p_sp = 0.1 and
// 0.2 on the training environments, 0.9 on the test one, 2000 samples each.
Suite cmnist_like_suite(std::uint64_t seed, const SuiteOptions& opts = {});

// Same structure with all flip rates and the noise at zero, so the label is
// a deterministic function of the clean embedding.
Suite separable_suite(std::uint64_t seed, std::size_t n = 2000, std::size_t d = 6);

// Accuracy of the optimal predictor of y from the latent bit pair (u, c),
// by exact enumeration of the four-cell joint. Requires sigma == 0.
double bayes_reference_accuracy(const EnvironmentSpec& spec);

// Same, for a predictor that sees only the invariant bit.
double invariant_only_accuracy(const EnvironmentSpec& spec);

// env,y,x0..x{d-1}
void write_dataset_csv(std::ostream& out, const Dataset& data);

std::string spec_to_json(const EnvironmentSpec& spec);
EnvironmentSpec spec_from_json(const std::string& text);

} // namespace recalign::datagen
