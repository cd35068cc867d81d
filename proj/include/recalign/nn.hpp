#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "recalign/tensor.hpp"

// Dense MLP blocks on top of the tape: specs, seeded initialization,
// forward passes, SGD/Adam updates, JSON checkpoints, and a central
// finite-difference gradient checker.

namespace recalign::nn {

enum class Activation { identity, relu, tanh };
enum class HeadKind { logits, reconstruction };

Activation activation_from_string(const std::string& name);
const char* to_string(Activation a);
const char* to_string(HeadKind h);
HeadKind head_from_string(const std::string& name);

struct NetworkSpec {
    std::vector<std::size_t> widths;  // [in, hidden..., out]
    std::vector<Activation> acts;     // one per layer (widths.size() - 1)
    HeadKind head = HeadKind::logits;

    void validate() const;
    std::size_t layer_count() const { return acts.size(); }
    std::size_t input_width() const { return widths.front(); }
    std::size_t output_width() const { return widths.back(); }
};

struct ParamEntry {
    std::string name;
    Mat value;
    Mat grad; // same shape; written by read_gradients
};

// Parameters of one network plus the record of how they were produced, so a
// ParamSet is a pure function of (spec, seed, name prefix).
struct ParamSet {
    std::vector<ParamEntry> entries;
    std::uint64_t init_seed = 0;
    std::string init_kind;

    ParamEntry& find(const std::string& name);
    void zero_grads();
};

// Weights uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)), biases
// zero, drawn from the project RNG stream.
ParamSet init_params(const NetworkSpec& spec, std::uint64_t seed, const std::string& prefix);

// A network's parameters registered as leaves on a tape.
struct TapedNetwork {
    const NetworkSpec* spec = nullptr;
    std::vector<ad::Tensor> leaves; // W0, b0, W1, b1, ...

    ad::Tensor forward(ad::Tensor input) const;
};

TapedNetwork register_network(ad::Tape& tape, const NetworkSpec& spec, const ParamSet& params);

// Copy gradients from the tape leaves back into the ParamSet (overwrites).
void read_gradients(const TapedNetwork& net, ParamSet& params);

// Tape-free forward pass for evaluation; arithmetic matches the taped path.
Mat eval_forward(const NetworkSpec& spec, const ParamSet& params, const Mat& input);

void sgd_step(ParamSet& params, double lr);

struct AdamState {
    std::vector<Mat> m;
    std::vector<Mat> v;
    std::int64_t t = 0;
};

void adam_step(ParamSet& params, AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// recalign-params-v1 JSON checkpoint.
std::string params_to_json(const ParamSet& params);
ParamSet params_from_json(const std::string& text);

// Finite-difference gradient check.
//
// The loss closure evaluates the objective at the current parameter values;
// when `with_grads` is set it must also leave analytic gradients in the
// ParamSets. `kink_out`, when non-null, receives the smallest |relu input|
// of the evaluation so kink-adjacent coordinates can be excluded instead of
// failed.
using LossFn = std::function<double(bool with_grads, double* kink_out)>;

struct FdCoord {
    std::string param;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
    bool excluded = false;
};

struct FdReport {
    std::vector<FdCoord> coords;
    double max_rel_err = 0.0; // over non-excluded coordinates
    std::size_t excluded_count = 0;
    bool pass = false;
};

FdReport finite_difference_check(std::vector<ParamSet*> sets, const LossFn& loss, double h,
                                 double tol);

} // namespace recalign::nn
