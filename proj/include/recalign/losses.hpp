#pragma once

#include <string>
#include <vector>

#include "recalign/nn.hpp"

// The loss zoo for the composite training objective
//
//     risk + alpha * discrepancy + beta * reconstruction
//
// over several seen environments: summed softmax cross-entropy risk,
// feature-alignment penalties (RBF-kernel MMD, CORAL, an invariant-gradient
// penalty, and their combination), and a squared-Euclidean reconstruction
// term through an encoder/decoder pair. Every term is built from tape
// primitives so one backward pass yields exact gradients.

namespace recalign::losses {

enum class DiscrepancyKind { none, mmd, coral, irm, irm_mmd };

DiscrepancyKind discrepancy_from_string(const std::string& name);
const char* to_string(DiscrepancyKind k);

struct ObjectiveConfig {
    double alpha = 0.0;
    double beta = 0.0;
    DiscrepancyKind discrepancy = DiscrepancyKind::none;
    bool reconstruction = false;
    // Explicit RBF bandwidths (sigma values). Empty selects the median
    // heuristic per environment pair, recomputed each call and treated as a
    // constant by the gradient.
    std::vector<double> mmd_bandwidths;

    void validate() const;
};

struct EnvBatch {
    int env_id = 0;
    Mat inputs;              // n x d
    std::vector<int> labels; // n

    void validate() const;
};

// Sum over environments of the within-environment mean cross-entropy (nats).
ad::Tensor empirical_risk(ad::Tape& tape, const std::vector<EnvBatch>& batches,
                          const nn::TapedNetwork& encoder, const nn::TapedNetwork& classifier);

// sigma = multiplier * median pairwise distance of the pooled rows, for
// multipliers {0.5, 1, 2}; falls back to sigma = 1 when the median is zero.
std::vector<double> median_heuristic_bandwidths(const Mat& pooled);

// Biased (V-statistic) RBF-kernel MMD between two feature batches, summed
// over the bandwidth set. Nonnegative up to roundoff.
ad::Tensor mmd_rbf(ad::Tape& tape, ad::Tensor a, ad::Tensor b,
                   const std::vector<double>& bandwidths);

// || mean_a - mean_b ||^2 + || cov_a - cov_b ||_F^2 / (4 d^2), unbiased
// covariance (n - 1). Each batch needs at least two rows.
ad::Tensor coral(ad::Tape& tape, ad::Tensor a, ad::Tensor b);

// Sum over environments of the squared gradient, at 1, of a scalar dummy
// classifier multiplier applied to the logits:
//     sum_i ( d/dw risk_i(w * logits_i) |_{w=1} )^2
ad::Tensor irm_penalty(ad::Tape& tape, const std::vector<ad::Tensor>& per_env_logits,
                       const std::vector<std::vector<int>>& per_env_labels);

// Sum over environments of the mean squared reconstruction error
// || x - decoder(encoder(x)) ||^2.
ad::Tensor reconstruction_term(ad::Tape& tape, const std::vector<EnvBatch>& batches,
                               const nn::TapedNetwork& encoder, const nn::TapedNetwork& decoder);

struct ObjectiveBreakdown {
    double risk = 0.0;
    double discrepancy = 0.0;
    double reconstruction = 0.0;
    double total = 0.0;
};

// risk + alpha * discrepancy + beta * reconstruction. Pairwise penalties
// average over all unordered pairs of environments. The decoder may be null
// when reconstruction is off.
ad::Tensor composite_objective(ad::Tape& tape, const ObjectiveConfig& cfg,
                               const std::vector<EnvBatch>& batches,
                               const nn::TapedNetwork& encoder,
                               const nn::TapedNetwork& classifier,
                               const nn::TapedNetwork* decoder,
                               ObjectiveBreakdown* breakdown = nullptr);

} // namespace recalign::losses
