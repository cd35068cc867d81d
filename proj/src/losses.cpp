#include "recalign/losses.hpp"

#include <algorithm>
#include <cmath>

namespace recalign::losses {

DiscrepancyKind discrepancy_from_string(const std::string& name) {
    if (name == "none") return DiscrepancyKind::none;
    if (name == "mmd") return DiscrepancyKind::mmd;
    if (name == "coral") return DiscrepancyKind::coral;
    if (name == "irm") return DiscrepancyKind::irm;
    if (name == "irm_mmd") return DiscrepancyKind::irm_mmd;
    throw ParseError("unknown discrepancy kind '" + name + "'");
}

const char* to_string(DiscrepancyKind k) {
    switch (k) {
        case DiscrepancyKind::none: return "none";
        case DiscrepancyKind::mmd: return "mmd";
        case DiscrepancyKind::coral: return "coral";
        case DiscrepancyKind::irm: return "irm";
        case DiscrepancyKind::irm_mmd: return "irm_mmd";
    }
    return "none";
}

void ObjectiveConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error("ObjectiveConfig: bad alpha");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error("ObjectiveConfig: bad beta");
    for (double s : mmd_bandwidths)
        if (!(s > 0.0)) throw Error("ObjectiveConfig: bandwidths must be positive");
}

void EnvBatch::validate() const {
    if (inputs.rows == 0) throw EmptyBatch("EnvBatch: no rows");
    if (labels.size() != inputs.rows) throw ShapeMismatch("EnvBatch: label count != rows");
    if (env_id < 1) throw Error("EnvBatch: env ids start at 1");
}

ad::Tensor empirical_risk(ad::Tape& tape, const std::vector<EnvBatch>& batches,
                          const nn::TapedNetwork& encoder, const nn::TapedNetwork& classifier) {
    if (batches.empty()) throw EmptyBatch("empirical_risk: no environments");
    ad::Tensor total{};
    bool first = true;
    for (const EnvBatch& batch : batches) {
        batch.validate();
        ad::Tensor x = tape.constant(batch.inputs);
        ad::Tensor logits = classifier.forward(encoder.forward(x));
        ad::Tensor ce = tape.softmax_cross_entropy(logits, batch.labels);
        total = first ? ce : tape.add(total, ce);
        first = false;
    }
    return total;
}

std::vector<double> median_heuristic_bandwidths(const Mat& pooled) {
    std::vector<double> dists;
    dists.reserve(pooled.rows * (pooled.rows - 1) / 2);
    for (std::size_t i = 0; i < pooled.rows; ++i)
        for (std::size_t j = i + 1; j < pooled.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < pooled.cols; ++k) {
                const double d = pooled(i, k) - pooled(j, k);
                s += d * d;
            }
            dists.push_back(std::sqrt(s));
        }
    double median = 0.0;
    if (!dists.empty()) {
        const std::size_t mid = dists.size() / 2;
        std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
        median = dists[mid];
    }
    if (median <= 0.0) median = 1.0;
    return {0.5 * median, median, 2.0 * median};
}

ad::Tensor mmd_rbf(ad::Tape& tape, ad::Tensor a, ad::Tensor b,
                   const std::vector<double>& bandwidths) {
    if (a.rows() == 0 || b.rows() == 0) throw EmptyBatch("mmd_rbf: empty batch");
    if (a.cols() != b.cols()) throw ShapeMismatch("mmd_rbf: feature widths differ");
    if (bandwidths.empty()) throw Error("mmd_rbf: no bandwidths");
    ad::Tensor daa = tape.pairwise_sqdist(a, a);
    ad::Tensor dbb = tape.pairwise_sqdist(b, b);
    ad::Tensor dab = tape.pairwise_sqdist(a, b);
    ad::Tensor total{};
    bool first = true;
    for (double sigma : bandwidths) {
        const double c = -1.0 / (2.0 * sigma * sigma);
        ad::Tensor kaa = tape.mean_all(tape.exp_scale(daa, c));
        ad::Tensor kbb = tape.mean_all(tape.exp_scale(dbb, c));
        ad::Tensor kab = tape.mean_all(tape.exp_scale(dab, c));
        ad::Tensor term = tape.sub(tape.add(kaa, kbb), tape.scale(kab, 2.0));
        total = first ? term : tape.add(total, term);
        first = false;
    }
    return total;
}

ad::Tensor coral(ad::Tape& tape, ad::Tensor a, ad::Tensor b) {
    if (a.rows() < 2 || b.rows() < 2) throw BatchTooSmall("coral: needs >= 2 rows per batch");
    if (a.cols() != b.cols()) throw ShapeMismatch("coral: feature widths differ");
    const double d = static_cast<double>(a.cols());

    ad::Tensor mu_a = tape.col_mean(a);
    ad::Tensor mu_b = tape.col_mean(b);
    ad::Tensor mean_term = tape.sum_squares(tape.sub(mu_a, mu_b));

    ad::Tensor ca = tape.sub_rowvec(a, mu_a);
    ad::Tensor cb = tape.sub_rowvec(b, mu_b);
    ad::Tensor cov_a = tape.scale(tape.matmul_tn(ca, ca), 1.0 / (static_cast<double>(a.rows()) - 1.0));
    ad::Tensor cov_b = tape.scale(tape.matmul_tn(cb, cb), 1.0 / (static_cast<double>(b.rows()) - 1.0));
    ad::Tensor cov_term =
        tape.scale(tape.sum_squares(tape.sub(cov_a, cov_b)), 1.0 / (4.0 * d * d));

    return tape.add(mean_term, cov_term);
}

ad::Tensor irm_penalty(ad::Tape& tape, const std::vector<ad::Tensor>& per_env_logits,
                       const std::vector<std::vector<int>>& per_env_labels) {
    if (per_env_logits.empty()) throw EmptyBatch("irm_penalty: no environments");
    if (per_env_logits.size() != per_env_labels.size())
        throw ShapeMismatch("irm_penalty: logits/labels count differ");
    // risk_i(w) = mean_b [ logsumexp(w l_b) - w l_{b,y_b} ]; its derivative
    // at w = 1 is mean_b [ <softmax(l_b), l_b> - l_{b,y_b} ], which stays on
    // the tape so the squared penalty backpropagates into the logits.
    ad::Tensor total{};
    bool first = true;
    for (std::size_t e = 0; e < per_env_logits.size(); ++e) {
        ad::Tensor logits = per_env_logits[e];
        if (logits.rows() == 0) throw EmptyBatch("irm_penalty: empty environment");
        ad::Tensor probs = tape.softmax_rows(logits);
        ad::Tensor expected = tape.row_sum(tape.mul(probs, logits)); // n x 1
        ad::Tensor picked = tape.pick_label(logits, per_env_labels[e]);
        ad::Tensor g = tape.mean_all(tape.sub(expected, picked)); // scalar d(risk)/dw
        ad::Tensor sq = tape.mul(g, g);
        total = first ? sq : tape.add(total, sq);
        first = false;
    }
    return total;
}

ad::Tensor reconstruction_term(ad::Tape& tape, const std::vector<EnvBatch>& batches,
                               const nn::TapedNetwork& encoder, const nn::TapedNetwork& decoder) {
    if (batches.empty()) throw EmptyBatch("reconstruction_term: no environments");
    if (decoder.spec->output_width() != encoder.spec->input_width())
        throw ShapeMismatch("reconstruction_term: decoder output width != input width");
    ad::Tensor total{};
    bool first = true;
    for (const EnvBatch& batch : batches) {
        batch.validate();
        ad::Tensor x = tape.constant(batch.inputs);
        ad::Tensor xhat = decoder.forward(encoder.forward(x));
        ad::Tensor diff = tape.sub(x, xhat);
        // mean over the batch of the row squared norms
        ad::Tensor term =
            tape.scale(tape.sum_squares(diff), 1.0 / static_cast<double>(batch.inputs.rows));
        total = first ? term : tape.add(total, term);
        first = false;
    }
    return total;
}

ad::Tensor composite_objective(ad::Tape& tape, const ObjectiveConfig& cfg,
                               const std::vector<EnvBatch>& batches,
                               const nn::TapedNetwork& encoder,
                               const nn::TapedNetwork& classifier,
                               const nn::TapedNetwork* decoder, ObjectiveBreakdown* breakdown) {
    cfg.validate();
    if (batches.empty()) throw EmptyBatch("composite_objective: no environments");

    // Shared per-environment features and logits.
    std::vector<ad::Tensor> features;
    std::vector<ad::Tensor> logits;
    std::vector<std::vector<int>> labels;
    features.reserve(batches.size());
    for (const EnvBatch& batch : batches) {
        batch.validate();
        ad::Tensor x = tape.constant(batch.inputs);
        ad::Tensor f = encoder.forward(x);
        features.push_back(f);
        logits.push_back(classifier.forward(f));
        labels.push_back(batch.labels);
    }

    ad::Tensor risk{};
    for (std::size_t e = 0; e < batches.size(); ++e) {
        ad::Tensor ce = tape.softmax_cross_entropy(logits[e], labels[e]);
        risk = e == 0 ? ce : tape.add(risk, ce);
    }

    // Pairwise feature penalties averaged over unordered environment pairs.
    auto pair_average = [&](const std::function<ad::Tensor(ad::Tensor, ad::Tensor)>& fn)
        -> ad::Tensor {
        ad::Tensor sum{};
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < features.size(); ++i)
            for (std::size_t j = i + 1; j < features.size(); ++j) {
                ad::Tensor term = fn(features[i], features[j]);
                sum = pairs == 0 ? term : tape.add(sum, term);
                ++pairs;
            }
        if (pairs == 0) return tape.constant(Mat(1, 1, 0.0));
        return tape.scale(sum, 1.0 / static_cast<double>(pairs));
    };

    auto mmd_pair = [&](ad::Tensor a, ad::Tensor b) {
        std::vector<double> bw = cfg.mmd_bandwidths;
        if (bw.empty()) {
            Mat pooled(a.rows() + b.rows(), a.cols());
            for (std::size_t i = 0; i < a.rows(); ++i)
                for (std::size_t k = 0; k < a.cols(); ++k) pooled(i, k) = a.value()(i, k);
            for (std::size_t i = 0; i < b.rows(); ++i)
                for (std::size_t k = 0; k < b.cols(); ++k)
                    pooled(a.rows() + i, k) = b.value()(i, k);
            bw = median_heuristic_bandwidths(pooled);
        }
        return mmd_rbf(tape, a, b, bw);
    };

    ad::Tensor disc{};
    bool has_disc = false;
    switch (cfg.discrepancy) {
        case DiscrepancyKind::none: break;
        case DiscrepancyKind::mmd:
            disc = pair_average(mmd_pair);
            has_disc = true;
            break;
        case DiscrepancyKind::coral:
            disc = pair_average([&](ad::Tensor a, ad::Tensor b) { return coral(tape, a, b); });
            has_disc = true;
            break;
        case DiscrepancyKind::irm:
            disc = irm_penalty(tape, logits, labels);
            has_disc = true;
            break;
        case DiscrepancyKind::irm_mmd:
            disc = tape.add(irm_penalty(tape, logits, labels), pair_average(mmd_pair));
            has_disc = true;
            break;
    }

    ad::Tensor rec{};
    bool has_rec = false;
    if (cfg.reconstruction) {
        if (decoder == nullptr)
            throw ShapeMismatch("composite_objective: reconstruction on but no decoder");
        rec = reconstruction_term(tape, batches, encoder, *decoder);
        has_rec = true;
    }

    ad::Tensor total = risk;
    if (has_disc) total = tape.add(total, tape.scale(disc, cfg.alpha));
    if (has_rec) total = tape.add(total, tape.scale(rec, cfg.beta));

    if (breakdown != nullptr) {
        breakdown->risk = risk.scalar();
        breakdown->discrepancy = has_disc ? disc.scalar() : 0.0;
        breakdown->reconstruction = has_rec ? rec.scalar() : 0.0;
        breakdown->total = total.scalar();
    }
    return total;
}

} // namespace recalign::losses
