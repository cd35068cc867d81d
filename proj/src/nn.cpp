#include "recalign/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "recalign/rng.hpp"

namespace recalign::nn {

using json = nlohmann::json;

Activation activation_from_string(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw ParseError("unknown activation '" + name + "'");
}

const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
    }
    return "identity";
}

const char* to_string(HeadKind h) {
    return h == HeadKind::logits ? "logits" : "reconstruction";
}

HeadKind head_from_string(const std::string& name) {
    if (name == "logits") return HeadKind::logits;
    if (name == "reconstruction") return HeadKind::reconstruction;
    throw ParseError("unknown head kind '" + name + "'");
}

void NetworkSpec::validate() const {
    if (widths.size() < 2) throw ShapeMismatch("NetworkSpec: need at least one layer");
    if (acts.size() != widths.size() - 1)
        throw ShapeMismatch("NetworkSpec: one activation per layer required");
    for (std::size_t w : widths)
        if (w == 0) throw ShapeMismatch("NetworkSpec: zero layer width");
}

ParamEntry& ParamSet::find(const std::string& name) {
    for (ParamEntry& e : entries)
        if (e.name == name) return e;
    throw Error("ParamSet: no parameter named '" + name + "'");
}

void ParamSet::zero_grads() {
    for (ParamEntry& e : entries) e.grad = Mat(e.value.rows, e.value.cols, 0.0);
}

ParamSet init_params(const NetworkSpec& spec, std::uint64_t seed, const std::string& prefix) {
    spec.validate();
    ParamSet ps;
    ps.init_seed = seed;
    ps.init_kind = std::string("glorot-uniform/") + kRngAlgorithmId;
    Rng rng = derive_stream(seed, 0x70617261); // stream tag for params
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        const std::size_t fan_in = spec.widths[l];
        const std::size_t fan_out = spec.widths[l + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        ParamEntry w;
        w.name = prefix + ".W" + std::to_string(l);
        w.value = Mat(fan_in, fan_out);
        for (double& x : w.value.v) x = rng.next_range(-a, a);
        w.grad = Mat(fan_in, fan_out, 0.0);
        ps.entries.push_back(std::move(w));

        ParamEntry b;
        b.name = prefix + ".b" + std::to_string(l);
        b.value = Mat(1, fan_out, 0.0);
        b.grad = Mat(1, fan_out, 0.0);
        ps.entries.push_back(std::move(b));
    }
    return ps;
}

ad::Tensor TapedNetwork::forward(ad::Tensor input) const {
    if (input.cols() != spec->input_width())
        throw ShapeMismatch("TapedNetwork::forward: input width mismatch");
    ad::Tape& tape = *input.tape;
    ad::Tensor h = input;
    for (std::size_t l = 0; l < spec->layer_count(); ++l) {
        h = tape.add_rowvec(tape.matmul(h, leaves[2 * l]), leaves[2 * l + 1]);
        switch (spec->acts[l]) {
            case Activation::identity: break;
            case Activation::relu: h = tape.relu(h); break;
            case Activation::tanh: h = tape.tanh_act(h); break;
        }
    }
    return h;
}

TapedNetwork register_network(ad::Tape& tape, const NetworkSpec& spec, const ParamSet& params) {
    spec.validate();
    if (params.entries.size() != 2 * spec.layer_count())
        throw ShapeMismatch("register_network: parameter count does not match spec");
    TapedNetwork net;
    net.spec = &spec;
    net.leaves.reserve(params.entries.size());
    for (const ParamEntry& e : params.entries) net.leaves.push_back(tape.leaf(e.value));
    return net;
}

void read_gradients(const TapedNetwork& net, ParamSet& params) {
    for (std::size_t i = 0; i < params.entries.size(); ++i)
        params.entries[i].grad = net.leaves[i].grad();
}

Mat eval_forward(const NetworkSpec& spec, const ParamSet& params, const Mat& input) {
    if (input.cols != spec.input_width())
        throw ShapeMismatch("eval_forward: input width mismatch");
    Mat h = input;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        Mat z = matmul(h, params.entries[2 * l].value);
        const Mat& b = params.entries[2 * l + 1].value;
        for (std::size_t i = 0; i < z.rows; ++i)
            for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += b(0, j);
        switch (spec.acts[l]) {
            case Activation::identity: break;
            case Activation::relu:
                for (double& x : z.v) x = x > 0.0 ? x : 0.0;
                break;
            case Activation::tanh:
                for (double& x : z.v) x = std::tanh(x);
                break;
        }
        h = std::move(z);
    }
    return h;
}

void sgd_step(ParamSet& params, double lr) {
    for (ParamEntry& e : params.entries) {
        if (!e.grad.same_shape(e.value)) throw ShapeMismatch("sgd_step: grad shape mismatch");
        for (std::size_t i = 0; i < e.value.size(); ++i) e.value.v[i] -= lr * e.grad.v[i];
    }
}

void adam_step(ParamSet& params, AdamState& state, double lr, double beta1, double beta2,
               double eps) {
    if (state.m.empty()) {
        for (const ParamEntry& e : params.entries) {
            state.m.emplace_back(e.value.rows, e.value.cols, 0.0);
            state.v.emplace_back(e.value.rows, e.value.cols, 0.0);
        }
    }
    if (state.m.size() != params.entries.size())
        throw ShapeMismatch("adam_step: state does not match parameter count");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t p = 0; p < params.entries.size(); ++p) {
        ParamEntry& e = params.entries[p];
        if (!e.grad.same_shape(e.value)) throw ShapeMismatch("adam_step: grad shape mismatch");
        Mat& m = state.m[p];
        Mat& v = state.v[p];
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad.v[i];
            m.v[i] = beta1 * m.v[i] + (1.0 - beta1) * g;
            v.v[i] = beta2 * v.v[i] + (1.0 - beta2) * g * g;
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            e.value.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

std::string params_to_json(const ParamSet& params) {
    json root;
    root["format"] = "recalign-params-v1";
    root["init_seed"] = params.init_seed;
    root["init_kind"] = params.init_kind;
    json arr = json::array();
    for (const ParamEntry& e : params.entries) {
        json p;
        p["name"] = e.name;
        p["rows"] = e.value.rows;
        p["cols"] = e.value.cols;
        p["values"] = e.value.v;
        arr.push_back(std::move(p));
    }
    root["params"] = std::move(arr);
    return root.dump();
}

ParamSet params_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("params_from_json: ") + e.what());
    }
    if (root.value("format", "") != std::string("recalign-params-v1"))
        throw ParseError("params_from_json: unknown checkpoint format");
    ParamSet ps;
    ps.init_seed = root.value("init_seed", 0ULL);
    ps.init_kind = root.value("init_kind", "");
    for (const auto& p : root.at("params")) {
        ParamEntry e;
        e.name = p.at("name").get<std::string>();
        const auto rows = p.at("rows").get<std::size_t>();
        const auto cols = p.at("cols").get<std::size_t>();
        e.value = Mat(rows, cols);
        e.value.v = p.at("values").get<std::vector<double>>();
        if (e.value.v.size() != rows * cols)
            throw ParseError("params_from_json: value count does not match shape");
        e.grad = Mat(rows, cols, 0.0);
        ps.entries.push_back(std::move(e));
    }
    return ps;
}

FdReport finite_difference_check(std::vector<ParamSet*> sets, const LossFn& loss, double h,
                                 double tol) {
    if (h <= 0.0) throw Error("finite_difference_check: h must be positive");
    FdReport report;

    // Analytic pass at the base point.
    loss(true, nullptr);

    // A coordinate whose perturbed evaluations pass within `kink_margin` of a
    // relu kink is reported but not judged.
    const double kink_margin = 8.0 * h;

    for (ParamSet* set : sets) {
        for (ParamEntry& e : set->entries) {
            for (std::size_t i = 0; i < e.value.size(); ++i) {
                const double saved = e.value.v[i];
                const double inf = std::numeric_limits<double>::infinity();
                double kink_plus = inf, kink_minus = inf;
                e.value.v[i] = saved + h;
                const double up = loss(false, &kink_plus);
                e.value.v[i] = saved - h;
                const double down = loss(false, &kink_minus);
                e.value.v[i] = saved;

                FdCoord c;
                c.param = e.name;
                c.index = i;
                c.analytic = e.grad.v[i];
                c.numeric = (up - down) / (2.0 * h);
                c.excluded = std::min(kink_plus, kink_minus) <= kink_margin;
                const double denom =
                    std::max({std::abs(c.analytic), std::abs(c.numeric), 1e-6});
                c.rel_err = std::abs(c.analytic - c.numeric) / denom;
                if (c.excluded) {
                    ++report.excluded_count;
                } else {
                    report.max_rel_err = std::max(report.max_rel_err, c.rel_err);
                }
                report.coords.push_back(std::move(c));
            }
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

} // namespace recalign::nn
