#include "recalign/prob.hpp"

#include <cmath>
#include <unordered_set>

namespace recalign::prob {

namespace {

void check_mass_and_renormalize(std::vector<double>& v, const char* what) {
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= 0.0)) throw InvalidDistribution(std::string(what) + ": negative or NaN mass");
        sum += x;
    }
    const double drift = std::abs(sum - 1.0);
    if (drift >= kRenormalizeTolerance)
        throw InvalidDistribution(std::string(what) + ": total mass " + std::to_string(sum) +
                                  " drifts beyond tolerance");
    if (drift > 0.0)
        for (double& x : v) x /= sum;
}

double plog2p(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

double kl_terms(const double* p, const double* q, std::size_t n, const char* what) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] > 0.0) {
            if (q[i] <= 0.0)
                throw SupportViolation(std::string(what) + ": p > 0 where q = 0 at index " +
                                       std::to_string(i));
            sum += p[i] * std::log2(p[i] / q[i]);
        }
    }
    return sum;
}

// KL(p || (p+q)/2), always finite; building block of JS.
double kl_to_midpoint(const double* p, const double* q, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] > 0.0) sum += p[i] * std::log2(p[i] / (0.5 * (p[i] + q[i])));
    }
    return sum;
}

void check_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw SpaceMismatch(std::string(what) + ": operand sizes differ");
}

} // namespace

FiniteSpace::FiniteSpace(std::vector<std::string> names) : labels(std::move(names)) {
    if (labels.empty()) throw InvalidDistribution("FiniteSpace: needs at least one symbol");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels)
        if (!seen.insert(l).second)
            throw InvalidDistribution("FiniteSpace: duplicate symbol '" + l + "'");
}

FiniteSpace FiniteSpace::indexed(const std::string& prefix, std::size_t n) {
    std::vector<std::string> names;
    names.reserve(n);
    for (std::size_t i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
    return FiniteSpace(std::move(names));
}

Pmf::Pmf(FiniteSpace s, std::vector<double> p) : space(std::move(s)), probs(std::move(p)) {
    if (probs.size() != space.size()) throw InvalidDistribution("Pmf: size does not match space");
    check_mass_and_renormalize(probs, "Pmf");
}

JointPmf::JointPmf(FiniteSpace rows, FiniteSpace cols, Mat p)
    : row_space(std::move(rows)), col_space(std::move(cols)), probs(std::move(p)) {
    if (probs.rows != row_space.size() || probs.cols != col_space.size())
        throw InvalidDistribution("JointPmf: matrix shape does not match spaces");
    check_mass_and_renormalize(probs.v, "JointPmf");
}

JointPmf JointPmf::transposed() const {
    Mat t(probs.cols, probs.rows);
    for (std::size_t r = 0; r < probs.rows; ++r)
        for (std::size_t c = 0; c < probs.cols; ++c) t(c, r) = probs(r, c);
    return JointPmf(col_space, row_space, std::move(t));
}

Channel::Channel(FiniteSpace from, FiniteSpace to, Mat stochastic_rows)
    : from_space(std::move(from)), to_space(std::move(to)), rows(std::move(stochastic_rows)) {
    if (rows.rows != from_space.size() || rows.cols != to_space.size())
        throw InvalidDistribution("Channel: matrix shape does not match spaces");
    for (std::size_t r = 0; r < rows.rows; ++r) {
        std::vector<double> row(rows.v.begin() + r * rows.cols,
                                rows.v.begin() + (r + 1) * rows.cols);
        check_mass_and_renormalize(row, "Channel row");
        for (std::size_t c = 0; c < rows.cols; ++c) rows(r, c) = row[c];
    }
}

double entropy(const Pmf& p) {
    double h = 0.0;
    for (double x : p.probs) h -= plog2p(x);
    return h;
}

double joint_entropy(const JointPmf& j) {
    double h = 0.0;
    for (double x : j.probs.v) h -= plog2p(x);
    return h;
}

double conditional_entropy(const JointPmf& j) {
    // sum_{r,c} -p(r,c) log2( p(r,c) / p(c) ), one pass per column.
    double h = 0.0;
    for (std::size_t c = 0; c < j.probs.cols; ++c) {
        double pc = 0.0;
        for (std::size_t r = 0; r < j.probs.rows; ++r) pc += j.probs(r, c);
        if (pc <= 0.0) continue;
        for (std::size_t r = 0; r < j.probs.rows; ++r) {
            const double prc = j.probs(r, c);
            if (prc > 0.0) h -= prc * std::log2(prc / pc);
        }
    }
    return h;
}

double mutual_information(const JointPmf& j) {
    return entropy(marginalize(j, Axis::row)) - conditional_entropy(j);
}

double kl_divergence(const Pmf& p, const Pmf& q) {
    check_same_size(p.size(), q.size(), "kl_divergence");
    return kl_terms(p.probs.data(), q.probs.data(), p.size(), "kl_divergence");
}

double kl_divergence(const JointPmf& p, const JointPmf& q) {
    check_same_size(p.probs.rows, q.probs.rows, "kl_divergence");
    check_same_size(p.probs.cols, q.probs.cols, "kl_divergence");
    return kl_terms(p.probs.v.data(), q.probs.v.data(), p.probs.size(), "kl_divergence");
}

double js_divergence(const Pmf& p, const Pmf& q) {
    check_same_size(p.size(), q.size(), "js_divergence");
    return 0.5 * kl_to_midpoint(p.probs.data(), q.probs.data(), p.size()) +
           0.5 * kl_to_midpoint(q.probs.data(), p.probs.data(), p.size());
}

double js_divergence(const JointPmf& p, const JointPmf& q) {
    check_same_size(p.probs.rows, q.probs.rows, "js_divergence");
    check_same_size(p.probs.cols, q.probs.cols, "js_divergence");
    return 0.5 * kl_to_midpoint(p.probs.v.data(), q.probs.v.data(), p.probs.size()) +
           0.5 * kl_to_midpoint(q.probs.v.data(), p.probs.v.data(), p.probs.size());
}

double divergence(const JointPmf& p, const JointPmf& q, DivergenceKind kind) {
    return kind == DivergenceKind::kl ? kl_divergence(p, q) : js_divergence(p, q);
}

Pmf marginalize(const JointPmf& j, Axis axis) {
    if (axis == Axis::row) {
        std::vector<double> m(j.probs.rows, 0.0);
        for (std::size_t r = 0; r < j.probs.rows; ++r)
            for (std::size_t c = 0; c < j.probs.cols; ++c) m[r] += j.probs(r, c);
        return Pmf(j.row_space, std::move(m));
    }
    std::vector<double> m(j.probs.cols, 0.0);
    for (std::size_t c = 0; c < j.probs.cols; ++c)
        for (std::size_t r = 0; r < j.probs.rows; ++r) m[c] += j.probs(r, c);
    return Pmf(j.col_space, std::move(m));
}

Pmf condition(const JointPmf& j, Axis axis, std::size_t index) {
    const std::size_t given = axis == Axis::row ? j.probs.rows : j.probs.cols;
    if (index >= given) throw IndexOutOfRange("condition: index outside conditioning axis");
    const std::size_t other = axis == Axis::row ? j.probs.cols : j.probs.rows;
    std::vector<double> out(other, 0.0);
    double mass = 0.0;
    for (std::size_t i = 0; i < other; ++i) {
        out[i] = axis == Axis::row ? j.probs(index, i) : j.probs(i, index);
        mass += out[i];
    }
    if (mass <= 0.0) throw ZeroMassCondition("condition: conditioning event has zero mass");
    for (double& x : out) x /= mass;
    return Pmf(axis == Axis::row ? j.col_space : j.row_space, std::move(out));
}

const char* to_string(DivergenceKind kind) {
    return kind == DivergenceKind::kl ? "kl" : "js";
}

DivergenceKind divergence_from_string(const std::string& name) {
    if (name == "kl") return DivergenceKind::kl;
    if (name == "js") return DivergenceKind::js;
    throw ParseError("unknown divergence '" + name + "' (expected kl or js)");
}

} // namespace recalign::prob
