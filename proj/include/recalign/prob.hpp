#pragma once

#include <string>
#include <vector>

#include "recalign/errors.hpp"
#include "recalign/mat.hpp"

// Exact finite-space probability and information measures.
//
// Conventions, fixed project-wide:
//   * every information quantity is reported in bits (log base 2),
//   * 0 * log 0 := 0,
//   * a divergence term with p > 0 and q = 0 raises SupportViolation
//     instead of returning +inf.
// All types are immutable values after construction and safe to share
// read-only across threads.

namespace recalign::prob {

// Normalization drift below this is silently renormalized at construction.
inline constexpr double kRenormalizeTolerance = 1e-9;
// Post-construction guarantee on the total mass.
inline constexpr double kMassTolerance = 1e-12;

struct FiniteSpace {
    std::vector<std::string> labels;

    FiniteSpace() = default;
    explicit FiniteSpace(std::vector<std::string> names);

    // {prefix0, prefix1, ...}
    static FiniteSpace indexed(const std::string& prefix, std::size_t n);

    std::size_t size() const { return labels.size(); }
    bool operator==(const FiniteSpace& o) const { return labels == o.labels; }
};

struct Pmf {
    FiniteSpace space;
    std::vector<double> probs;

    Pmf() = default;
    Pmf(FiniteSpace s, std::vector<double> p);

    std::size_t size() const { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }
};

struct JointPmf {
    FiniteSpace row_space;
    FiniteSpace col_space;
    Mat probs; // probs(r, c) = P(row = r, col = c)

    JointPmf() = default;
    JointPmf(FiniteSpace rows, FiniteSpace cols, Mat p);

    JointPmf transposed() const;
};

// Row-stochastic conditional table: rows(r, c) = P(to = c | from = r).
struct Channel {
    FiniteSpace from_space;
    FiniteSpace to_space;
    Mat rows;

    Channel() = default;
    Channel(FiniteSpace from, FiniteSpace to, Mat stochastic_rows);
};

enum class Axis { row, col };

enum class DivergenceKind { kl, js };

double entropy(const Pmf& p);
double joint_entropy(const JointPmf& j);

// H(row | col) = sum_c P(c) H(row | col = c).
double conditional_entropy(const JointPmf& j);

// I(row; col) = H(row) - H(row | col). Symmetric under transpose up to
// floating-point roundoff; can dip a few ulp below zero.
double mutual_information(const JointPmf& j);

double kl_divergence(const Pmf& p, const Pmf& q);
double kl_divergence(const JointPmf& p, const JointPmf& q);

// Jensen-Shannon divergence in bits; symmetric, always finite, in [0, 1].
double js_divergence(const Pmf& p, const Pmf& q);
double js_divergence(const JointPmf& p, const JointPmf& q);

double divergence(const JointPmf& p, const JointPmf& q, DivergenceKind kind);

// Marginal distribution OF the named axis (the other axis is summed out).
Pmf marginalize(const JointPmf& j, Axis axis);

// Distribution of the other axis given {axis = index}; ZeroMassCondition
// when the conditioning event has probability zero.
Pmf condition(const JointPmf& j, Axis axis, std::size_t index);

const char* to_string(DivergenceKind kind);
DivergenceKind divergence_from_string(const std::string& name);

} // namespace recalign::prob
