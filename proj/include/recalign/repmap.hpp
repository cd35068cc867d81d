#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "recalign/prob.hpp"

// Representation maps, decoders, and the per-map quantities on finite
// domains: the domain discrepancy induced by an encoder, its reconstruction
// loss under a decoder, and classifier risks. All operations are pure.

namespace recalign::repmap {

using prob::Channel;
using prob::DivergenceKind;
using prob::FiniteSpace;
using prob::JointPmf;
using prob::Pmf;

// One environment: an input distribution p(x) plus a label channel p(y|x).
struct FiniteDomainModel {
    FiniteSpace x_space;
    FiniteSpace y_space;
    Pmf px;
    Channel label_channel; // x -> y

    FiniteDomainModel() = default;
    FiniteDomainModel(FiniteSpace x, FiniteSpace y, Pmf p, Channel chan);
};

// Encoder as a row-stochastic |X| x |Z| matrix f(z|x). Deterministic maps
// have a single unit entry per row.
struct RepresentationMap {
    FiniteSpace x_space;
    FiniteSpace z_space;
    Mat rows;
    std::string id;

    RepresentationMap() = default;
    RepresentationMap(FiniteSpace x, FiniteSpace z, Mat stochastic_rows, std::string map_id);

    bool is_deterministic() const;
};

RepresentationMap identity_map(const FiniteSpace& space);
RepresentationMap constant_map(const FiniteSpace& x, const FiniteSpace& z, std::size_t target);

// Distortion between an input symbol and a reconstruction candidate.
// Two backings: a nonnegative table over (x, candidate) pairs with zero
// diagonal (candidates indexed like X), or squared-Euclidean distance over
// an embedding of X into R^k (candidates are arbitrary points).
class Distortion {
  public:
    static Distortion zero_one(std::size_t x_size);
    static Distortion table(Mat costs);
    static Distortion squared_euclidean(std::vector<std::vector<double>> points);

    bool is_embedded() const { return embedding_.has_value(); }
    std::size_t x_size() const;
    // Table mode: number of reconstruction candidates (= |X|).
    std::size_t candidate_count() const;

    double cost_to_candidate(std::size_t x, std::size_t candidate) const;
    double cost_to_point(std::size_t x, const std::vector<double>& xhat) const;
    const std::vector<double>& point_of(std::size_t x) const;

  private:
    Distortion() = default;
    std::optional<Mat> table_;
    std::optional<std::vector<std::vector<double>>> embedding_;
};

// One reconstruction output per z: a candidate index (table distortion) or
// a real point (embedded distortion).
struct Decoder {
    FiniteSpace z_space;
    std::variant<std::vector<std::size_t>, std::vector<std::vector<double>>> outputs;
    std::string id;

    bool is_indexed() const { return outputs.index() == 0; }
    const std::vector<std::size_t>& indices() const { return std::get<0>(outputs); }
    const std::vector<std::vector<double>>& points() const { return std::get<1>(outputs); }
};

// theta(z) = x_z; requires |Z| <= |X|.
Decoder index_decoder(const FiniteSpace& z_space, std::size_t x_size);

// Hard classifier g: Z -> Y as a lookup table.
struct ClassifierTable {
    FiniteSpace z_space;
    FiniteSpace y_space;
    std::vector<std::size_t> label_for_z;
};

// p(y,z) = sum_x p(x) p(y|x) f(z|x); rows = Y, cols = Z.
JointPmf pushforward_joint(const FiniteDomainModel& d, const RepresentationMap& f);

// p(x,z) = p(x) f(z|x); rows = X, cols = Z.
JointPmf input_feature_joint(const FiniteDomainModel& d, const RepresentationMap& f);

// p(y,x); rows = Y, cols = X. The encoder-independent reference joint.
JointPmf label_input_joint(const FiniteDomainModel& d);

// I(Y;X) on the given domain.
double label_input_mi(const FiniteDomainModel& d);

// K(f) = D( p_u(Y,Z) || p_s(Y,Z) ).
double domain_discrepancy(const FiniteDomainModel& d_unseen, const FiniteDomainModel& d_seen,
                          const RepresentationMap& f, DivergenceKind div);

// R(f, theta) = sum_x sum_z p(x) f(z|x) loss(x, theta(z)).
double reconstruction_loss(const FiniteDomainModel& d, const RepresentationMap& f,
                           const Decoder& theta, const Distortion& loss);

// g(z) = argmax_y p(y|z); ties and zero-mass z resolve to the lowest label
// index so results are reproducible.
ClassifierTable bayes_classifier(const JointPmf& joint_yz);

// R = sum_z p(z) (1 - p(g(z)|z)) under the pushforward of (d, f).
double classification_risk(const FiniteDomainModel& d, const RepresentationMap& f,
                           const ClassifierTable& g);

// The two built-in alignment counterexamples, tabulated directly over Z
// (encoder = identity): one with matched feature marginals but mismatched
// conditionals, one with matched conditionals but mismatched marginals.
enum class ExampleCase { covariate_aligned, concept_aligned };

struct DomainPair {
    FiniteDomainModel seen;
    FiniteDomainModel unseen;
};

DomainPair example_domain_pair(ExampleCase which);

} // namespace recalign::repmap
