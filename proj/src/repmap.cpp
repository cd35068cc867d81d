#include "recalign/repmap.hpp"

#include <cmath>

namespace recalign::repmap {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw SpaceMismatch(msg);
}

} // namespace

FiniteDomainModel::FiniteDomainModel(FiniteSpace x, FiniteSpace y, Pmf p, Channel chan)
    : x_space(std::move(x)), y_space(std::move(y)), px(std::move(p)),
      label_channel(std::move(chan)) {
    require(px.size() == x_space.size(), "FiniteDomainModel: px does not match X");
    require(label_channel.rows.rows == x_space.size() &&
                label_channel.rows.cols == y_space.size(),
            "FiniteDomainModel: label channel shape does not match X x Y");
}

RepresentationMap::RepresentationMap(FiniteSpace x, FiniteSpace z, Mat stochastic_rows,
                                     std::string map_id)
    : x_space(std::move(x)), z_space(std::move(z)), rows(std::move(stochastic_rows)),
      id(std::move(map_id)) {
    // Row-stochasticity enforced through the Channel invariants.
    Channel check(x_space, z_space, rows);
    rows = std::move(check.rows);
}

bool RepresentationMap::is_deterministic() const {
    for (std::size_t r = 0; r < rows.rows; ++r) {
        for (std::size_t c = 0; c < rows.cols; ++c) {
            const double v = rows(r, c);
            if (v != 0.0 && v != 1.0) return false;
        }
    }
    return true;
}

RepresentationMap identity_map(const FiniteSpace& space) {
    Mat m(space.size(), space.size(), 0.0);
    for (std::size_t i = 0; i < space.size(); ++i) m(i, i) = 1.0;
    return RepresentationMap(space, space, std::move(m), "identity");
}

RepresentationMap constant_map(const FiniteSpace& x, const FiniteSpace& z, std::size_t target) {
    if (target >= z.size()) throw IndexOutOfRange("constant_map: target outside Z");
    Mat m(x.size(), z.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) m(i, target) = 1.0;
    return RepresentationMap(x, z, std::move(m), "const" + std::to_string(target));
}

Distortion Distortion::zero_one(std::size_t x_size) {
    Mat costs(x_size, x_size, 1.0);
    for (std::size_t i = 0; i < x_size; ++i) costs(i, i) = 0.0;
    return table(std::move(costs));
}

Distortion Distortion::table(Mat costs) {
    for (std::size_t i = 0; i < costs.rows && i < costs.cols; ++i)
        if (costs(i, i) != 0.0)
            throw InvalidDistribution("Distortion::table: nonzero self-distortion");
    for (double c : costs.v)
        if (!(c >= 0.0)) throw InvalidDistribution("Distortion::table: negative cost");
    Distortion d;
    d.table_ = std::move(costs);
    return d;
}

Distortion Distortion::squared_euclidean(std::vector<std::vector<double>> points) {
    if (points.empty()) throw EmptyInput("Distortion::squared_euclidean: no points");
    const std::size_t dim = points[0].size();
    for (const auto& p : points)
        if (p.size() != dim)
            throw ShapeMismatch("Distortion::squared_euclidean: ragged embedding");
    Distortion d;
    d.embedding_ = std::move(points);
    return d;
}

std::size_t Distortion::x_size() const {
    return is_embedded() ? embedding_->size() : table_->rows;
}

std::size_t Distortion::candidate_count() const {
    if (is_embedded()) throw Unsupported("Distortion: embedded mode has no candidate table");
    return table_->cols;
}

double Distortion::cost_to_candidate(std::size_t x, std::size_t candidate) const {
    if (is_embedded())
        return cost_to_point(x, (*embedding_)[candidate]);
    return (*table_)(x, candidate);
}

double Distortion::cost_to_point(std::size_t x, const std::vector<double>& xhat) const {
    if (!is_embedded()) throw Unsupported("Distortion: table mode has no point costs");
    const auto& px = (*embedding_)[x];
    if (px.size() != xhat.size())
        throw ShapeMismatch("Distortion: point dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double d = px[i] - xhat[i];
        s += d * d;
    }
    return s;
}

const std::vector<double>& Distortion::point_of(std::size_t x) const {
    if (!is_embedded()) throw Unsupported("Distortion: table mode has no embedding");
    return (*embedding_)[x];
}

Decoder index_decoder(const FiniteSpace& z_space, std::size_t x_size) {
    if (z_space.size() > x_size)
        throw SpaceMismatch("index_decoder: |Z| exceeds |X|");
    std::vector<std::size_t> out(z_space.size());
    for (std::size_t z = 0; z < out.size(); ++z) out[z] = z;
    return Decoder{z_space, std::move(out), "identity"};
}

JointPmf pushforward_joint(const FiniteDomainModel& d, const RepresentationMap& f) {
    require(f.x_space.size() == d.x_space.size(), "pushforward_joint: X spaces differ");
    const std::size_t ny = d.y_space.size();
    const std::size_t nz = f.z_space.size();
    Mat joint(ny, nz, 0.0);
    for (std::size_t x = 0; x < d.x_space.size(); ++x) {
        const double px = d.px[x];
        if (px == 0.0) continue;
        for (std::size_t y = 0; y < ny; ++y) {
            const double pyx = px * d.label_channel.rows(x, y);
            if (pyx == 0.0) continue;
            for (std::size_t z = 0; z < nz; ++z) joint(y, z) += pyx * f.rows(x, z);
        }
    }
    return JointPmf(d.y_space, f.z_space, std::move(joint));
}

JointPmf input_feature_joint(const FiniteDomainModel& d, const RepresentationMap& f) {
    require(f.x_space.size() == d.x_space.size(), "input_feature_joint: X spaces differ");
    const std::size_t nx = d.x_space.size();
    const std::size_t nz = f.z_space.size();
    Mat joint(nx, nz, 0.0);
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t z = 0; z < nz; ++z) joint(x, z) = d.px[x] * f.rows(x, z);
    return JointPmf(d.x_space, f.z_space, std::move(joint));
}

JointPmf label_input_joint(const FiniteDomainModel& d) {
    const std::size_t nx = d.x_space.size();
    const std::size_t ny = d.y_space.size();
    Mat joint(ny, nx, 0.0);
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) joint(y, x) = d.px[x] * d.label_channel.rows(x, y);
    return JointPmf(d.y_space, d.x_space, std::move(joint));
}

double label_input_mi(const FiniteDomainModel& d) {
    return prob::mutual_information(label_input_joint(d));
}

double domain_discrepancy(const FiniteDomainModel& d_unseen, const FiniteDomainModel& d_seen,
                          const RepresentationMap& f, DivergenceKind div) {
    const JointPmf pu = pushforward_joint(d_unseen, f);
    const JointPmf ps = pushforward_joint(d_seen, f);
    return prob::divergence(pu, ps, div);
}

double reconstruction_loss(const FiniteDomainModel& d, const RepresentationMap& f,
                           const Decoder& theta, const Distortion& loss) {
    require(f.x_space.size() == d.x_space.size(), "reconstruction_loss: X spaces differ");
    require(theta.z_space.size() == f.z_space.size(), "reconstruction_loss: Z spaces differ");
    if (loss.x_size() != d.x_space.size())
        throw SpaceMismatch("reconstruction_loss: distortion does not cover X");
    const std::size_t nz = f.z_space.size();

    // Per-z cost column, resolved once.
    std::vector<std::vector<double>> cost(nz, std::vector<double>(d.x_space.size()));
    for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t x = 0; x < d.x_space.size(); ++x) {
            cost[z][x] = theta.is_indexed()
                             ? loss.cost_to_candidate(x, theta.indices()[z])
                             : loss.cost_to_point(x, theta.points()[z]);
        }
    }

    double r = 0.0;
    for (std::size_t x = 0; x < d.x_space.size(); ++x) {
        const double px = d.px[x];
        if (px == 0.0) continue;
        for (std::size_t z = 0; z < nz; ++z) {
            const double w = f.rows(x, z);
            if (w != 0.0) r += px * w * cost[z][x];
        }
    }
    return r;
}

ClassifierTable bayes_classifier(const JointPmf& joint_yz) {
    const std::size_t nz = joint_yz.probs.cols;
    const std::size_t ny = joint_yz.probs.rows;
    std::vector<std::size_t> table(nz, 0);
    for (std::size_t z = 0; z < nz; ++z) {
        std::size_t best = 0;
        double best_mass = joint_yz.probs(0, z);
        for (std::size_t y = 1; y < ny; ++y) {
            if (joint_yz.probs(y, z) > best_mass) { // strict: ties keep lowest index
                best_mass = joint_yz.probs(y, z);
                best = y;
            }
        }
        table[z] = best;
    }
    return ClassifierTable{joint_yz.col_space, joint_yz.row_space, std::move(table)};
}

double classification_risk(const FiniteDomainModel& d, const RepresentationMap& f,
                           const ClassifierTable& g) {
    require(g.z_space.size() == f.z_space.size(), "classification_risk: Z spaces differ");
    require(g.y_space.size() == d.y_space.size(), "classification_risk: Y spaces differ");
    const JointPmf joint = pushforward_joint(d, f);
    double risk = 0.0;
    for (std::size_t z = 0; z < joint.probs.cols; ++z) {
        double pz = 0.0;
        for (std::size_t y = 0; y < joint.probs.rows; ++y) pz += joint.probs(y, z);
        risk += pz - joint.probs(g.label_for_z[z], z);
    }
    return risk;
}

DomainPair example_domain_pair(ExampleCase which) {
    const FiniteSpace z = FiniteSpace::indexed("z", 2);
    const FiniteSpace y = FiniteSpace::indexed("y", 2);
    if (which == ExampleCase::covariate_aligned) {
        // Matched feature marginals (uniform on both domains); conditionals
        // flip between domains.
        Pmf pz_seen(z, {0.5, 0.5});
        Pmf pz_unseen(z, {0.5, 0.5});
        Channel cond_seen(z, y, Mat::from_rows({{0.9, 0.1}, {0.1, 0.9}}));
        Channel cond_unseen(z, y, Mat::from_rows({{0.1, 0.9}, {0.9, 0.1}}));
        return DomainPair{FiniteDomainModel(z, y, std::move(pz_seen), std::move(cond_seen)),
                          FiniteDomainModel(z, y, std::move(pz_unseen), std::move(cond_unseen))};
    }
    // Matched conditionals; feature marginals flip between domains.
    Pmf pz_seen(z, {0.9, 0.1});
    Pmf pz_unseen(z, {0.1, 0.9});
    Channel cond(z, y, Mat::from_rows({{0.9, 0.1}, {0.49, 0.51}}));
    Channel cond_copy = cond;
    return DomainPair{FiniteDomainModel(z, y, std::move(pz_seen), std::move(cond)),
                      FiniteDomainModel(z, y, std::move(pz_unseen), std::move(cond_copy))};
}

} // namespace recalign::repmap
