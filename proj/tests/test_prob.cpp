#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "recalign/prob.hpp"
#include "recalign/rng.hpp"

using namespace recalign;
using namespace recalign::prob;

namespace {

FiniteSpace space2 = FiniteSpace::indexed("a", 2);

Pmf random_pmf(Rng& rng, const FiniteSpace& space) {
    std::vector<double> v(space.size());
    double sum = 0.0;
    for (double& x : v) {
        x = 0.05 + rng.next_unit(); // strictly positive
        sum += x;
    }
    for (double& x : v) x /= sum;
    return Pmf(space, v);
}

JointPmf random_joint(Rng& rng, const FiniteSpace& rows, const FiniteSpace& cols) {
    Mat m(rows.size(), cols.size());
    double sum = 0.0;
    for (double& x : m.v) {
        x = 0.05 + rng.next_unit();
        sum += x;
    }
    for (double& x : m.v) x /= sum;
    return JointPmf(rows, cols, m);
}

// Seen-domain joint of the covariate-aligned example: uniform Z,
// p(y0|z0) = p(y1|z1) = 0.9.
JointPmf example1_seen_joint() {
    Mat m(2, 2);
    m(0, 0) = 0.5 * 0.9;
    m(1, 0) = 0.5 * 0.1;
    m(0, 1) = 0.5 * 0.1;
    m(1, 1) = 0.5 * 0.9;
    return JointPmf(FiniteSpace::indexed("y", 2), FiniteSpace::indexed("z", 2), m);
}

JointPmf example1_unseen_joint() {
    Mat m(2, 2);
    m(0, 0) = 0.5 * 0.1;
    m(1, 0) = 0.5 * 0.9;
    m(0, 1) = 0.5 * 0.9;
    m(1, 1) = 0.5 * 0.1;
    return JointPmf(FiniteSpace::indexed("y", 2), FiniteSpace::indexed("z", 2), m);
}

} // namespace

TEST_CASE("entropy basics") {
    CHECK(entropy(Pmf(space2, {0.5, 0.5})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(entropy(Pmf(space2, {1.0, 0.0})) == doctest::Approx(0.0).epsilon(1e-12));

    // Direct-evaluation oracle for the skewed case.
    const double oracle = -(0.9 * std::log2(0.9) + 0.1 * std::log2(0.1));
    CHECK(std::abs(entropy(Pmf(space2, {0.9, 0.1})) - oracle) < 1e-15);
    CHECK(entropy(Pmf(space2, {0.9, 0.1})) == doctest::Approx(0.468996).epsilon(1e-6));
}

TEST_CASE("conditional entropy") {
    const FiniteSpace y = FiniteSpace::indexed("y", 2);
    const FiniteSpace z = FiniteSpace::indexed("z", 2);
    SUBCASE("independent uniform") {
        JointPmf j(y, z, Mat::from_rows({{0.25, 0.25}, {0.25, 0.25}}));
        CHECK(conditional_entropy(j) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("diagonal, functional dependence") {
        JointPmf j(y, z, Mat::from_rows({{0.5, 0.0}, {0.0, 0.5}}));
        CHECK(conditional_entropy(j) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("skewed seen-domain joint") {
        const double hb9 = -(0.9 * std::log2(0.9) + 0.1 * std::log2(0.1));
        CHECK(std::abs(conditional_entropy(example1_seen_joint()) - hb9) < 1e-12);
    }
}

TEST_CASE("mutual information") {
    const FiniteSpace y = FiniteSpace::indexed("y", 2);
    const FiniteSpace z = FiniteSpace::indexed("z", 2);
    CHECK(mutual_information(JointPmf(y, z, Mat::from_rows({{0.25, 0.25}, {0.25, 0.25}}))) ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(mutual_information(JointPmf(y, z, Mat::from_rows({{0.5, 0.0}, {0.0, 0.5}}))) ==
          doctest::Approx(1.0).epsilon(1e-12));

    const double hb9 = -(0.9 * std::log2(0.9) + 0.1 * std::log2(0.1));
    CHECK(std::abs(mutual_information(example1_seen_joint()) - (1.0 - hb9)) < 1e-12);
    CHECK(mutual_information(example1_seen_joint()) == doctest::Approx(0.531004).epsilon(1e-6));
}

TEST_CASE("mutual information identity and transpose symmetry on random joints") {
    Rng rng(11);
    const FiniteSpace r = FiniteSpace::indexed("r", 3);
    const FiniteSpace c = FiniteSpace::indexed("c", 4);
    for (int trial = 0; trial < 200; ++trial) {
        const JointPmf j = random_joint(rng, r, c);
        const double i = mutual_information(j);
        const double via_entropies = entropy(marginalize(j, Axis::row)) +
                                     entropy(marginalize(j, Axis::col)) - joint_entropy(j);
        CHECK(std::abs(i - via_entropies) < 1e-10);
        CHECK(std::abs(i - mutual_information(j.transposed())) < 1e-10);
        CHECK(i > -1e-12);
    }
}

TEST_CASE("kl divergence") {
    SUBCASE("identical distributions give exactly zero") {
        const Pmf p(space2, {0.3, 0.7});
        CHECK(kl_divergence(p, p) == 0.0);
    }
    SUBCASE("term-sum oracle on the flipped joints") {
        // 0.8 * log2(9), summing the four cells directly.
        const double oracle = 2.0 * (0.05 * std::log2(0.05 / 0.45) + 0.45 * std::log2(0.45 / 0.05));
        const double kl = kl_divergence(example1_unseen_joint(), example1_seen_joint());
        CHECK(std::abs(kl - oracle) < 1e-12);
        CHECK(kl == doctest::Approx(2.535940).epsilon(1e-6));
        CHECK(std::abs(kl - 0.8 * std::log2(9.0)) < 1e-12);
    }
    SUBCASE("point mass against uniform") {
        CHECK(kl_divergence(Pmf(space2, {1.0, 0.0}), Pmf(space2, {0.5, 0.5})) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("support violation is an error, not infinity") {
        CHECK_THROWS_AS(kl_divergence(Pmf(space2, {0.5, 0.5}), Pmf(space2, {1.0, 0.0})),
                        SupportViolation);
    }
    SUBCASE("nonnegative, zero only at equality") {
        Rng rng(12);
        for (int trial = 0; trial < 200; ++trial) {
            const Pmf p = random_pmf(rng, space2);
            const Pmf q = random_pmf(rng, space2);
            const double kl = kl_divergence(p, q);
            CHECK(kl > -1e-12);
            if (std::abs(p[0] - q[0]) > 1e-3) CHECK(kl > 1e-8);
        }
    }
}

TEST_CASE("kl divergence is jointly convex") {
    Rng rng(13);
    const FiniteSpace s = FiniteSpace::indexed("s", 3);
    for (int trial = 0; trial < 200; ++trial) {
        const Pmf p1 = random_pmf(rng, s), p2 = random_pmf(rng, s);
        const Pmf q1 = random_pmf(rng, s), q2 = random_pmf(rng, s);
        const double lam = rng.next_unit();
        std::vector<double> pm(3), qm(3);
        for (std::size_t i = 0; i < 3; ++i) {
            pm[i] = lam * p1[i] + (1 - lam) * p2[i];
            qm[i] = lam * q1[i] + (1 - lam) * q2[i];
        }
        const double lhs = kl_divergence(Pmf(s, pm), Pmf(s, qm));
        const double rhs = lam * kl_divergence(p1, q1) + (1 - lam) * kl_divergence(p2, q2);
        CHECK(lhs <= rhs + 1e-10);
    }
}

TEST_CASE("js divergence") {
    const Pmf p(space2, {0.9, 0.1});
    const Pmf q(space2, {0.1, 0.9});
    CHECK(js_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(js_divergence(Pmf(space2, {1.0, 0.0}), Pmf(space2, {0.0, 1.0})) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // Direct-evaluation oracle.
    auto term = [](double a, double m) { return a > 0 ? a * std::log2(a / m) : 0.0; };
    const double oracle = 0.5 * (term(0.9, 0.5) + term(0.1, 0.5)) +
                          0.5 * (term(0.1, 0.5) + term(0.9, 0.5));
    CHECK(std::abs(js_divergence(p, q) - oracle) < 1e-12);
    CHECK(js_divergence(p, q) == doctest::Approx(0.531004).epsilon(1e-6));

    Rng rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        const Pmf a = random_pmf(rng, space2);
        const Pmf b = random_pmf(rng, space2);
        const double ab = js_divergence(a, b);
        CHECK(std::abs(ab - js_divergence(b, a)) < 1e-12);
        CHECK(ab > -1e-12);
        CHECK(ab < 1.0 + 1e-12);
    }
}

TEST_CASE("marginalize and condition") {
    const FiniteSpace y = FiniteSpace::indexed("y", 2);
    const FiniteSpace z = FiniteSpace::indexed("z", 2);
    SUBCASE("diagonal marginal is uniform") {
        JointPmf j(y, z, Mat::from_rows({{0.5, 0.0}, {0.0, 0.5}}));
        const Pmf m = marginalize(j, Axis::row);
        CHECK(m[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(m[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("skewed-marginal joint recovers its feature marginal") {
        // p(z) = (0.9, 0.1) with shared conditionals (0.9/0.1, 0.49/0.51).
        Mat m(2, 2);
        m(0, 0) = 0.9 * 0.9;
        m(1, 0) = 0.9 * 0.1;
        m(0, 1) = 0.1 * 0.49;
        m(1, 1) = 0.1 * 0.51;
        JointPmf j(y, z, m);
        const Pmf pz = marginalize(j, Axis::col);
        CHECK(pz[0] == doctest::Approx(0.9).epsilon(1e-12));
        CHECK(pz[1] == doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("conditioning on a zero-mass column fails loudly") {
        JointPmf j(y, z, Mat::from_rows({{0.5, 0.0}, {0.5, 0.0}}));
        CHECK_THROWS_AS(condition(j, Axis::col, 1), ZeroMassCondition);
        const Pmf c = condition(j, Axis::col, 0);
        CHECK(c[0] == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("pmf construction policy") {
    SUBCASE("tiny drift is renormalized") {
        const Pmf p(space2, {0.5, 0.5 + 5e-10});
        double sum = p[0] + p[1];
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    SUBCASE("large drift is rejected") {
        CHECK_THROWS_AS(Pmf(space2, {0.5, 0.5 + 1e-8}), InvalidDistribution);
    }
    SUBCASE("negative mass is rejected") {
        CHECK_THROWS_AS(Pmf(space2, {1.1, -0.1}), InvalidDistribution);
    }
    SUBCASE("spaces need distinct symbols") {
        CHECK_THROWS_AS(FiniteSpace({"a", "a"}), InvalidDistribution);
    }
}
