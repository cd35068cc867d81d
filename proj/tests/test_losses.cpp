#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "recalign/losses.hpp"
#include "recalign/rng.hpp"

using namespace recalign;
using namespace recalign::losses;

namespace {

nn::NetworkSpec mlp(std::vector<std::size_t> widths, nn::Activation act,
                    nn::Activation last = nn::Activation::identity) {
    nn::NetworkSpec spec;
    spec.widths = std::move(widths);
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l)
        spec.acts.push_back(l + 2 == spec.widths.size() ? last : act);
    return spec;
}

// Identity network: widths [d, d], identity activation, W = I, b = 0.
std::pair<nn::NetworkSpec, nn::ParamSet> identity_net(std::size_t d, const std::string& name) {
    nn::NetworkSpec spec = mlp({d, d}, nn::Activation::identity);
    nn::ParamSet params = nn::init_params(spec, 0, name);
    auto& w = params.find(name + ".W0").value;
    w.fill(0.0);
    for (std::size_t i = 0; i < d; ++i) w(i, i) = 1.0;
    return {spec, std::move(params)};
}

Mat random_mat(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    Mat m(r, c);
    for (double& v : m.v) v = scale * (2.0 * rng.next_unit() - 1.0);
    return m;
}

std::vector<EnvBatch> random_batches(Rng& rng, std::size_t envs, std::size_t n, std::size_t d) {
    std::vector<EnvBatch> batches;
    for (std::size_t e = 0; e < envs; ++e) {
        EnvBatch b;
        b.env_id = static_cast<int>(e) + 1;
        b.inputs = random_mat(rng, n, d);
        b.labels.resize(n);
        for (auto& y : b.labels) y = static_cast<int>(rng.next_index(2));
        batches.push_back(std::move(b));
    }
    return batches;
}

// Naive O(n^2) double-loop MMD oracle.
double naive_mmd(const Mat& a, const Mat& b, const std::vector<double>& sigmas) {
    auto k = [&](const Mat& m1, std::size_t i, const Mat& m2, std::size_t j, double s) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < m1.cols; ++c) {
            const double d = m1(i, c) - m2(j, c);
            d2 += d * d;
        }
        return std::exp(-d2 / (2.0 * s * s));
    };
    double total = 0.0;
    for (double s : sigmas) {
        double kaa = 0.0, kbb = 0.0, kab = 0.0;
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t j = 0; j < a.rows; ++j) kaa += k(a, i, a, j, s);
        for (std::size_t i = 0; i < b.rows; ++i)
            for (std::size_t j = 0; j < b.rows; ++j) kbb += k(b, i, b, j, s);
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t j = 0; j < b.rows; ++j) kab += k(a, i, b, j, s);
        total += kaa / (a.rows * a.rows) + kbb / (b.rows * b.rows) - 2.0 * kab / (a.rows * b.rows);
    }
    return total;
}

double eval_mmd(const Mat& a, const Mat& b, const std::vector<double>& sigmas) {
    ad::Tape tape;
    return mmd_rbf(tape, tape.constant(a), tape.constant(b), sigmas).scalar();
}

double eval_coral(const Mat& a, const Mat& b) {
    ad::Tape tape;
    return coral(tape, tape.constant(a), tape.constant(b)).scalar();
}

} // namespace

TEST_CASE("empirical risk") {
    auto [enc_spec, enc_params] = identity_net(2, "enc");
    auto [cls_spec, cls_params] = identity_net(2, "cls");

    SUBCASE("uniform logits over two classes in two environments") {
        std::vector<EnvBatch> batches;
        for (int e = 1; e <= 2; ++e) {
            EnvBatch b;
            b.env_id = e;
            b.inputs = Mat(3, 2, 0.0); // identity nets: logits all zero
            b.labels = {0, 1, 0};
            batches.push_back(std::move(b));
        }
        ad::Tape tape;
        auto enc = nn::register_network(tape, enc_spec, enc_params);
        auto cls = nn::register_network(tape, cls_spec, cls_params);
        const double risk = empirical_risk(tape, batches, enc, cls).scalar();
        CHECK(risk == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("confident correct logits give near-zero risk") {
        EnvBatch b;
        b.env_id = 1;
        b.inputs = Mat::from_rows({{40.0, -40.0}, {-40.0, 40.0}});
        b.labels = {0, 1};
        ad::Tape tape;
        auto enc = nn::register_network(tape, enc_spec, enc_params);
        auto cls = nn::register_network(tape, cls_spec, cls_params);
        CHECK(empirical_risk(tape, {b}, enc, cls).scalar() < 1e-12);
    }
    SUBCASE("hand two-sample batch") {
        EnvBatch b;
        b.env_id = 1;
        b.inputs = Mat::from_rows({{1.0, -1.0}, {0.5, 0.5}});
        b.labels = {0, 1};
        ad::Tape tape;
        auto enc = nn::register_network(tape, enc_spec, enc_params);
        auto cls = nn::register_network(tape, cls_spec, cls_params);
        const double expected =
            0.5 * (std::log(1.0 + std::exp(-2.0)) + std::log(2.0)); // manual softmax
        CHECK(empirical_risk(tape, {b}, enc, cls).scalar() ==
              doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("no environments is an error") {
        ad::Tape tape;
        auto enc = nn::register_network(tape, enc_spec, enc_params);
        auto cls = nn::register_network(tape, cls_spec, cls_params);
        CHECK_THROWS_AS(empirical_risk(tape, {}, enc, cls), EmptyBatch);
    }
}

TEST_CASE("mmd rbf") {
    Rng rng(41);
    SUBCASE("identical batches vanish") {
        const Mat a = random_mat(rng, 5, 3);
        CHECK(std::abs(eval_mmd(a, a, {0.7, 1.3})) <= 1e-12);
    }
    SUBCASE("two single points, one bandwidth: closed form") {
        const Mat a = Mat::from_rows({{0.0, 0.0}});
        const Mat b = Mat::from_rows({{1.0, 2.0}});
        const double sigma = 0.9;
        const double expected = 2.0 - 2.0 * std::exp(-5.0 / (2.0 * sigma * sigma));
        CHECK(eval_mmd(a, b, {sigma}) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("random batches match the double-loop oracle") {
        for (int trial = 0; trial < 20; ++trial) {
            const Mat a = random_mat(rng, 4, 2);
            const Mat b = random_mat(rng, 4, 2);
            const std::vector<double> sigmas = {0.5, 1.0, 2.0};
            CHECK(std::abs(eval_mmd(a, b, sigmas) - naive_mmd(a, b, sigmas)) < 1e-10);
        }
    }
    SUBCASE("symmetry and row-permutation invariance") {
        const Mat a = random_mat(rng, 5, 3);
        const Mat b = random_mat(rng, 6, 3);
        const std::vector<double> sigmas = {1.0};
        CHECK(std::abs(eval_mmd(a, b, sigmas) - eval_mmd(b, a, sigmas)) < 1e-12);
        Mat shuffled = a;
        for (std::size_t c = 0; c < a.cols; ++c) {
            std::swap(shuffled(0, c), shuffled(3, c));
            std::swap(shuffled(1, c), shuffled(4, c));
        }
        CHECK(std::abs(eval_mmd(a, b, sigmas) - eval_mmd(shuffled, b, sigmas)) < 1e-10);
    }
    SUBCASE("nonnegative on random inputs") {
        for (int trial = 0; trial < 50; ++trial) {
            const Mat a = random_mat(rng, 3, 2);
            const Mat b = random_mat(rng, 5, 2);
            CHECK(eval_mmd(a, b, {0.8}) >= -1e-12);
        }
    }
}

TEST_CASE("median heuristic bandwidths") {
    const Mat pooled = Mat::from_rows({{0.0, 0.0}, {3.0, 4.0}}); // distance 5
    const auto bw = median_heuristic_bandwidths(pooled);
    REQUIRE(bw.size() == 3);
    CHECK(bw[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(bw[1] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(bw[2] == doctest::Approx(10.0).epsilon(1e-12));
    // Degenerate pooled batch falls back to sigma = 1.
    const auto fallback = median_heuristic_bandwidths(Mat(3, 2, 0.0));
    CHECK(fallback[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coral") {
    Rng rng(42);
    SUBCASE("identical batches give exactly zero") {
        const Mat a = random_mat(rng, 4, 3);
        CHECK(eval_coral(a, a) == 0.0);
    }
    SUBCASE("mean shift moves only the mean term") {
        const Mat a = random_mat(rng, 6, 2);
        Mat b = a;
        const std::vector<double> v = {0.7, -0.4};
        for (std::size_t i = 0; i < b.rows; ++i)
            for (std::size_t c = 0; c < 2; ++c) b(i, c) += v[c];
        const double vnorm2 = v[0] * v[0] + v[1] * v[1];
        CHECK(eval_coral(a, b) == doctest::Approx(vnorm2).epsilon(1e-10));
    }
    SUBCASE("hand 3x2 batches match hand covariance arithmetic") {
        const Mat a = Mat::from_rows({{1.0, 0.0}, {-1.0, 0.0}, {0.0, 0.0}});
        const Mat b = Mat::from_rows({{0.0, 2.0}, {0.0, -2.0}, {0.0, 0.0}});
        // means are zero; cov_a = [[1,0],[0,0]], cov_b = [[0,0],[0,4]]
        const double expected = (1.0 * 1.0 + 4.0 * 4.0) / (4.0 * 2.0 * 2.0);
        CHECK(eval_coral(a, b) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("single-row batches are rejected") {
        ad::Tape tape;
        ad::Tensor a = tape.constant(random_mat(rng, 1, 2));
        ad::Tensor b = tape.constant(random_mat(rng, 3, 2));
        CHECK_THROWS_AS(coral(tape, a, b), BatchTooSmall);
    }
    SUBCASE("row-permutation invariance") {
        const Mat a = random_mat(rng, 5, 2);
        const Mat b = random_mat(rng, 5, 2);
        Mat shuffled = a;
        for (std::size_t c = 0; c < a.cols; ++c) std::swap(shuffled(0, c), shuffled(4, c));
        CHECK(std::abs(eval_coral(a, b) - eval_coral(shuffled, b)) < 1e-10);
    }
}

TEST_CASE("irm penalty") {
    SUBCASE("uniform logits with balanced labels sit at the dummy optimum") {
        ad::Tape tape;
        ad::Tensor logits = tape.constant(Mat(4, 2, 0.0));
        const double pen = irm_penalty(tape, {logits}, {{0, 1, 0, 1}}).scalar();
        CHECK(pen == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("hand two-sample case matches a scalar finite difference") {
        const Mat logits_m = Mat::from_rows({{1.2, -0.3}, {-0.5, 0.8}});
        const std::vector<int> labels = {0, 0};
        ad::Tape tape;
        const double pen =
            irm_penalty(tape, {tape.constant(logits_m)}, {labels}).scalar();

        // risk(w) by direct evaluation, differentiated numerically in w.
        auto risk_at = [&](double w) {
            double total = 0.0;
            for (std::size_t i = 0; i < 2; ++i) {
                const double l0 = w * logits_m(i, 0), l1 = w * logits_m(i, 1);
                const double mx = std::max(l0, l1);
                const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
                total += lse - (labels[i] == 0 ? l0 : l1);
            }
            return total / 2.0;
        };
        const double h = 1e-6;
        const double dw = (risk_at(1.0 + h) - risk_at(1.0 - h)) / (2.0 * h);
        CHECK(pen == doctest::Approx(dw * dw).epsilon(1e-6));
    }
    SUBCASE("two identical environments double the penalty") {
        const Mat logits_m = Mat::from_rows({{0.9, -0.2}, {-0.1, 0.4}});
        const std::vector<int> labels = {1, 0};
        ad::Tape tape;
        ad::Tensor l1 = tape.constant(logits_m);
        ad::Tensor l2 = tape.constant(logits_m);
        const double one = irm_penalty(tape, {l1}, {labels}).scalar();
        const double two = irm_penalty(tape, {l1, l2}, {labels, labels}).scalar();
        CHECK(two == doctest::Approx(2.0 * one).epsilon(1e-12));
    }
}

TEST_CASE("reconstruction term") {
    Rng rng(43);
    SUBCASE("identity encoder and decoder reconstruct exactly") {
        auto [enc_spec, enc_params] = identity_net(3, "enc");
        auto [dec_spec, dec_params] = identity_net(3, "dec");
        std::vector<EnvBatch> batches = random_batches(rng, 2, 4, 3);
        ad::Tape tape;
        auto enc = nn::register_network(tape, enc_spec, enc_params);
        auto dec = nn::register_network(tape, dec_spec, dec_params);
        CHECK(reconstruction_term(tape, batches, enc, dec).scalar() == 0.0);
    }
    SUBCASE("zero decoder output leaves the squared input norms") {
        auto [enc_spec, enc_params] = identity_net(2, "enc");
        auto [dec_spec, dec_params] = identity_net(2, "dec");
        dec_params.find("dec.W0").value.fill(0.0);
        EnvBatch b;
        b.env_id = 1;
        b.inputs = Mat::from_rows({{1.0, 2.0}, {3.0, 0.0}});
        b.labels = {0, 1};
        ad::Tape tape;
        auto enc = nn::register_network(tape, enc_spec, enc_params);
        auto dec = nn::register_network(tape, dec_spec, dec_params);
        const double expected = ((1.0 + 4.0) + 9.0) / 2.0;
        CHECK(reconstruction_term(tape, {b}, enc, dec).scalar() ==
              doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("width mismatch is rejected") {
        auto [enc_spec, enc_params] = identity_net(2, "enc");
        nn::NetworkSpec bad = mlp({2, 3}, nn::Activation::identity);
        nn::ParamSet bad_params = nn::init_params(bad, 1, "dec");
        EnvBatch b;
        b.env_id = 1;
        b.inputs = Mat(2, 2, 0.5);
        b.labels = {0, 1};
        ad::Tape tape;
        auto enc = nn::register_network(tape, enc_spec, enc_params);
        auto dec = nn::register_network(tape, bad, bad_params);
        CHECK_THROWS_AS(reconstruction_term(tape, {b}, enc, dec), ShapeMismatch);
    }
}

TEST_CASE("composite objective") {
    Rng rng(44);
    const nn::NetworkSpec enc_spec = mlp({3, 4}, nn::Activation::tanh);
    const nn::NetworkSpec cls_spec = mlp({4, 2}, nn::Activation::identity);
    const nn::NetworkSpec dec_spec = mlp({4, 3}, nn::Activation::identity);
    nn::ParamSet enc_params = nn::init_params(enc_spec, 1, "enc");
    nn::ParamSet cls_params = nn::init_params(cls_spec, 2, "cls");
    nn::ParamSet dec_params = nn::init_params(dec_spec, 3, "dec");
    const std::vector<EnvBatch> batches = random_batches(rng, 2, 5, 3);

    auto eval = [&](const ObjectiveConfig& cfg, ObjectiveBreakdown* bd) {
        ad::Tape tape;
        auto enc = nn::register_network(tape, enc_spec, enc_params);
        auto cls = nn::register_network(tape, cls_spec, cls_params);
        auto dec = nn::register_network(tape, dec_spec, dec_params);
        return composite_objective(tape, cfg, batches, enc, cls, &dec, bd).scalar();
    };

    SUBCASE("alpha = beta = 0 equals the bare risk") {
        ObjectiveConfig cfg;
        cfg.discrepancy = DiscrepancyKind::mmd;
        cfg.reconstruction = true;
        ObjectiveBreakdown bd{};
        const double total = eval(cfg, &bd);
        CHECK(std::abs(total - bd.risk) <= 1e-12);

        ObjectiveConfig erm; // none + no reconstruction
        ObjectiveBreakdown bd2{};
        CHECK(std::abs(eval(erm, &bd2) - bd.risk) <= 1e-12);
    }
    SUBCASE("breakdown recombines to the total") {
        for (DiscrepancyKind kind : {DiscrepancyKind::mmd, DiscrepancyKind::coral,
                                     DiscrepancyKind::irm, DiscrepancyKind::irm_mmd}) {
            ObjectiveConfig cfg;
            cfg.alpha = 1.0;
            cfg.beta = 1.0;
            cfg.discrepancy = kind;
            cfg.reconstruction = true;
            ObjectiveBreakdown bd{};
            const double total = eval(cfg, &bd);
            CHECK(std::abs(total - (bd.risk + bd.discrepancy + bd.reconstruction)) <= 1e-12);
        }
    }
    SUBCASE("linear in alpha and beta by collinearity") {
        ObjectiveConfig cfg;
        cfg.discrepancy = DiscrepancyKind::coral;
        cfg.reconstruction = true;
        auto at = [&](double a, double b) {
            ObjectiveConfig c = cfg;
            c.alpha = a;
            c.beta = b;
            return eval(c, nullptr);
        };
        const double a1 = at(0.5, 0.3), a2 = at(1.0, 0.3), a3 = at(1.5, 0.3);
        CHECK(std::abs(a2 - 0.5 * (a1 + a3)) < 1e-10);
        const double b1 = at(0.7, 0.2), b2 = at(0.7, 0.6), b3 = at(0.7, 1.0);
        CHECK(std::abs(b2 - 0.5 * (b1 + b3)) < 1e-10);
    }
    SUBCASE("reconstruction without a decoder is rejected") {
        ObjectiveConfig cfg;
        cfg.reconstruction = true;
        ad::Tape tape;
        auto enc = nn::register_network(tape, enc_spec, enc_params);
        auto cls = nn::register_network(tape, cls_spec, cls_params);
        CHECK_THROWS_AS(composite_objective(tape, cfg, batches, enc, cls, nullptr, nullptr),
                        ShapeMismatch);
    }
}

TEST_CASE("every loss gradient passes finite differences") {
    Rng rng(45);
    const nn::NetworkSpec enc_spec = mlp({3, 4}, nn::Activation::tanh);
    const nn::NetworkSpec cls_spec = mlp({4, 2}, nn::Activation::identity);
    const nn::NetworkSpec dec_spec = mlp({4, 3}, nn::Activation::tanh);
    nn::ParamSet enc_params = nn::init_params(enc_spec, 6, "enc");
    nn::ParamSet cls_params = nn::init_params(cls_spec, 7, "cls");
    nn::ParamSet dec_params = nn::init_params(dec_spec, 8, "dec");
    const std::vector<EnvBatch> batches = random_batches(rng, 2, 4, 3);

    auto check_cfg = [&](const ObjectiveConfig& cfg) {
        nn::LossFn loss = [&](bool grads, double* kink) {
            ad::Tape tape;
            auto enc = nn::register_network(tape, enc_spec, enc_params);
            auto cls = nn::register_network(tape, cls_spec, cls_params);
            auto dec = nn::register_network(tape, dec_spec, dec_params);
            ad::Tensor total =
                composite_objective(tape, cfg, batches, enc, cls, &dec, nullptr);
            if (grads) {
                tape.backward(total);
                nn::read_gradients(enc, enc_params);
                nn::read_gradients(cls, cls_params);
                nn::read_gradients(dec, dec_params);
            }
            if (kink != nullptr) *kink = tape.min_abs_relu_input();
            return total.scalar();
        };
        const nn::FdReport report = nn::finite_difference_check(
            {&enc_params, &cls_params, &dec_params}, loss, 1e-5, 1e-4);
        CHECK(report.pass);
        return report.max_rel_err;
    };

    ObjectiveConfig erm; // plain risk
    check_cfg(erm);

    for (DiscrepancyKind kind : {DiscrepancyKind::mmd, DiscrepancyKind::coral,
                                 DiscrepancyKind::irm, DiscrepancyKind::irm_mmd}) {
        ObjectiveConfig cfg;
        cfg.alpha = 0.7;
        cfg.beta = 0.4;
        cfg.discrepancy = kind;
        cfg.reconstruction = true;
        // Fixed bandwidths keep the objective differentiable end to end;
        // the recomputed median heuristic is intentionally not part of the
        // gradient.
        cfg.mmd_bandwidths = {0.8, 1.6};
        check_cfg(cfg);
    }
}
