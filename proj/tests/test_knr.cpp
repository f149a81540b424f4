// Kernelized nonlinear regulator path: ridge fitting, confidence balls,
// information gain, matrix-normal conjugacy, and the sampled robust planner.
#include <catch2/catch_amalgamated.hpp>

#include <offrl/cppo.hpp>
#include <offrl/model_zoo.hpp>
#include <offrl/priors.hpp>

#include <cmath>

using namespace offrl;

TEST_CASE("knr information gain grows with data and stays finite", "[knr]") {
    const KNRScenario sc = make_knr_scenario(1, 3, 4, 2, 2, 5, 0.5);
    const auto [phis_small, nexts_small] = sample_knr_transitions(sc, 50, 3);
    const auto [phis_big, nexts_big] = sample_knr_transitions(sc, 500, 3);
    const prec_t lambda = 1.0;
    const KnrRidge small = ridge_mle_knr(phis_small, nexts_small, lambda);
    const KnrRidge big = ridge_mle_knr(phis_big, nexts_big, lambda);
    const prec_t gain_small = knr_info_gain(small.Sigma_n, lambda);
    const prec_t gain_big = knr_info_gain(big.Sigma_n, lambda);
    REQUIRE(gain_small >= 0.0);
    REQUIRE(gain_big > gain_small);
    (void)nexts_big;
}

TEST_CASE("knr confidence radius formula", "[knr]") {
    // xi = sqrt(2 lambda w^2 + 8 zeta^2 (d_S ln 5 + ln(1/delta) + info)).
    const prec_t lambda = 2.0, w = 1.5, zeta = 0.7;
    const std::size_t d_s = 3;
    const prec_t delta = 0.1, info = 4.2;
    const prec_t expect = std::sqrt(2 * lambda * w * w +
                                    8 * zeta * zeta *
                                        (prec_t(d_s) * std::log(5.0) + std::log(1 / delta) + info));
    REQUIRE(knr_confidence_radius(lambda, w, zeta, d_s, delta, info) ==
            Catch::Approx(expect).margin(1e-12));
    // Monotone in every widening direction.
    REQUIRE(knr_confidence_radius(lambda, w, zeta, d_s, delta / 10, info) > expect);
    REQUIRE(knr_confidence_radius(lambda, w, zeta, d_s, delta, info + 1) > expect);
}

TEST_CASE("knr ball distance is the weighted spectral norm", "[knr]") {
    Eigen::MatrixXd w_hat(2, 3), w(2, 3);
    w_hat << 1, 0, 0, 0, 1, 0;
    w << 0.5, 0, 0, 0, 1, 0.5;
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(3, 3) * 4.0;
    // ||(W_hat - W) Sigma^{1/2}||_2 = 2 * ||W_hat - W||_2.
    const Eigen::MatrixXd diff = w_hat - w;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff);
    REQUIRE(knr_ball_distance(w_hat, w, sigma) ==
            Catch::Approx(2.0 * svd.singularValues()[0]).margin(1e-12));
}

TEST_CASE("calibrated knr ball captures the true matrix", "[knr]") {
    const KNRScenario sc = make_knr_scenario(5, 3, 4, 2, 2, 5, 0.5);
    const prec_t lambda = 1.0, delta = 0.1;
    const prec_t w_norm_bound = std::max(1.0, sc.model.W.operatorNorm());
    int captured = 0;
    const int trials = 40;
    for (int t = 0; t < trials; ++t) {
        const auto [phis, nexts] = sample_knr_transitions(sc, 400, 100 + std::uint64_t(t));
        const KnrRidge fit = ridge_mle_knr(phis, nexts, lambda);
        const prec_t info = knr_info_gain(fit.Sigma_n, lambda);
        const prec_t radius = knr_confidence_radius(lambda, w_norm_bound, sc.model.noise_sigma,
                                                    3, delta, info);
        const Eigen::MatrixXd reg =
            fit.Sigma_n + lambda * Eigen::MatrixXd::Identity(fit.Sigma_n.rows(), fit.Sigma_n.cols());
        if (knr_ball_distance(fit.W_hat, sc.model.W, reg) <= radius) ++captured;
    }
    REQUIRE(captured >= 36); // 1 - delta with sampling slack
}

TEST_CASE("matrix-normal posterior mean equals the ridge fit", "[knr]") {
    const KNRScenario sc = make_knr_scenario(7, 2, 3, 2, 2, 4, 0.6);
    const auto [phis, nexts] = sample_knr_transitions(sc, 120, 9);
    const prec_t lambda = 0.8;
    const KnrRidge fit = ridge_mle_knr(phis, nexts, lambda);

    const ModelPrior prior =
        ModelPrior::matrix_normal(Eigen::MatrixXd::Zero(2, 3), sc.model.noise_sigma, lambda);
    const ModelPosterior post = posterior_update(prior, phis, nexts, "knr");
    REQUIRE((post.params.mean_w() - fit.W_hat).norm() <= 1e-8);

    // Samples scatter around the mean and are reproducible by seed.
    std::mt19937_64 r1 = make_rng(11, 0x5a), r2 = make_rng(11, 0x5a);
    const SampledModel a = posterior_sample(post, r1);
    const SampledModel b = posterior_sample(post, r2);
    REQUIRE(a.W == b.W);
    REQUIRE(a.member_index == -1);
}

TEST_CASE("sampled robust knr planner picks the best worst-case candidate", "[knr]") {
    const KNRScenario sc = make_knr_scenario(13, 2, 3, 2, 3, 4, 0.4);
    const auto [phis, nexts] = sample_knr_transitions(sc, 300, 15);
    const prec_t lambda = 1.0;
    const KnrRidge fit = ridge_mle_knr(phis, nexts, lambda);
    const prec_t info = knr_info_gain(fit.Sigma_n, lambda);
    const prec_t xi = knr_confidence_radius(lambda, std::max(1.0, sc.model.W.operatorNorm()),
                                            sc.model.noise_sigma, 2, 0.1, info);

    const KnrCppoResult res = knr_cppo(sc, fit, lambda, xi, 24, 96, 17);
    REQUIRE(res.policy_index < sc.candidate_policies.size());
    REQUIRE(res.per_policy_values.size() == sc.candidate_policies.size());
    // The returned policy attains the max of the per-policy worst-case scores.
    prec_t best = -inf();
    for (prec_t v : res.per_policy_values) best = std::max(best, v);
    REQUIRE(res.pessimistic_value == Catch::Approx(best).margin(1e-12));
    REQUIRE(res.pessimistic_value ==
            Catch::Approx(res.per_policy_values[res.policy_index]).margin(1e-12));

    // Same seed reproduces the whole report.
    const KnrCppoResult res2 = knr_cppo(sc, fit, lambda, xi, 24, 96, 17);
    REQUIRE(res.per_policy_values == res2.per_policy_values);
    REQUIRE(res.policy_index == res2.policy_index);
}
