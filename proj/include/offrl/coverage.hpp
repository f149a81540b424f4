// Coverage and concentrability quantities: density-ratio C, the refined
// class-relative C-dagger, feature-space relative condition numbers, the
// initial-distribution variant, matrix ranks, prior-averaged (Bayesian)
// versions, and the Gaussian l1-distance bound check.
#pragma once

#include "offrl/priors.hpp"

namespace offrl {

// ---------------------------------------------------------------------------
// Density-ratio concentrability
// ---------------------------------------------------------------------------

/// C = max_{(s,a)} d^{pi}(s,a) / rho(s,a) over the average occupancy of the
/// comparator under the true model. Pairs with d > 0 and rho = 0 give +inf;
/// 0/0 pairs are skipped.
inline prec_t concentrability(const TimePolicy& comparator, const TabularMDP& mdp_true,
                              const OfflineDistribution& rho) {
    check_dims(mdp_true, comparator);
    require(rho.num_states == mdp_true.num_states && rho.num_actions == mdp_true.num_actions,
            "concentrability: rho dimensions differ from the MDP");
    const OccupancyMeasure occ = occupancy(mdp_true, comparator);
    prec_t best = 0;
    for (std::size_t sa = 0; sa < rho.table.size(); ++sa) {
        const prec_t num = occ.average[sa], den = rho.table[sa];
        if (num == 0) continue;
        if (den == 0) return inf();
        best = std::max(best, num / den);
    }
    return best;
}

/// Diagnostic per-(s,a) occupancy/rho ratios: +inf where only rho vanishes,
/// NaN on 0/0 pairs.
inline numvec concentrability_ratio_table(const TimePolicy& comparator, const TabularMDP& mdp_true,
                                          const OfflineDistribution& rho) {
    const OccupancyMeasure occ = occupancy(mdp_true, comparator);
    numvec out(rho.table.size());
    for (std::size_t sa = 0; sa < out.size(); ++sa) {
        const prec_t num = occ.average[sa], den = rho.table[sa];
        out[sa] = den > 0 ? num / den : (num > 0 ? inf() : std::numeric_limits<prec_t>::quiet_NaN());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Class-relative coefficients (refined C-dagger and the d0 variant)
// ---------------------------------------------------------------------------

namespace detail {

/// sum_(s,a) w(s,a) ||p(.|s,a) - q(.|s,a)||_1^2 for flat (s,a) weight tables.
inline prec_t weighted_l1sq(const numvec& p, const numvec& q, const numvec& w, std::size_t S,
                            std::size_t A) {
    prec_t total = 0;
    for (std::size_t sa = 0; sa < S * A; ++sa) {
        if (w[sa] == 0) continue;
        prec_t d = 0;
        for (std::size_t sp = 0; sp < S; ++sp) d += std::abs(p[sa * S + sp] - q[sa * S + sp]);
        total += w[sa] * d * d;
    }
    return total;
}

/// sup over class members of the weighted deviation ratio against the truth.
/// Members with numerator = denominator = 0 are excluded (they contribute
/// nothing to the error path); denominator 0 with numerator > 0 gives +inf;
/// a fully excluded class gives 0.
inline prec_t class_ratio_sup(const FiniteModelClass& cls, const numvec& truth_table,
                              const numvec& num_weights, const numvec& den_weights) {
    prec_t best = 0;
    bool any = false;
    for (std::size_t j = 0; j < cls.size(); ++j) {
        const prec_t num = weighted_l1sq(cls.models[j], truth_table, num_weights, cls.num_states,
                                         cls.num_actions);
        const prec_t den = weighted_l1sq(cls.models[j], truth_table, den_weights, cls.num_states,
                                         cls.num_actions);
        if (den == 0) {
            if (num == 0) continue; // includes the truth itself
            return inf();
        }
        any = true;
        best = std::max(best, num / den);
    }
    return any ? best : 0.0;
}

} // namespace detail

/// C-dagger = sup_{P in M} E_{d^{pi}}||P - P*||_1^2 / E_rho||P - P*||_1^2.
/// Never larger than the density-ratio C (both can be +inf together).
inline prec_t refined_concentrability(const FiniteModelClass& cls, const TimePolicy& comparator,
                                      const TabularMDP& mdp_true, const OfflineDistribution& rho) {
    check_dims(mdp_true, comparator);
    require(cls.num_states == mdp_true.num_states && cls.num_actions == mdp_true.num_actions,
            "refined_concentrability: class and MDP dimensions differ");
    const OccupancyMeasure occ = occupancy(mdp_true, comparator);
    return detail::class_ratio_sup(cls, mdp_true.transition, occ.average, rho.table);
}

/// C_d0 = sup_{P in M} E_{s~d0, a~Unif}||P - P*||_1^2 / E_rho||P - P*||_1^2,
/// with the same exclusion conventions as refined_concentrability.
inline prec_t initial_dist_concentrability(const FiniteModelClass& cls, const TabularMDP& mdp_true,
                                           const OfflineDistribution& rho) {
    require(cls.num_states == mdp_true.num_states && cls.num_actions == mdp_true.num_actions,
            "initial_dist_concentrability: class and MDP dimensions differ");
    const std::size_t S = mdp_true.num_states, A = mdp_true.num_actions;
    numvec w(S * A);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) w[s * A + a] = mdp_true.d0(s) / prec_t(A);
    return detail::class_ratio_sup(cls, mdp_true.transition, w, rho.table);
}

// ---------------------------------------------------------------------------
// Feature-space relative condition number
// ---------------------------------------------------------------------------

/// sup_x x^T Sigma_num x / x^T Sigma_den x with Sigma_w = sum_(s,a) w(s,a)
/// phi(s,a) phi(s,a)^T and ridge added to the denominator. At ridge = 0 the
/// problem is solved on range(Sigma_den) via pseudo-inverse; +inf when the
/// numerator carries mass outside that range.
inline prec_t relative_condition_number(const std::function<Eigen::VectorXd(std::size_t, std::size_t)>& feature,
                                        std::size_t num_states, std::size_t num_actions,
                                        const numvec& dist_num, const numvec& dist_den,
                                        prec_t ridge = 0) {
    require(ridge >= 0, "relative_condition_number: ridge = ", ridge, " must be >= 0");
    require(dist_num.size() == num_states * num_actions && dist_den.size() == dist_num.size(),
            "relative_condition_number: weight tables must have ", num_states * num_actions, " entries");
    const long d = feature(0, 0).size();
    Eigen::MatrixXd sig_num = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd sig_den = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t s = 0; s < num_states; ++s)
        for (std::size_t a = 0; a < num_actions; ++a) {
            const std::size_t sa = s * num_actions + a;
            if (dist_num[sa] == 0 && dist_den[sa] == 0) continue;
            const Eigen::VectorXd phi = feature(s, a);
            require(phi.size() == d, "relative_condition_number: feature dimension changed at (s=", s,
                    ",a=", a, ")");
            const Eigen::MatrixXd outer = phi * phi.transpose();
            if (dist_num[sa] > 0) sig_num.noalias() += dist_num[sa] * outer;
            if (dist_den[sa] > 0) sig_den.noalias() += dist_den[sa] * outer;
        }
    if (ridge > 0) sig_den += ridge * Eigen::MatrixXd::Identity(d, d);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sig_den);
    const prec_t ev_max = es.eigenvalues().maxCoeff();
    const prec_t cut = 1e-12 * std::max<prec_t>(ev_max, 1e-300);
    // basis of range(Sigma_den): columns with eigenvalue above the cut
    std::vector<long> keep;
    for (long i = 0; i < d; ++i)
        if (es.eigenvalues()(i) > cut) keep.push_back(i);

    if (keep.size() < std::size_t(d)) {
        // numerator escapes the range iff some null direction carries mass
        prec_t escape = 0;
        for (long i = 0; i < d; ++i) {
            if (es.eigenvalues()(i) > cut) continue;
            const Eigen::VectorXd v = es.eigenvectors().col(i);
            escape = std::max(escape, v.dot(sig_num * v));
        }
        const prec_t num_scale = std::max<prec_t>(sig_num.norm(), 1.0);
        if (escape > 1e-10 * num_scale) return inf();
    }
    if (keep.empty()) return 0.0; // both matrices vanish

    Eigen::MatrixXd basis(d, long(keep.size()));
    Eigen::VectorXd inv_sqrt(long(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        basis.col(long(k)) = es.eigenvectors().col(keep[k]);
        inv_sqrt(long(k)) = 1.0 / std::sqrt(es.eigenvalues()(keep[k]));
    }
    const Eigen::MatrixXd m = inv_sqrt.asDiagonal() * (basis.transpose() * sig_num * basis)
                              * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m);
    return std::max<prec_t>(0.0, em.eigenvalues().maxCoeff());
}

/// Vector-enumerated convenience form; features indexed s * num_actions + a.
inline prec_t relative_condition_number(const std::vector<Eigen::VectorXd>& features,
                                        std::size_t num_states, std::size_t num_actions,
                                        const numvec& dist_num, const numvec& dist_den,
                                        prec_t ridge = 0) {
    require(features.size() == num_states * num_actions, "relative_condition_number: ", features.size(),
            " features for ", num_states * num_actions, " pairs");
    return relative_condition_number(
        [&](std::size_t s, std::size_t a) { return features[s * num_actions + a]; }, num_states,
        num_actions, dist_num, dist_den, ridge);
}

// ---------------------------------------------------------------------------
// Matrix rank
// ---------------------------------------------------------------------------

/// Rank of a symmetric PSD matrix: eigenvalues above tol times the largest.
/// Rejects matrices with an eigenvalue below -1e-10.
inline std::size_t numerical_rank(const Eigen::MatrixXd& m, prec_t tol = 1e-9) {
    require(m.rows() == m.cols(), "numerical_rank: matrix is ", m.rows(), "x", m.cols(), ", not square");
    require(m.isApprox(m.transpose(), 1e-10), "numerical_rank: matrix is not symmetric");
    require(tol > 0, "numerical_rank: tol must be > 0");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    require(es.eigenvalues().minCoeff() >= -1e-10, "numerical_rank: eigenvalue ",
            es.eigenvalues().minCoeff(), " < -1e-10, matrix is not PSD");
    const prec_t top = es.eigenvalues().maxCoeff();
    if (top <= 0) return 0;
    std::size_t rank = 0;
    for (long i = 0; i < m.rows(); ++i)
        if (es.eigenvalues()(i) > tol * top) ++rank;
    return rank;
}

/// Feature second-moment matrix Sigma_w = sum_(s,a) w(s,a) phi phi^T.
inline Eigen::MatrixXd feature_second_moment(const std::vector<Eigen::VectorXd>& features,
                                             const numvec& weights) {
    require(features.size() == weights.size(), "feature_second_moment: ", features.size(),
            " features vs ", weights.size(), " weights");
    require(!features.empty(), "feature_second_moment: no features");
    const long d = features[0].size();
    Eigen::MatrixXd sig = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < features.size(); ++i)
        if (weights[i] != 0) sig.noalias() += weights[i] * features[i] * features[i].transpose();
    return sig;
}

// ---------------------------------------------------------------------------
// Aggregate report
// ---------------------------------------------------------------------------

/// All coverage quantities for one (class, comparator, truth, rho) scenario.
/// rel_cond_number defaults to the one-hot feature embedding, under which it
/// reduces to the density ratio restricted to rho's support.
struct CoverageReport {
    prec_t density_ratio_C = 0;
    prec_t refined_C_dagger = 0;
    prec_t rel_cond_number = 0;
    prec_t C_d0 = 0;
    std::size_t rank_sigma_rho = 0;
    numvec ratio_table; ///< per-(s,a) occupancy/rho; +inf and NaN as in concentrability_ratio_table
};

inline CoverageReport make_coverage_report(const FiniteModelClass& cls, const TimePolicy& comparator,
                                           const TabularMDP& mdp_true, const OfflineDistribution& rho) {
    const std::size_t S = mdp_true.num_states, A = mdp_true.num_actions;
    const OneHotFeature onehot = knr_one_hot_embedding(S, A);
    std::vector<Eigen::VectorXd> features;
    features.reserve(S * A);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) features.push_back(onehot(s, a));

    CoverageReport rep;
    rep.density_ratio_C = concentrability(comparator, mdp_true, rho);
    rep.refined_C_dagger = refined_concentrability(cls, comparator, mdp_true, rho);
    rep.C_d0 = initial_dist_concentrability(cls, mdp_true, rho);
    const OccupancyMeasure occ = occupancy(mdp_true, comparator);
    rep.rel_cond_number = relative_condition_number(features, S, A, occ.average, rho.table);
    rep.rank_sigma_rho = numerical_rank(feature_second_moment(features, rho.table));
    rep.ratio_table = concentrability_ratio_table(comparator, mdp_true, rho);
    return rep;
}

// ---------------------------------------------------------------------------
// Bayesian (prior-averaged) coverage
// ---------------------------------------------------------------------------

/// Per-draw coverage of P* ~ prior against its own optimal comparator.
/// C-dagger and C_d0 need a model class, so they are reported only for
/// discrete priors (empty vectors otherwise). Draws can be +inf; means then
/// propagate +inf.
struct BayesianCoverageReport {
    numvec c_draws;
    numvec c_dagger_draws;
    numvec c_d0_draws;
    prec_t mean_c = 0, se_c = 0;
    prec_t mean_c_dagger = 0, se_c_dagger = 0;
    prec_t mean_c_d0 = 0, se_c_d0 = 0;
};

namespace detail {

inline std::pair<prec_t, prec_t> mean_and_se(const numvec& xs) {
    prec_t mean = 0;
    for (prec_t x : xs) mean += x;
    mean /= prec_t(xs.size());
    if (!std::isfinite(mean)) return {mean, std::numeric_limits<prec_t>::quiet_NaN()};
    prec_t var = 0;
    for (prec_t x : xs) var += (x - mean) * (x - mean);
    var /= prec_t(xs.size() > 1 ? xs.size() - 1 : 1);
    return {mean, std::sqrt(var / prec_t(xs.size()))};
}

} // namespace detail

/// Monte Carlo over P* ~ prior: plan the per-draw optimal comparator, then
/// compute the coverage quantities against the fixed rho. Deterministic in
/// seed; a degenerate discrete prior reproduces the frequentist values.
inline BayesianCoverageReport bayesian_coverage(const ModelPrior& prior, const SharedEnv& env,
                                                const OfflineDistribution& rho, std::size_t num_samples,
                                                std::uint64_t seed) {
    require(num_samples >= 10, "bayesian_coverage: num_samples = ", num_samples, " must be >= 10");
    require(prior.family != PriorFamily::matrix_normal,
            "bayesian_coverage: matrix-normal priors have no tabular comparator");
    BayesianCoverageReport rep;
    for (std::size_t i = 0; i < num_samples; ++i) {
        std::mt19937_64 rng = make_rng(seed, 0xbc0 + i);
        const SampledModel draw = posterior_sample(prior, rng);
        const TabularMDP mdp = make_mdp(env, draw.transition);
        const TimePolicy comparator = plan_optimal(mdp).first;
        rep.c_draws.push_back(concentrability(comparator, mdp, rho));
        if (prior.family == PriorFamily::discrete) {
            rep.c_dagger_draws.push_back(
                refined_concentrability(prior.model_class, comparator, mdp, rho));
            rep.c_d0_draws.push_back(initial_dist_concentrability(prior.model_class, mdp, rho));
        }
    }
    std::tie(rep.mean_c, rep.se_c) = detail::mean_and_se(rep.c_draws);
    if (!rep.c_dagger_draws.empty()) {
        std::tie(rep.mean_c_dagger, rep.se_c_dagger) = detail::mean_and_se(rep.c_dagger_draws);
        std::tie(rep.mean_c_d0, rep.se_c_d0) = detail::mean_and_se(rep.c_d0_draws);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Gaussian l1 bound check
// ---------------------------------------------------------------------------

/// Numerically integrated l1 distance between N(mu1, zeta^2 I) and
/// N(mu2, zeta^2 I) next to the bound ||mu1 - mu2||_2 / zeta.
struct GaussianL1Check {
    prec_t l1 = 0;
    prec_t bound = 0;
};

namespace detail {

/// Trapezoid refinement to relative tolerance 1e-6 (halving the step reuses
/// previous evaluations).
template <typename F>
prec_t adaptive_trapezoid_1d(const F& f, prec_t lo, prec_t hi, std::size_t init_points) {
    std::size_t n = std::max<std::size_t>(init_points, 9) - 1; // intervals
    prec_t h = (hi - lo) / prec_t(n);
    prec_t sum = 0.5 * (f(lo) + f(hi));
    for (std::size_t i = 1; i < n; ++i) sum += f(lo + prec_t(i) * h);
    prec_t integral = sum * h;
    for (int round = 0; round < 24; ++round) {
        prec_t mid_sum = 0;
        for (std::size_t i = 0; i < n; ++i) mid_sum += f(lo + (prec_t(i) + 0.5) * h);
        sum += mid_sum;
        n *= 2;
        h *= 0.5;
        const prec_t next = sum * h;
        const prec_t change = std::abs(next - integral);
        integral = next;
        if (change <= 1e-6 * std::max<prec_t>(std::abs(integral), 1e-12)) break;
    }
    return integral;
}

} // namespace detail

/// Integration domain is [mu - 8 zeta, mu + 8 zeta] per axis (mass outside is
/// negligible at the 1e-6 tolerance); dimensions above 2 are rejected.
inline GaussianL1Check gaussian_l1_bound_check(const numvec& mu1, const numvec& mu2, prec_t zeta,
                                               std::size_t grid = 129) {
    require(mu1.size() == mu2.size(), "gaussian_l1_bound_check: mean dimensions differ");
    require(mu1.size() == 1 || mu1.size() == 2, "gaussian_l1_bound_check: dimension ", mu1.size(),
            " not supported, numerical integration is limited to 1 or 2");
    require(zeta > 0, "gaussian_l1_bound_check: zeta must be > 0");

    GaussianL1Check out;
    prec_t diff2 = 0;
    for (std::size_t k = 0; k < mu1.size(); ++k) diff2 += (mu1[k] - mu2[k]) * (mu1[k] - mu2[k]);
    out.bound = std::sqrt(diff2) / zeta;

    const prec_t norm1 = 1.0 / (zeta * std::sqrt(2.0 * M_PI));
    auto pdf1 = [&](prec_t x, prec_t mu) {
        const prec_t z = (x - mu) / zeta;
        return norm1 * std::exp(-0.5 * z * z);
    };
    if (mu1.size() == 1) {
        const prec_t lo = std::min(mu1[0], mu2[0]) - 8 * zeta, hi = std::max(mu1[0], mu2[0]) + 8 * zeta;
        out.l1 = detail::adaptive_trapezoid_1d(
            [&](prec_t x) { return std::abs(pdf1(x, mu1[0]) - pdf1(x, mu2[0])); }, lo, hi, grid);
        return out;
    }
    // 2-D: outer adaptive pass over x with an inner adaptive pass over y
    const prec_t lx = std::min(mu1[0], mu2[0]) - 8 * zeta, hx = std::max(mu1[0], mu2[0]) + 8 * zeta;
    const prec_t ly = std::min(mu1[1], mu2[1]) - 8 * zeta, hy = std::max(mu1[1], mu2[1]) + 8 * zeta;
    out.l1 = detail::adaptive_trapezoid_1d(
        [&](prec_t x) {
            return detail::adaptive_trapezoid_1d(
                [&](prec_t y) {
                    return std::abs(pdf1(x, mu1[0]) * pdf1(y, mu1[1])
                                    - pdf1(x, mu2[0]) * pdf1(y, mu2[1]));
                },
                ly, hy, grid);
        },
        lx, hx, grid);
    return out;
}

} // namespace offrl
