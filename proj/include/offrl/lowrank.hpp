// Low-rank representation-learning pathway: joint MLE over finite factor
// classes and the diagnostics connecting the realized CPPO gap to coverage
// quantities computed under the true (never the learned) feature map.
#pragma once

#include "offrl/pspo.hpp"

namespace offrl {

/// Result of the joint factor MLE.
struct LowRankFit {
    std::size_t chosen_mu_index = 0;
    std::size_t chosen_phi_index = 0;
    numvec transition; ///< table implied by the chosen pair
    prec_t loglik = -inf();
};

/// Exhaustive likelihood scan over the valid (mu, phi) pairs. The finite-
/// state normalizer sum_s' mu(s')^T phi(s,a) is computed explicitly; for
/// pairs that passed the validity filter it equals 1, so its log contributes
/// nothing. Ties resolve to the lexicographically first pair.
inline LowRankFit mle_low_rank(const LowRankModelClass& cls, const TransitionCounts& counts) {
    require(!cls.valid_pairs.empty(), "mle_low_rank: no valid (mu,phi) pairs in the class");
    require(counts.n > 0, "mle_low_rank: empty dataset");
    require(counts.num_states == cls.num_states && counts.num_actions == cls.num_actions,
            "mle_low_rank: counts are over ", counts.num_states, "x", counts.num_actions,
            ", class is over ", cls.num_states, "x", cls.num_actions);
    const std::size_t S = cls.num_states, A = cls.num_actions;

    LowRankFit fit;
    bool found = false;
    for (const auto& [mu_idx, phi_idx] : cls.valid_pairs) {
        const numvec table = cls.product_table(mu_idx, phi_idx);
        prec_t ll = 0;
        for (std::size_t sa = 0; sa < S * A && ll > -inf(); ++sa) {
            if (counts.pair[sa] == 0) continue;
            prec_t normalizer = 0;
            for (std::size_t sp = 0; sp < S; ++sp) normalizer += table[sa * S + sp];
            for (std::size_t sp = 0; sp < S; ++sp) {
                const prec_t c = counts.triple[sa * S + sp];
                if (c == 0) continue;
                if (table[sa * S + sp] <= 0) { ll = -inf(); break; }
                ll += c * (std::log(table[sa * S + sp]) - std::log(normalizer));
            }
        }
        if (!found || ll > fit.loglik) {
            found = true;
            fit.loglik = ll;
            fit.chosen_mu_index = mu_idx;
            fit.chosen_phi_index = phi_idx;
            fit.transition = table;
        }
    }
    require(fit.loglik > -inf(),
            "mle_low_rank: every valid pair assigns zero probability to some observed transition");
    return fit;
}

inline LowRankFit mle_low_rank(const LowRankModelClass& cls, const OfflineDataset& data) {
    return mle_low_rank(cls, count_transitions(data, cls.num_states, cls.num_actions));
}

/// Gap bound ingredients, all computed under the TRUE feature map. Report
/// fields follow the bound gap <= sqrt(xi) sqrt(|A|) (H sqrt(C_d0)
/// + H^2 sqrt(rel_cond rank / min_pib)) up to its universal constant.
struct LowRankDiagnostics {
    prec_t gap = 0; ///< realized V^{pi*}_{P*} - V^{pi_hat}_{P*}
    prec_t xi = 0;
    prec_t rel_cond_number = 0;
    prec_t C_d0 = 0;
    std::size_t rank_sigma_rho = 0;
    prec_t min_pib = 0;
    prec_t theorem_rhs = 0;          ///< bound expression at multiplier 1
    bool rho_stationary = false;     ///< stationarity of rho under pi_b within 1e-6
    prec_t stationarity_residual = 0;
    CppoResult cppo;                 ///< full algorithm-side result
};

/// Theorem right-hand side at a given constant multiplier.
inline prec_t low_rank_bound_rhs(prec_t xi, std::size_t num_actions, std::size_t horizon, prec_t c_d0,
                                 prec_t rel_cond, std::size_t rank, prec_t min_pib,
                                 prec_t multiplier = 1.0) {
    require(min_pib > 0, "low_rank_bound_rhs: min_pib must be > 0");
    const prec_t H = prec_t(horizon);
    return multiplier * std::sqrt(xi) * std::sqrt(prec_t(num_actions))
           * (H * std::sqrt(c_d0) + H * H * std::sqrt(rel_cond * prec_t(rank) / min_pib));
}

/// Runs the CPPO pipeline over the flattened low-rank class, then evaluates
/// the bound ingredients with the true phi*: the relative condition number
/// between the comparator occupancy and rho, the d0 coefficient, the rank of
/// the offline feature second moment, and the behavior floor. rho must come
/// in behavior form; every action needs positive probability everywhere, and
/// near-stationarity of the induced rho is surfaced as a flag rather than
/// enforced.
inline LowRankDiagnostics lowrank_gap_diagnostics(const LowRankModelClass& cls,
                                                  const OfflineDataset& data,
                                                  const ThresholdPolicy& threshold,
                                                  const TimePolicy& comparator,
                                                  const TabularMDP& mdp_true, const TimePolicy& pi_b,
                                                  std::size_t iterations = 64, prec_t eta = 0) {
    check_dims(mdp_true, pi_b);
    check_dims(mdp_true, comparator);
    const SharedEnv env = mdp_true.shared();
    if (eta == 0) eta = 0.4 / prec_t(env.horizon);
    const std::size_t S = mdp_true.num_states, A = mdp_true.num_actions;
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a)
            require(pi_b.pi(0, s, a) > 0, "lowrank_gap_diagnostics: behavior policy has pi_b(a=", a,
                    "|s=", s, ") = 0, the bound needs 1/min pi_b finite");

    LowRankDiagnostics diag;
    const OfflineDistribution rho = stationary_as_offline(mdp_true, pi_b);
    diag.stationarity_residual = stationarity_gap(mdp_true, pi_b, rho);
    diag.rho_stationary = diag.stationarity_residual <= 1e-6;
    if (!diag.rho_stationary)
        log_warn("lowrank_gap_diagnostics: rho is off-stationary by ", diag.stationarity_residual);

    // algorithm path: flattened class, factor-count threshold, max-min search
    const FiniteModelClass flat = cls.to_finite_class();
    diag.xi = threshold.xi_low_rank(data.n(), cls.phi_set.size(), cls.mu_set.size());
    const VersionSpace vs =
        build_version_space(flat, count_transitions(data, S, A), diag.xi);
    diag.cppo = cppo_optimize(vs, env, iterations, eta);
    diag.cppo.xi = diag.xi;
    diag.cppo.version_space_size = vs.size();
    diag.cppo.truth_captured = vs.contains(flat.truth_index);

    diag.gap = evaluate_policy(mdp_true, comparator).value
               - evaluate_policy(mdp_true, diag.cppo.policy).value;

    // bound ingredients under the true feature only
    std::vector<Eigen::VectorXd> phi_star;
    phi_star.reserve(S * A);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) {
            const numvec& f = cls.true_phi(s, a);
            Eigen::VectorXd v(long(f.size()));
            for (std::size_t k = 0; k < f.size(); ++k) v(long(k)) = f[k];
            phi_star.push_back(std::move(v));
        }
    const OccupancyMeasure occ = occupancy(mdp_true, comparator);
    diag.rel_cond_number = relative_condition_number(phi_star, S, A, occ.average, rho.table);
    diag.C_d0 = initial_dist_concentrability(flat, mdp_true, rho);
    diag.rank_sigma_rho = numerical_rank(feature_second_moment(phi_star, rho.table));
    diag.min_pib = inf();
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) diag.min_pib = std::min(diag.min_pib, pi_b.pi(0, s, a));
    diag.theorem_rhs = low_rank_bound_rhs(diag.xi, A, env.horizon, diag.C_d0, diag.rel_cond_number,
                                          diag.rank_sigma_rho, diag.min_pib);
    return diag;
}

} // namespace offrl
