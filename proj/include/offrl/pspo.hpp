// Posterior-sampling policy optimization: one posterior computed from the
// data, a fresh model draw per iteration driving incremental NPG updates,
// Bayesian suboptimality-gap estimation, and the version-space LCB term used
// to decompose that gap.
#pragma once

#include "offrl/cppo.hpp"

#include <cassert>

namespace offrl {

/// Full iterate trajectory of one run. values_under_truth stays empty until
/// the evaluation harness fills it — the algorithm itself never sees truth.
struct PspoResult {
    std::vector<TimePolicy> policies; ///< iterates 0..T (policy 0 is uniform)
    std::vector<long> sampled_models; ///< per-iteration draw id; -1 when the family has no index
    prec_t eta = 0;
    std::size_t iterations = 0;
    numvec values_under_truth; ///< filled by evaluate_iterates_under_truth

    const TimePolicy& final_policy() const { return policies.back(); }
};

/// Runs T sampled-model NPG updates from the uniform policy. The posterior is
/// fixed; each iteration draws a fresh model from it, computes the advantage
/// of the current iterate under that draw, and applies one soft update.
inline PspoResult pspo_run(const ModelPosterior& posterior, const SharedEnv& env, std::size_t iterations,
                           prec_t eta, std::uint64_t seed) {
    require(eta > 0 && eta < 0.5 / prec_t(env.horizon), "pspo_run: eta = ", eta,
            " must lie strictly inside (0, 1/(2H)) = (0, ", 0.5 / prec_t(env.horizon), ")");
    require(posterior.params.family != PriorFamily::matrix_normal,
            "pspo_run: matrix-normal posteriors have no tabular planner");
    env.validate();

    PspoResult res;
    res.eta = eta;
    res.iterations = iterations;
    res.policies.push_back(TimePolicy::uniform(env.horizon, env.num_states, env.num_actions));

    std::mt19937_64 rng = make_rng(seed, 0x9590);
    for (std::size_t t = 0; t < iterations; ++t) {
        const SampledModel draw = posterior_sample(posterior, rng);
        res.sampled_models.push_back(draw.member_index);
        const ValueTriple adv = evaluate_policy(make_mdp(env, draw.transition), res.policies.back());
#ifndef NDEBUG
        for (prec_t a : adv.adv) assert(std::abs(a) <= prec_t(env.horizon) + 1e-9);
#endif
        res.policies.push_back(npg_step(res.policies.back(), adv, eta));
    }
    return res;
}

/// Harness-side diagnostic: exact value of every iterate under the truth.
/// Returns (best value, iterate index, ties to the earliest).
inline std::pair<prec_t, std::size_t> evaluate_iterates_under_truth(PspoResult& res,
                                                                    const TabularMDP& mdp_true) {
    require(!res.policies.empty(), "evaluate_iterates_under_truth: empty run");
    res.values_under_truth.clear();
    prec_t best = -inf();
    std::size_t best_idx = 0;
    for (std::size_t t = 0; t < res.policies.size(); ++t) {
        res.values_under_truth.push_back(evaluate_policy(mdp_true, res.policies[t]).value);
        if (res.values_under_truth.back() > best) {
            best = res.values_under_truth.back();
            best_idx = t;
        }
    }
    return {best, best_idx};
}

/// Version-space lower-confidence-bound slack at the comparator:
/// V^{pi*}_{P*} - min_{P in M_D} V^{pi*}_P. Nonnegative whenever the space
/// captures the truth; decays as the space tightens.
inline prec_t lcb_gap_term(const VersionSpace& vs, const TimePolicy& comparator,
                           const TabularMDP& mdp_true) {
    const prec_t truth_value = evaluate_policy(mdp_true, comparator).value;
    return truth_value - pessimistic_value(vs, mdp_true.shared(), comparator).first;
}

/// Bayesian suboptimality-gap experiment report.
struct BayesianGapReport {
    numvec gaps; ///< per outer trial: V^{pi(P*)}_{P*} - max_t V^{pi_t}_{P*}
    prec_t mean_gap = 0, se_gap = 0;
    numvec c_draws;        ///< density-ratio C of each sampled truth
    prec_t mean_c = 0;
    numvec c_dagger_draws; ///< refined coefficient; discrete priors only
    prec_t mean_c_dagger = 0;
};

/// Outer Monte Carlo over the prior: sample a truth, sample a dataset from it
/// through rho, update the posterior, run PS-PO, and score the best iterate
/// exactly under the sampled truth. Coverage quantities of the sampled truths
/// are reported alongside (the refined one needs a finite class, so it is
/// only computed for discrete priors).
inline BayesianGapReport bayesian_gap_estimate(const ModelPrior& prior, const SharedEnv& env,
                                               const OfflineDistribution& rho, std::size_t n,
                                               std::size_t iterations, prec_t eta, std::size_t trials,
                                               std::uint64_t seed) {
    require(trials >= 10, "bayesian_gap_estimate: trials = ", trials, " must be >= 10");
    require(n >= 1, "bayesian_gap_estimate: n must be >= 1");
    require(prior.family != PriorFamily::matrix_normal,
            "bayesian_gap_estimate: matrix-normal priors have no tabular planner");

    BayesianGapReport rep;
    for (std::size_t i = 0; i < trials; ++i) {
        std::mt19937_64 rng = make_rng(seed, 0xbe5000 + i);
        const SampledModel truth_draw = posterior_sample(prior, rng);
        const TabularMDP mdp_true = make_mdp(env, truth_draw.transition);
        const auto [comparator, opt_value] = plan_optimal(mdp_true);

        const OfflineDataset data = sample_dataset(mdp_true, rho, n, seed + 7919 * (i + 1));
        const ModelPosterior posterior = posterior_update(prior, data);
        PspoResult run = pspo_run(posterior, env, iterations, eta, seed + 104729 * (i + 1));
        const prec_t best = evaluate_iterates_under_truth(run, mdp_true).first;

        rep.gaps.push_back(opt_value - best);
        rep.c_draws.push_back(concentrability(comparator, mdp_true, rho));
        if (prior.family == PriorFamily::discrete)
            rep.c_dagger_draws.push_back(
                refined_concentrability(prior.model_class, comparator, mdp_true, rho));
    }
    std::tie(rep.mean_gap, rep.se_gap) = detail::mean_and_se(rep.gaps);
    rep.mean_c = detail::mean_and_se(rep.c_draws).first;
    if (!rep.c_dagger_draws.empty()) rep.mean_c_dagger = detail::mean_and_se(rep.c_dagger_draws).first;
    return rep;
}

} // namespace offrl
