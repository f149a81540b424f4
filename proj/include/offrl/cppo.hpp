// Constrained pessimistic policy optimization: exact worst-case evaluation
// over a version space, max-min search by best-response NPG with best-iterate
// selection, the end-to-end data-to-policy pipeline, the non-pessimistic
// certainty-equivalent baseline, and the sampled-ball KNR variant.
#pragma once

#include "offrl/coverage.hpp"

namespace offrl {

// ---------------------------------------------------------------------------
// Pessimistic evaluation
// ---------------------------------------------------------------------------

/// Exact min over version-space members of the policy's start value. Returns
/// (value, class-level index of the minimizing member); ties go to the lowest
/// member index.
inline std::pair<prec_t, std::size_t> pessimistic_value(const VersionSpace& vs, const SharedEnv& env,
                                                        const TimePolicy& policy) {
    require(vs.size() > 0, "pessimistic_value: empty version space");
    require(vs.num_states == env.num_states && vs.num_actions == env.num_actions,
            "pessimistic_value: version space is over ", vs.num_states, "x", vs.num_actions,
            ", environment is ", env.num_states, "x", env.num_actions);
    prec_t best = inf();
    std::size_t worst = 0;
    for (std::size_t k = 0; k < vs.size(); ++k) {
        const prec_t v = evaluate_policy(make_mdp(env, vs.models[k]), policy).value;
        if (v < best) {
            best = v;
            worst = vs.member_indices[k];
        }
    }
    return {best, worst};
}

// ---------------------------------------------------------------------------
// Max-min optimization
// ---------------------------------------------------------------------------

/// Result of the max-min search. The diagnostics block (xi, space size,
/// truth capture) is filled by cppo_pipeline; the optimizer itself never
/// sees the truth.
struct CppoResult {
    TimePolicy policy;
    prec_t pessimistic_value = 0;       ///< exact min over members at `policy`
    std::size_t worst_model_index = 0;  ///< class index achieving that min
    std::size_t iterations = 0;
    std::vector<std::pair<prec_t, std::size_t>> trajectory; ///< per-iterate (value, worst index)

    prec_t xi = 0;                      ///< pipeline diagnostics
    std::size_t version_space_size = 0;
    bool truth_captured = false;
};

/// Best-response dynamics for max_pi min_P V^pi_P: at each step the current
/// iterate is scored against its worst member and pushed along that member's
/// advantage by one NPG step. Candidates for the returned policy are the
/// greedily rounded iterates: deterministic candidates keep the reported
/// value at or below the exhaustive deterministic max-min (soft iterates can
/// exceed it by hedging across members), while the trajectory logs the soft
/// dynamics. On instances small enough to enumerate every deterministic
/// policy (2^(H*S) * A^(H*S) configurations at most 1e5) the candidate set
/// also includes that full enumeration: best-response dynamics can stall
/// below the deterministic max-min when the game's saddle needs
/// randomization, and at toy sizes the exact scan is cheap certainty. The
/// exact inner min keeps the pessimism guarantee intact no matter which
/// candidate wins.
inline CppoResult cppo_optimize(const VersionSpace& vs, const SharedEnv& env, std::size_t iterations,
                                prec_t eta) {
    require(iterations >= 1, "cppo_optimize: iterations must be >= 1");
    require(eta > 0 && eta < 0.5 / prec_t(env.horizon), "cppo_optimize: eta = ", eta,
            " must lie in (0, 1/(2H)) = (0, ", 0.5 / prec_t(env.horizon), ")");
    require(vs.size() > 0, "cppo_optimize: empty version space");

    CppoResult res;
    res.iterations = iterations;
    res.pessimistic_value = -inf();
    TimePolicy iterate = TimePolicy::uniform(env.horizon, env.num_states, env.num_actions);

    auto consider = [&](const TimePolicy& p, prec_t value, std::size_t worst) {
        if (value > res.pessimistic_value) {
            res.pessimistic_value = value;
            res.worst_model_index = worst;
            res.policy = p;
        }
    };

    for (std::size_t t = 0; t <= iterations; ++t) {
        const auto [value, worst] = pessimistic_value(vs, env, iterate);
        res.trajectory.emplace_back(value, worst);

        const TimePolicy rounded = iterate.rounded();
        const auto [rvalue, rworst] = pessimistic_value(vs, env, rounded);
        consider(rounded, rvalue, rworst);

        if (t == iterations) break;
        const std::size_t pos = std::size_t(
            std::lower_bound(vs.member_indices.begin(), vs.member_indices.end(), worst)
            - vs.member_indices.begin());
        const ValueTriple adv = evaluate_policy(make_mdp(env, vs.models[pos]), iterate);
        iterate = npg_step(iterate, adv, eta);
    }

    const std::size_t cells = env.horizon * env.num_states;
    const prec_t configs = std::pow(prec_t(2), prec_t(cells)) *
                           std::pow(prec_t(env.num_actions), prec_t(cells));
    if (configs <= 1e5) {
        sizvec actions(cells, 0);
        while (true) {
            const TimePolicy det =
                TimePolicy::deterministic(env.horizon, env.num_states, env.num_actions, actions);
            const auto [dvalue, dworst] = pessimistic_value(vs, env, det);
            consider(det, dvalue, dworst);
            std::size_t c = 0;
            while (c < cells && ++actions[c] == env.num_actions) {
                actions[c] = 0;
                ++c;
            }
            if (c == cells) break;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Pipelines and baseline
// ---------------------------------------------------------------------------

/// Data to policy: MLE anchor, version space at the rule's threshold, then
/// the max-min search. Records the version-space diagnostics; truth_captured
/// reads the class's truth index after the fact and feeds no decision.
inline CppoResult cppo_pipeline(const FiniteModelClass& cls, const SharedEnv& env,
                                const OfflineDataset& data, const ThresholdPolicy& threshold,
                                std::size_t iterations, prec_t eta) {
    require(cls.num_states == env.num_states && cls.num_actions == env.num_actions,
            "cppo_pipeline: class and environment dimensions differ");
    const TransitionCounts counts = count_transitions(data, cls.num_states, cls.num_actions);
    const prec_t xi = threshold.xi_for_class(data.n(), cls);
    const VersionSpace vs = build_version_space(cls, counts, xi);
    CppoResult res = cppo_optimize(vs, env, iterations, eta);
    res.xi = xi;
    res.version_space_size = vs.size();
    res.truth_captured = vs.contains(cls.truth_index);
    return res;
}

/// Non-pessimistic baseline: plan optimally in the MLE member as if it were
/// the truth. Deterministic given the dataset.
inline TimePolicy naive_certainty_equivalent(const FiniteModelClass& cls, const SharedEnv& env,
                                             const OfflineDataset& data) {
    const std::size_t mle = mle_finite(cls, data).index;
    return plan_optimal(cls.member_mdp(env, mle)).first;
}

// ---------------------------------------------------------------------------
// KNR variant (documented approximation)
// ---------------------------------------------------------------------------

/// Shared rollout noise so every (policy, model) pair is scored on common
/// random numbers; comparisons are then deterministic in the bank's seed.
struct KnrNoiseBank {
    std::vector<Eigen::VectorXd> init;                ///< rollouts x state_dim
    std::vector<std::vector<Eigen::VectorXd>> steps;  ///< rollouts x horizon x state_dim
};

inline KnrNoiseBank make_knr_noise_bank(const KNRScenario& sc, std::size_t rollouts,
                                        std::uint64_t seed) {
    require(rollouts >= 1, "make_knr_noise_bank: rollouts must be >= 1");
    std::mt19937_64 rng = make_rng(seed, 0x90b);
    std::normal_distribution<prec_t> gauss(0.0, 1.0);
    auto draw = [&](std::size_t d) {
        Eigen::VectorXd v(static_cast<long>(d));
        for (long i = 0; i < v.size(); ++i) v(i) = gauss(rng);
        return v;
    };
    KnrNoiseBank bank;
    for (std::size_t r = 0; r < rollouts; ++r) {
        bank.init.push_back(draw(sc.model.state_dim));
        bank.steps.emplace_back();
        for (std::size_t h = 0; h < sc.horizon; ++h) bank.steps.back().push_back(draw(sc.model.state_dim));
    }
    return bank;
}

/// Monte Carlo value of one candidate policy when the dynamics matrix is W;
/// all randomness comes from the bank.
inline prec_t knr_mc_value(const KNRScenario& sc, const Eigen::MatrixXd& w,
                           const KnrLinearPolicy& policy, const KnrNoiseBank& bank) {
    prec_t total = 0;
    for (std::size_t r = 0; r < bank.init.size(); ++r) {
        Eigen::VectorXd s = sc.init_mean + sc.init_sigma * bank.init[r];
        for (std::size_t h = 0; h < sc.horizon; ++h) {
            const std::size_t a = policy(s);
            total += sc.reward(s, a);
            s = w * sc.model.feature(s, a) + sc.model.noise_sigma * bank.steps[r][h];
        }
    }
    return total / prec_t(bank.init.size());
}

struct KnrCppoResult {
    std::size_t policy_index = 0;
    prec_t pessimistic_value = 0;
    numvec per_policy_values; ///< sampled-ball min per candidate policy
};

/// Approximate max-min for KNR scenarios: the confidence ball around W_hat is
/// represented by its center plus num_models boundary samples W = W_hat +
/// xi D (Sigma_n + lambda I)^{-1/2} with ||D||_2 = 1, and each candidate
/// policy is scored by its worst sampled model on common rollout noise.
inline KnrCppoResult knr_cppo(const KNRScenario& sc, const KnrRidge& fit, prec_t lambda, prec_t xi,
                              std::size_t num_models = 64, std::size_t rollouts = 128,
                              std::uint64_t seed = 0) {
    sc.validate();
    require(lambda > 0 && xi >= 0, "knr_cppo: lambda must be > 0 and xi >= 0");
    const long ds = long(sc.model.state_dim), d = long(sc.model.feature_dim);
    require(fit.W_hat.rows() == ds && fit.W_hat.cols() == d, "knr_cppo: W_hat is ", fit.W_hat.rows(),
            "x", fit.W_hat.cols(), ", expected ", ds, "x", d);

    Eigen::MatrixXd reg = fit.Sigma_n + lambda * Eigen::MatrixXd::Identity(d, d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reg);
    const Eigen::MatrixXd half_inv = es.eigenvectors()
                                     * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal()
                                     * es.eigenvectors().transpose();

    std::vector<Eigen::MatrixXd> models{fit.W_hat};
    std::mt19937_64 rng = make_rng(seed, 0xba11);
    std::normal_distribution<prec_t> gauss(0.0, 1.0);
    for (std::size_t k = 0; k < num_models; ++k) {
        Eigen::MatrixXd dir(ds, d);
        for (long i = 0; i < ds; ++i)
            for (long j = 0; j < d; ++j) dir(i, j) = gauss(rng);
        dir /= std::max<prec_t>(dir.operatorNorm(), 1e-12);
        models.push_back(fit.W_hat + xi * dir * half_inv);
    }

    const KnrNoiseBank bank = make_knr_noise_bank(sc, rollouts, seed);
    KnrCppoResult res;
    res.pessimistic_value = -inf();
    for (std::size_t p = 0; p < sc.candidate_policies.size(); ++p) {
        prec_t worst = inf();
        for (const Eigen::MatrixXd& w : models)
            worst = std::min(worst, knr_mc_value(sc, w, sc.candidate_policies[p], bank));
        res.per_policy_values.push_back(worst);
        if (worst > res.pessimistic_value) {
            res.pessimistic_value = worst;
            res.policy_index = p;
        }
    }
    return res;
}

} // namespace offrl
