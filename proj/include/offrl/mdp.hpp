// Finite-horizon tabular MDP containers: model, horizon-indexed policy,
// occupancy measure, and value/advantage bundles.
#pragma once

#include "offrl/common.hpp"

namespace offrl {

/// Reward table, initial distribution, and horizon shared by every transition
/// model of a scenario; candidate models differ only in their transitions.
struct SharedEnv {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::size_t horizon = 0;
    numvec reward;       // r(s,a), row-major (s,a), entries in [0,1]
    numvec initial_dist; // d0(s)

    std::size_t ridx(std::size_t s, std::size_t a) const { return s * num_actions + a; }
    prec_t r(std::size_t s, std::size_t a) const { return reward[ridx(s, a)]; }

    void validate() const;
};

/// Episodic finite-horizon MDP with explicit transition table P(s'|s,a).
struct TabularMDP {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::size_t horizon = 0;
    numvec transition;   // P(s'|s,a), row-major (s,a,s')
    numvec reward;       // r(s,a)
    numvec initial_dist; // d0(s)

    std::size_t tidx(std::size_t s, std::size_t a, std::size_t sp) const {
        return (s * num_actions + a) * num_states + sp;
    }
    std::size_t ridx(std::size_t s, std::size_t a) const { return s * num_actions + a; }

    prec_t p(std::size_t s, std::size_t a, std::size_t sp) const { return transition[tidx(s, a, sp)]; }
    prec_t& p(std::size_t s, std::size_t a, std::size_t sp) { return transition[tidx(s, a, sp)]; }
    prec_t r(std::size_t s, std::size_t a) const { return reward[ridx(s, a)]; }
    prec_t d0(std::size_t s) const { return initial_dist[s]; }

    SharedEnv shared() const { return SharedEnv{num_states, num_actions, horizon, reward, initial_dist}; }

    /// Checks every structural invariant; failures name the offending row or cell.
    void validate() const;
};

/// Builds an MDP from the shared environment and a transition table.
inline TabularMDP make_mdp(const SharedEnv& env, numvec transition) {
    TabularMDP mdp{env.num_states, env.num_actions, env.horizon,
                   std::move(transition), env.reward, env.initial_dist};
    return mdp;
}

/// Horizon-indexed stochastic policy pi_h(a|s), h = 0..H-1.
struct TimePolicy {
    std::size_t horizon = 0;
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    numvec action_probs; // row-major (h,s,a)

    std::size_t idx(std::size_t h, std::size_t s, std::size_t a) const {
        return (h * num_states + s) * num_actions + a;
    }
    prec_t pi(std::size_t h, std::size_t s, std::size_t a) const { return action_probs[idx(h, s, a)]; }
    prec_t& pi(std::size_t h, std::size_t s, std::size_t a) { return action_probs[idx(h, s, a)]; }

    static TimePolicy uniform(std::size_t horizon, std::size_t num_states, std::size_t num_actions) {
        TimePolicy p{horizon, num_states, num_actions,
                     numvec(horizon * num_states * num_actions, prec_t(1) / prec_t(num_actions))};
        return p;
    }

    /// Deterministic policy from an action table indexed (h,s).
    static TimePolicy deterministic(std::size_t horizon, std::size_t num_states, std::size_t num_actions,
                                    const sizvec& actions) {
        require(actions.size() == horizon * num_states, "TimePolicy::deterministic: action table has ",
                actions.size(), " entries, expected ", horizon * num_states);
        TimePolicy p{horizon, num_states, num_actions, numvec(horizon * num_states * num_actions, 0.0)};
        for (std::size_t h = 0; h < horizon; ++h)
            for (std::size_t s = 0; s < num_states; ++s) {
                std::size_t a = actions[h * num_states + s];
                require(a < num_actions, "TimePolicy::deterministic: action ", a, " out of range at (h=", h,
                        ",s=", s, ")");
                p.pi(h, s, a) = 1.0;
            }
        return p;
    }

    /// Greedy rounding: action with the largest probability per (h,s), lowest index on ties.
    TimePolicy rounded() const {
        TimePolicy p{horizon, num_states, num_actions, numvec(action_probs.size(), 0.0)};
        for (std::size_t h = 0; h < horizon; ++h)
            for (std::size_t s = 0; s < num_states; ++s) {
                std::size_t best = 0;
                for (std::size_t a = 1; a < num_actions; ++a)
                    if (pi(h, s, a) > pi(h, s, best)) best = a;
                p.pi(h, s, best) = 1.0;
            }
        return p;
    }

    void validate() const;
};

/// Per-step state-action occupancies d_t and their average d = (1/H) sum_t d_t.
struct OccupancyMeasure {
    std::size_t horizon = 0;
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    numvec per_step; // row-major (t,s,a)
    numvec average;  // (s,a)

    std::size_t idx(std::size_t t, std::size_t s, std::size_t a) const {
        return (t * num_states + s) * num_actions + a;
    }
    prec_t d(std::size_t t, std::size_t s, std::size_t a) const { return per_step[idx(t, s, a)]; }
    prec_t avg(std::size_t s, std::size_t a) const { return average[s * num_actions + a]; }
};

/// State values V_h(s), action values Q_h(s,a), advantages A_h(s,a) = Q - V,
/// and the scalar start value sum_s d0(s) V_0(s).
struct ValueTriple {
    std::size_t horizon = 0;
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    numvec v;   // (h,s), h = 0..H-1; V_H = 0 implicitly
    numvec q;   // (h,s,a)
    numvec adv; // (h,s,a)
    prec_t value = 0;

    prec_t V(std::size_t h, std::size_t s) const { return v[h * num_states + s]; }
    prec_t Q(std::size_t h, std::size_t s, std::size_t a) const {
        return q[(h * num_states + s) * num_actions + a];
    }
    prec_t A(std::size_t h, std::size_t s, std::size_t a) const {
        return adv[(h * num_states + s) * num_actions + a];
    }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace detail {
inline void check_dist(const numvec& table, std::size_t offset, std::size_t n, prec_t tol,
                       const std::string& what) {
    prec_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const prec_t x = table[offset + i];
        require(x >= 0, what, ": entry ", i, " is negative (", x, ")");
        total += x;
    }
    require(std::abs(total - 1.0) <= tol, what, ": sums to ", total, ", expected 1 within ", tol);
}
} // namespace detail

inline void SharedEnv::validate() const {
    require(num_states > 0 && num_actions > 0 && horizon > 0,
            "SharedEnv: dimensions must be positive, got |S|=", num_states, " |A|=", num_actions,
            " H=", horizon);
    require(reward.size() == num_states * num_actions, "SharedEnv: reward table has ", reward.size(),
            " entries, expected ", num_states * num_actions);
    require(initial_dist.size() == num_states, "SharedEnv: initial_dist has ", initial_dist.size(),
            " entries, expected ", num_states);
    for (std::size_t s = 0; s < num_states; ++s)
        for (std::size_t a = 0; a < num_actions; ++a)
            require(r(s, a) >= 0 && r(s, a) <= 1, "SharedEnv: reward(s=", s, ",a=", a, ") = ", r(s, a),
                    " outside [0,1]");
    detail::check_dist(initial_dist, 0, num_states, PROB_TOL, "SharedEnv: initial_dist");
}

inline void TabularMDP::validate() const {
    shared().validate();
    require(transition.size() == num_states * num_actions * num_states, "TabularMDP: transition table has ",
            transition.size(), " entries, expected ", num_states * num_actions * num_states);
    for (std::size_t s = 0; s < num_states; ++s)
        for (std::size_t a = 0; a < num_actions; ++a)
            detail::check_dist(transition, tidx(s, a, 0), num_states, PROB_TOL,
                               msg("TabularMDP: transition row (s=", s, ",a=", a, ")"));
}

inline void TimePolicy::validate() const {
    require(horizon > 0 && num_states > 0 && num_actions > 0,
            "TimePolicy: dimensions must be positive, got H=", horizon, " |S|=", num_states,
            " |A|=", num_actions);
    require(action_probs.size() == horizon * num_states * num_actions, "TimePolicy: table has ",
            action_probs.size(), " entries, expected ", horizon * num_states * num_actions);
    for (std::size_t h = 0; h < horizon; ++h)
        for (std::size_t s = 0; s < num_states; ++s)
            detail::check_dist(action_probs, idx(h, s, 0), num_actions, PROB_TOL,
                               msg("TimePolicy: row (h=", h, ",s=", s, ")"));
}

/// Dimension-compatibility check used by every (mdp, policy) operation.
inline void check_dims(const TabularMDP& mdp, const TimePolicy& policy) {
    require(policy.horizon == mdp.horizon, "dimension mismatch on horizon: policy has ", policy.horizon,
            ", mdp has ", mdp.horizon);
    require(policy.num_states == mdp.num_states, "dimension mismatch on states: policy has ",
            policy.num_states, ", mdp has ", mdp.num_states);
    require(policy.num_actions == mdp.num_actions, "dimension mismatch on actions: policy has ",
            policy.num_actions, ", mdp has ", mdp.num_actions);
}

/// Random transition table with Dirichlet(1,..,1) rows; deterministic in rng state.
template <typename RNG> numvec random_transition_table(RNG& rng, std::size_t S, std::size_t A) {
    numvec table(S * A * S);
    for (std::size_t sa = 0; sa < S * A; ++sa) {
        const numvec row = sample_simplex(rng, S);
        std::copy(row.begin(), row.end(), table.begin() + sa * S);
    }
    return table;
}

/// Random shared environment: U(0,1) rewards and a Dirichlet initial distribution.
template <typename RNG> SharedEnv random_shared_env(RNG& rng, std::size_t S, std::size_t A, std::size_t H) {
    SharedEnv env{S, A, H, numvec(S * A), sample_simplex(rng, S)};
    std::uniform_real_distribution<prec_t> unif(0.0, 1.0);
    for (prec_t& x : env.reward) x = unif(rng);
    return env;
}

/// Random stochastic policy with Dirichlet rows; used by property tests.
template <typename RNG> TimePolicy random_policy(RNG& rng, std::size_t H, std::size_t S, std::size_t A) {
    TimePolicy p{H, S, A, numvec(H * S * A)};
    for (std::size_t hs = 0; hs < H * S; ++hs) {
        const numvec row = sample_simplex(rng, A);
        std::copy(row.begin(), row.end(), p.action_probs.begin() + hs * A);
    }
    return p;
}

} // namespace offrl
