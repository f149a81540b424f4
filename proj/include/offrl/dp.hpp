// Exact dynamic programming on tabular MDPs: policy evaluation, occupancy
// measures, backward-induction planning, the simulation-lemma bound, and the
// exponentiated (NPG) policy update.
#pragma once

#include "offrl/mdp.hpp"

#include <utility>

namespace offrl {

/// Exact backward DP evaluation of a policy.
///
/// V_H = 0; Q_h(s,a) = r(s,a) + sum_s' P(s'|s,a) V_{h+1}(s');
/// V_h(s) = sum_a pi_h(a|s) Q_h(s,a); value = sum_s d0(s) V_0(s).
inline ValueTriple evaluate_policy(const TabularMDP& mdp, const TimePolicy& policy) {
    check_dims(mdp, policy);
    const std::size_t S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    ValueTriple out{H, S, A, numvec(H * S, 0.0), numvec(H * S * A, 0.0), numvec(H * S * A, 0.0), 0.0};
    numvec vnext(S, 0.0); // V_{h+1}
    for (std::size_t h = H; h-- > 0;) {
        for (std::size_t s = 0; s < S; ++s) {
            prec_t vs = 0;
            for (std::size_t a = 0; a < A; ++a) {
                prec_t q = mdp.r(s, a);
                const std::size_t base = mdp.tidx(s, a, 0);
                for (std::size_t sp = 0; sp < S; ++sp) q += mdp.transition[base + sp] * vnext[sp];
                out.q[(h * S + s) * A + a] = q;
                vs += policy.pi(h, s, a) * q;
            }
            out.v[h * S + s] = vs;
            for (std::size_t a = 0; a < A; ++a)
                out.adv[(h * S + s) * A + a] = out.q[(h * S + s) * A + a] - vs;
        }
        for (std::size_t s = 0; s < S; ++s) vnext[s] = out.v[h * S + s];
    }
    for (std::size_t s = 0; s < S; ++s) out.value += mdp.d0(s) * out.v[s];
    return out;
}

/// Forward recursion for the per-step occupancies and their average.
inline OccupancyMeasure occupancy(const TabularMDP& mdp, const TimePolicy& policy) {
    check_dims(mdp, policy);
    const std::size_t S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    OccupancyMeasure out{H, S, A, numvec(H * S * A, 0.0), numvec(S * A, 0.0)};
    numvec state_dist = mdp.initial_dist; // d_t over states
    for (std::size_t t = 0; t < H; ++t) {
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a)
                out.per_step[(t * S + s) * A + a] = state_dist[s] * policy.pi(t, s, a);
        if (t + 1 < H) {
            numvec next(S, 0.0);
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a) {
                    const prec_t mass = out.per_step[(t * S + s) * A + a];
                    if (mass == 0) continue;
                    const std::size_t base = mdp.tidx(s, a, 0);
                    for (std::size_t sp = 0; sp < S; ++sp) next[sp] += mass * mdp.transition[base + sp];
                }
            state_dist = std::move(next);
        }
    }
    for (std::size_t t = 0; t < H; ++t)
        for (std::size_t sa = 0; sa < S * A; ++sa) out.average[sa] += out.per_step[t * S * A + sa] / prec_t(H);
    return out;
}

/// Backward induction; the returned policy is deterministic per (h,s) with
/// ties broken by the lowest action index.
inline std::pair<TimePolicy, prec_t> plan_optimal(const TabularMDP& mdp) {
    mdp.validate();
    const std::size_t S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    TimePolicy policy{H, S, A, numvec(H * S * A, 0.0)};
    numvec vnext(S, 0.0);
    for (std::size_t h = H; h-- > 0;) {
        numvec vcur(S);
        for (std::size_t s = 0; s < S; ++s) {
            prec_t best_q = -inf();
            std::size_t best_a = 0;
            for (std::size_t a = 0; a < A; ++a) {
                prec_t q = mdp.r(s, a);
                const std::size_t base = mdp.tidx(s, a, 0);
                for (std::size_t sp = 0; sp < S; ++sp) q += mdp.transition[base + sp] * vnext[sp];
                if (q > best_q) { best_q = q; best_a = a; }
            }
            vcur[s] = best_q;
            policy.pi(h, s, best_a) = 1.0;
        }
        vnext = std::move(vcur);
    }
    prec_t value = 0;
    for (std::size_t s = 0; s < S; ++s) value += mdp.d0(s) * vnext[s];
    return {std::move(policy), value};
}

/// l1 distance between two distributions over states; always in [0,2].
inline prec_t l1_model_distance(const numvec& p, const numvec& q) {
    require(p.size() == q.size(), "l1_model_distance: dimension mismatch, ", p.size(), " vs ", q.size());
    prec_t sum_p = 0, sum_q = 0, dist = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        require(p[i] >= 0, "l1_model_distance: p[", i, "] negative");
        require(q[i] >= 0, "l1_model_distance: q[", i, "] negative");
        sum_p += p[i];
        sum_q += q[i];
        dist += std::abs(p[i] - q[i]);
    }
    require(std::abs(sum_p - 1.0) <= 1e-9, "l1_model_distance: p sums to ", sum_p);
    require(std::abs(sum_q - 1.0) <= 1e-9, "l1_model_distance: q sums to ", sum_q);
    return dist;
}

/// l1 distance between the (s,a) rows of two transition tables.
inline prec_t l1_row_distance(const numvec& p, const numvec& q, std::size_t S, std::size_t A,
                              std::size_t s, std::size_t a) {
    const std::size_t base = (s * A + a) * S;
    prec_t dist = 0;
    for (std::size_t sp = 0; sp < S; ++sp) dist += std::abs(p[base + sp] - q[base + sp]);
    return dist;
}

/// Value gap between two models that share reward and d0, together with the
/// simulation-lemma bound H^2 E_{(s,a) ~ d^pi_P}[ ||P(.|s,a) - Phat(.|s,a)||_1 ].
/// The occupancy is taken under mdp_true; callers assert gap <= bound.
inline std::pair<prec_t, prec_t> simulation_gap_bound(const TabularMDP& mdp_true, const TabularMDP& mdp_alt,
                                                      const TimePolicy& policy) {
    require(mdp_true.num_states == mdp_alt.num_states && mdp_true.num_actions == mdp_alt.num_actions &&
                mdp_true.horizon == mdp_alt.horizon,
            "simulation_gap_bound: model dimensions differ");
    require(mdp_true.reward == mdp_alt.reward, "simulation_gap_bound: rewards differ; the bound assumes a shared reward");
    require(mdp_true.initial_dist == mdp_alt.initial_dist,
            "simulation_gap_bound: initial distributions differ");
    const prec_t gap =
        std::abs(evaluate_policy(mdp_true, policy).value - evaluate_policy(mdp_alt, policy).value);
    const OccupancyMeasure occ = occupancy(mdp_true, policy);
    const std::size_t S = mdp_true.num_states, A = mdp_true.num_actions;
    prec_t expected_l1 = 0;
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a)
            expected_l1 += occ.avg(s, a) * l1_row_distance(mdp_true.transition, mdp_alt.transition, S, A, s, a);
    const prec_t H = prec_t(mdp_true.horizon);
    return {gap, H * H * expected_l1};
}

/// Exponentiated advantage update, applied per (h,s):
/// pi'_h(a|s) proportional to pi_h(a|s) exp(eta A_h(s,a)).
/// The max-advantage shift keeps exponentials bounded without changing the result.
inline TimePolicy npg_step(const TimePolicy& policy, const ValueTriple& advantage, prec_t eta) {
    require(eta >= 0, "npg_step: eta = ", eta, " must be >= 0");
    require(advantage.horizon == policy.horizon && advantage.num_states == policy.num_states &&
                advantage.num_actions == policy.num_actions,
            "npg_step: advantage dimensions do not match the policy");
    const std::size_t S = policy.num_states, A = policy.num_actions, H = policy.horizon;
    TimePolicy out{H, S, A, numvec(H * S * A)};
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s) {
            prec_t amax = -inf();
            for (std::size_t a = 0; a < A; ++a) amax = std::max(amax, advantage.A(h, s, a));
            prec_t total = 0;
            for (std::size_t a = 0; a < A; ++a) {
                const prec_t w = policy.pi(h, s, a) * std::exp(eta * (advantage.A(h, s, a) - amax));
                out.pi(h, s, a) = w;
                total += w;
            }
            require(total > 0, "npg_step: row (h=", h, ",s=", s, ") has zero total weight");
            for (std::size_t a = 0; a < A; ++a) out.pi(h, s, a) /= total;
        }
    return out;
}

/// Alternative single-table update: every h uses the advantage averaged over
/// steps, matching a stationary reading of the update rule. Exposed for
/// comparison; the per-h form above is the default everywhere.
inline TimePolicy npg_step_shared(const TimePolicy& policy, const ValueTriple& advantage, prec_t eta) {
    require(eta >= 0, "npg_step_shared: eta = ", eta, " must be >= 0");
    const std::size_t S = policy.num_states, A = policy.num_actions, H = policy.horizon;
    ValueTriple mean = advantage;
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) {
            prec_t acc = 0;
            for (std::size_t h = 0; h < H; ++h) acc += advantage.A(h, s, a);
            for (std::size_t h = 0; h < H; ++h) mean.adv[(h * S + s) * A + a] = acc / prec_t(H);
        }
    return npg_step(policy, mean, eta);
}

} // namespace offrl
