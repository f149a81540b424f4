// Model families and scenario generators: finite transition classes with a
// tunable perturbation ladder, partial-coverage trap instances, a coverage-vs-
// suboptimality arm ladder, low-rank factored classes, and desk-scale KNRs.
#pragma once

#include "offrl/offline_data.hpp"

#include <Eigen/Dense>

#include <functional>

namespace offrl {

// ---------------------------------------------------------------------------
// Finite model classes
// ---------------------------------------------------------------------------

/// Finite hypothesis class of transition tables containing the truth.
struct FiniteModelClass {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::vector<numvec> models;
    std::size_t truth_index = 0;

    std::size_t size() const { return models.size(); }
    const numvec& truth() const { return models[truth_index]; }
    TabularMDP member_mdp(const SharedEnv& env, std::size_t i) const {
        require(i < models.size(), "FiniteModelClass: member ", i, " out of range, class size is ",
                models.size());
        return make_mdp(env, models[i]);
    }

    void validate() const {
        require(!models.empty(), "FiniteModelClass: empty class");
        require(truth_index < models.size(), "FiniteModelClass: truth_index ", truth_index,
                " out of range for class size ", models.size());
        for (std::size_t i = 0; i < models.size(); ++i) {
            require(models[i].size() == num_states * num_actions * num_states, "FiniteModelClass: member ",
                    i, " has ", models[i].size(), " entries, expected ",
                    num_states * num_actions * num_states);
            for (std::size_t s = 0; s < num_states; ++s)
                for (std::size_t a = 0; a < num_actions; ++a)
                    detail::check_dist(models[i], (s * num_actions + a) * num_states, num_states, PROB_TOL,
                                       msg("FiniteModelClass: member ", i, " row (s=", s, ",a=", a, ")"));
        }
    }
};

namespace detail {

/// Clamps entries to a positive floor and renormalizes; keeps log-likelihoods
/// finite for generated members so -inf scores only arise from hand-built classes.
inline void floor_and_normalize_row(numvec& table, std::size_t offset, std::size_t n,
                                    prec_t floor = 1e-9) {
    prec_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        table[offset + i] = std::max(table[offset + i], floor);
        total += table[offset + i];
    }
    for (std::size_t i = 0; i < n; ++i) table[offset + i] /= total;
}

/// Zero-mean direction with unit l1 norm, so `eps * dir` moves l1 mass eps.
template <typename RNG> numvec perturbation_direction(RNG& rng, std::size_t n) {
    std::uniform_real_distribution<prec_t> unif(-1.0, 1.0);
    numvec dir(n);
    prec_t mean = 0;
    for (prec_t& x : dir) { x = unif(rng); mean += x; }
    mean /= prec_t(n);
    prec_t l1 = 0;
    for (prec_t& x : dir) { x -= mean; l1 += std::abs(x); }
    if (l1 < 1e-12) { dir.assign(n, 0.0); dir[0] = 0.5; dir[n - 1] = -0.5; l1 = 1.0; }
    for (prec_t& x : dir) x /= l1;
    return dir;
}

} // namespace detail

/// Random truth plus class_size-1 perturbed members. Perturbation magnitudes
/// form a geometric ladder from `perturbation` down to perturbation/100, so
/// the class has members at every distance scale the data can resolve; this
/// makes C-dagger tunable and MLE error decay smoothly with n.
inline FiniteModelClass make_finite_class(std::uint64_t seed, std::size_t num_states,
                                          std::size_t num_actions, std::size_t class_size,
                                          prec_t perturbation) {
    require(num_states > 0 && num_actions > 0, "make_finite_class: sizes must be positive");
    require(class_size >= 1, "make_finite_class: class_size must be >= 1");
    require(perturbation > 0 && perturbation <= 1, "make_finite_class: perturbation = ", perturbation,
            " must be in (0,1]");
    std::mt19937_64 rng = make_rng(seed, 0xc1a5);
    const std::size_t S = num_states, A = num_actions;
    FiniteModelClass cls{S, A, {}, 0};
    cls.models.reserve(class_size);
    cls.models.push_back(random_transition_table(rng, S, A));
    const numvec truth = cls.models[0]; // copy: push_back below reallocates
    const prec_t ratio = class_size > 2 ? std::pow(0.01, 1.0 / prec_t(class_size - 2)) : 1.0;
    prec_t eps = perturbation;
    for (std::size_t j = 1; j < class_size; ++j) {
        numvec member = truth;
        for (std::size_t sa = 0; sa < S * A; ++sa) {
            const numvec dir = detail::perturbation_direction(rng, S);
            for (std::size_t sp = 0; sp < S; ++sp) member[sa * S + sp] += eps * dir[sp];
            detail::floor_and_normalize_row(member, sa * S, S);
        }
        cls.models.push_back(std::move(member));
        eps *= ratio;
    }
    return cls;
}

// ---------------------------------------------------------------------------
// Partial-coverage trap instance
// ---------------------------------------------------------------------------

/// MDP with a start state, a good corridor, and high-reward "lure" states that
/// under the truth bounce straight back to the start. The returned rho covers
/// only the corridor, so nothing in the data refutes a model under which a
/// lure absorbs; the comparator (all-safe) stays fully covered.
/// Layout: state 0 = start, 1 = corridor, 2.. = lures; action 0 = safe.
inline std::tuple<TabularMDP, OfflineDistribution, TimePolicy>
make_partial_coverage_instance(std::uint64_t seed, std::size_t num_states, std::size_t num_actions,
                               std::size_t horizon) {
    require(num_states >= 3, "make_partial_coverage_instance: num_states = ", num_states, " must be >= 3");
    require(num_actions >= 2, "make_partial_coverage_instance: num_actions must be >= 2");
    require(horizon >= 3, "make_partial_coverage_instance: horizon = ", horizon,
            " must be >= 3 (the lure's one-shot payoff must lose to the corridor)");
    const std::size_t S = num_states, A = num_actions, H = horizon;
    std::mt19937_64 rng = make_rng(seed, 0x7a9);
    std::uniform_real_distribution<prec_t> jitter(-0.02, 0.02);

    TabularMDP mdp{S, A, H, numvec(S * A * S, 0.0), numvec(S * A), numvec(S, 0.0)};
    mdp.initial_dist[0] = 1.0;
    for (std::size_t a = 0; a < A; ++a) {
        mdp.p(0, a, a == 0 ? 1 : 2 + (a - 1) % (S - 2)) = 1.0; // safe -> corridor, risky -> a lure
        mdp.p(1, a, 1) = 1.0;                                  // corridor absorbs
        mdp.reward[mdp.ridx(0, a)] = 0.0;
        mdp.reward[mdp.ridx(1, a)] = 0.6 + jitter(rng);
    }
    for (std::size_t s = 2; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) {
            mdp.p(s, a, 0) = 1.0; // lures bounce back to the start
            mdp.reward[mdp.ridx(s, a)] = 0.9 + jitter(rng);
        }
    mdp.validate();

    // Behavior: safe at the start, uniform in the corridor. Lures stay unvisited.
    TimePolicy behavior = TimePolicy::uniform(H, S, A);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t a = 0; a < A; ++a) behavior.pi(h, 0, a) = (a == 0) ? 1.0 : 0.0;
    OfflineDistribution rho = occupancy_as_offline(mdp, behavior);

    TimePolicy comparator = plan_optimal(mdp).first;
    return {std::move(mdp), std::move(rho), std::move(comparator)};
}

/// Class for the trap instance. `optimist_count` members claim the lures
/// absorb (misleadingly attractive) while matching the truth exactly on the
/// covered rows, so no dataset drawn from rho can separate them from the truth
/// and likelihood selection comes down to its tie-break. The remaining members
/// bounce back like the truth but carry `jitter` on the covered rows. The
/// truth never occupies the lowest index, so an exact-tie pick lands on an
/// optimist whenever one exists: the instance where certainty equivalence
/// fails and pessimism does not.
inline FiniteModelClass make_trap_class(const TabularMDP& mdp_true, std::uint64_t seed,
                                        std::size_t class_size, std::size_t optimist_count,
                                        prec_t jitter = 0.01) {
    require(class_size >= 2, "make_trap_class: class_size must be >= 2");
    require(optimist_count < class_size, "make_trap_class: optimist_count = ", optimist_count,
            " must leave room for the truth in a class of ", class_size);
    const std::size_t S = mdp_true.num_states, A = mdp_true.num_actions;
    std::mt19937_64 rng = make_rng(seed, 0x7c1a);
    std::uniform_real_distribution<prec_t> unif(0.0, 1.0);

    std::vector<numvec> others;
    for (std::size_t j = 0; j + 1 < class_size; ++j) {
        numvec member = mdp_true.transition;
        const bool optimist = j < optimist_count;
        if (optimist) {
            const prec_t stay = 0.9 + 0.1 * unif(rng);
            for (std::size_t s = 2; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a) {
                    const std::size_t base = (s * A + a) * S;
                    std::fill(member.begin() + base, member.begin() + base + S, 0.0);
                    member[base + s] = stay;
                    member[base + 0] = 1.0 - stay;
                }
            // covered rows stay bit-identical to the truth: an exact tie
        } else {
            // truth-like distractors; jitter on the covered rows keeps them
            // strictly below the truth in likelihood
            std::vector<std::size_t> covered = {0 * A + 0};
            for (std::size_t a = 0; a < A; ++a) covered.push_back(1 * A + a);
            for (std::size_t sa : covered) {
                const numvec dir = detail::perturbation_direction(rng, S);
                for (std::size_t sp = 0; sp < S; ++sp) member[sa * S + sp] += jitter * dir[sp];
                detail::floor_and_normalize_row(member, sa * S, S);
            }
        }
        others.push_back(std::move(member));
    }

    FiniteModelClass cls{S, A, {}, 0};
    cls.truth_index =
        std::uniform_int_distribution<std::size_t>(1, class_size - 1)(rng);
    for (std::size_t i = 0, j = 0; i < class_size; ++i) {
        if (i == cls.truth_index) cls.models.push_back(mdp_true.transition);
        else cls.models.push_back(std::move(others[j++]));
    }
    return cls;
}

// ---------------------------------------------------------------------------
// Arm-ladder scenario: smooth gap decay under partial coverage
// ---------------------------------------------------------------------------

/// Scenario bundle used by the gap-vs-n experiments.
struct LadderScenario {
    TabularMDP truth;
    SharedEnv env;
    FiniteModelClass model_class;
    OfflineDistribution rho;
    TimePolicy comparator;
};

/// Start state fanning out to absorbing arms whose rewards improve as their
/// offline coverage shrinks, plus one uncovered dead action. The class puts a
/// rung of members on each start-row that leak mass into the dead state, so
/// the surviving worst-case leak at sample size n scales like sqrt(1/(n rho_i))
/// and the pessimistic choice walks down the arm ladder as n grows. eps_max
/// near 1 matters: the largest candidate leak must wipe out an uncovered arm's
/// value, otherwise tiny samples trust every arm equally and the walk breaks.
/// States: 0 = start, 1..num_arms = arms, num_arms+1 = dead.
/// Actions: i < num_arms -> arm i+1; action num_arms -> dead.
inline LadderScenario make_gap_ladder_scenario(std::uint64_t seed, std::size_t num_arms = 8,
                                               std::size_t rungs = 14, std::size_t horizon = 5,
                                               prec_t delta_max = 0.45, prec_t delta_min = 0.015,
                                               prec_t coverage_decay = 0.55, prec_t eps_max = 0.98,
                                               prec_t eps_min = 0.002, prec_t base_reward = 0.8) {
    require(num_arms >= 2 && rungs >= 2 && horizon >= 2, "make_gap_ladder_scenario: sizes too small");
    const std::size_t S = num_arms + 2, A = num_arms + 1, H = horizon;
    const std::size_t dead = num_arms + 1;
    std::mt19937_64 rng = make_rng(seed, 0x1add);
    std::uniform_real_distribution<prec_t> unif(0.0, 1.0);

    TabularMDP mdp{S, A, H, numvec(S * A * S, 0.0), numvec(S * A, 0.0), numvec(S, 0.0)};
    mdp.initial_dist[0] = 1.0;
    for (std::size_t a = 0; a < A; ++a) mdp.p(0, a, a < num_arms ? a + 1 : dead) = 1.0;
    for (std::size_t s = 1; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) mdp.p(s, a, s) = 1.0; // arms and dead absorb

    // arm i (state i+1): suboptimality delta geometrically decreasing in i,
    // jittered per seed so medians over trials vary smoothly
    const prec_t dratio = std::pow(delta_min / delta_max, 1.0 / prec_t(num_arms - 1));
    numvec deltas(num_arms);
    for (std::size_t i = 0; i < num_arms; ++i) {
        deltas[i] = delta_max * std::pow(dratio, prec_t(i)) * (0.85 + 0.3 * unif(rng));
        for (std::size_t a = 0; a < A; ++a) mdp.reward[mdp.ridx(i + 1, a)] = base_reward - deltas[i];
    }
    mdp.validate();

    // class: truth + per-arm rungs leaking start-row mass into the dead state
    FiniteModelClass cls{S, A, {}, 0};
    cls.models.push_back(mdp.transition);
    const prec_t eratio = std::pow(eps_min / eps_max, 1.0 / prec_t(rungs - 1));
    for (std::size_t i = 0; i < num_arms; ++i) {
        prec_t eps = eps_max;
        for (std::size_t l = 0; l < rungs; ++l) {
            numvec member = mdp.transition;
            const std::size_t base = (0 * A + i) * S;
            member[base + i + 1] = 1.0 - eps;
            member[base + dead] = eps;
            cls.models.push_back(std::move(member));
            eps *= eratio;
        }
    }

    // rho: arm i's start action covered with geometrically decaying weight,
    // matching arm-state mass; the dead action is reachable but uncovered
    OfflineDistribution rho{S, A, numvec(S * A, 0.0)};
    prec_t norm = 0;
    numvec w(num_arms);
    for (std::size_t i = 0; i < num_arms; ++i) { w[i] = std::pow(coverage_decay, prec_t(i)); norm += w[i]; }
    for (std::size_t i = 0; i < num_arms; ++i) {
        rho.rho(0, i) = 0.5 * w[i] / norm;
        rho.rho(i + 1, 0) = 0.5 * w[i] / norm;
    }
    rho.validate();

    TimePolicy comparator = plan_optimal(mdp).first;
    SharedEnv env = mdp.shared();
    return LadderScenario{std::move(mdp), std::move(env), std::move(cls), std::move(rho),
                          std::move(comparator)};
}

// ---------------------------------------------------------------------------
// Low-rank factored classes
// ---------------------------------------------------------------------------

/// Finite grids of candidate factors phi: SxA -> R^d (simplex-valued, so
/// ||phi||_2 <= 1) and mu: S -> R^d; the class is every (mu,phi) product that
/// forms a valid transition table. Products failing nonnegativity or row
/// normalization within 1e-9 are filtered out.
struct LowRankModelClass {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::size_t dim = 0;
    std::vector<std::vector<numvec>> phi_set; // phi_set[i][s*A+a] has length dim
    std::vector<std::vector<numvec>> mu_set;  // mu_set[j][sp] has length dim
    std::size_t truth_mu = 0;
    std::size_t truth_phi = 0;
    std::vector<std::pair<std::size_t, std::size_t>> valid_pairs; // (mu, phi), lexicographic

    numvec product_table(std::size_t mu_idx, std::size_t phi_idx) const {
        const std::size_t S = num_states, A = num_actions;
        numvec table(S * A * S, 0.0);
        for (std::size_t sa = 0; sa < S * A; ++sa)
            for (std::size_t sp = 0; sp < S; ++sp) {
                prec_t v = 0;
                for (std::size_t k = 0; k < dim; ++k) v += mu_set[mu_idx][sp][k] * phi_set[phi_idx][sa][k];
                table[sa * S + sp] = v;
            }
        return table;
    }

    bool product_is_valid(std::size_t mu_idx, std::size_t phi_idx, prec_t tol = 1e-9) const {
        const numvec table = product_table(mu_idx, phi_idx);
        const std::size_t S = num_states;
        for (std::size_t sa = 0; sa < num_states * num_actions; ++sa) {
            prec_t total = 0;
            for (std::size_t sp = 0; sp < S; ++sp) {
                if (table[sa * S + sp] < -tol) return false;
                total += table[sa * S + sp];
            }
            if (std::abs(total - 1.0) > tol) return false;
        }
        return true;
    }

    void rebuild_valid_pairs() {
        valid_pairs.clear();
        for (std::size_t j = 0; j < mu_set.size(); ++j)
            for (std::size_t i = 0; i < phi_set.size(); ++i)
                if (product_is_valid(j, i)) valid_pairs.emplace_back(j, i);
    }

    /// Flattens the valid products into a finite class; truth position located
    /// by its (mu,phi) indices.
    FiniteModelClass to_finite_class() const {
        FiniteModelClass cls{num_states, num_actions, {}, 0};
        bool found = false;
        for (std::size_t k = 0; k < valid_pairs.size(); ++k) {
            cls.models.push_back(product_table(valid_pairs[k].first, valid_pairs[k].second));
            if (valid_pairs[k] == std::make_pair(truth_mu, truth_phi)) { cls.truth_index = k; found = true; }
        }
        require(found, "LowRankModelClass: truth pair (mu=", truth_mu, ",phi=", truth_phi,
                ") was filtered out, the class no longer contains the truth");
        return cls;
    }

    const numvec& true_phi(std::size_t s, std::size_t a) const {
        return phi_set[truth_phi][s * num_actions + a];
    }
};

/// Random low-rank class: mu candidates are d-row stochastic factors, phi
/// candidates are simplex-valued maps on a mixing ladder toward random
/// alternatives, so products are valid by construction and every feature stays
/// in the unit l2 ball. One deliberately invalid phi candidate exercises the
/// validity filter.
inline LowRankModelClass make_low_rank_class(std::uint64_t seed, std::size_t num_states,
                                             std::size_t num_actions, std::size_t dim,
                                             std::size_t num_phi, std::size_t num_mu,
                                             prec_t perturbation = 0.5, bool include_invalid = true) {
    require(dim >= 2 && num_phi >= 1 && num_mu >= 1, "make_low_rank_class: sizes too small");
    require(perturbation > 0 && perturbation <= 1, "make_low_rank_class: perturbation must be in (0,1]");
    const std::size_t S = num_states, A = num_actions;
    std::mt19937_64 rng = make_rng(seed, 0x10ea);

    LowRankModelClass cls{S, A, dim, {}, {}, 0, 0, {}};

    // truth mu: d sharply distinct "topic" rows over next states
    std::vector<numvec> topics(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        numvec alpha(S, 0.3);
        alpha[k % S] = 6.0; // each topic concentrated somewhere different
        topics[k] = sample_dirichlet(rng, alpha);
    }
    auto mu_from_topics = [&](const std::vector<numvec>& rows) {
        std::vector<numvec> mu(S, numvec(dim));
        for (std::size_t sp = 0; sp < S; ++sp)
            for (std::size_t k = 0; k < dim; ++k) mu[sp][k] = rows[k][sp];
        return mu;
    };
    cls.mu_set.push_back(mu_from_topics(topics));
    for (std::size_t j = 1; j < num_mu; ++j) {
        std::vector<numvec> rows = topics;
        const prec_t t = perturbation * std::pow(0.25, prec_t(j - 1));
        for (std::size_t k = 0; k < dim; ++k) {
            const numvec target = sample_simplex(rng, S);
            for (std::size_t sp = 0; sp < S; ++sp) rows[k][sp] = (1 - t) * rows[k][sp] + t * target[sp];
        }
        cls.mu_set.push_back(mu_from_topics(rows));
    }

    // truth phi and a mixing ladder of alternatives (all simplex-valued)
    std::vector<numvec> phi_star(S * A);
    for (std::size_t sa = 0; sa < S * A; ++sa) phi_star[sa] = sample_simplex(rng, dim);
    cls.phi_set.push_back(phi_star);
    const std::size_t regular_phi = include_invalid && num_phi > 1 ? num_phi - 1 : num_phi;
    for (std::size_t i = 1; i < regular_phi; ++i) {
        std::vector<numvec> phi = phi_star;
        const prec_t t = perturbation * std::pow(0.45, prec_t(i - 1));
        for (std::size_t sa = 0; sa < S * A; ++sa) {
            const numvec target = sample_simplex(rng, dim);
            for (std::size_t k = 0; k < dim; ++k) phi[sa][k] = (1 - t) * phi[sa][k] + t * target[k];
        }
        cls.phi_set.push_back(std::move(phi));
    }
    if (include_invalid && num_phi > 1) {
        // Planted invalid candidate, kept inside the unit feature ball.
        // Preferred form: coordinates sum to 1 with weight -1/3 on the most
        // concentrated topic, driving a product row negative. Inside the ball
        // a sum-1 vector cannot go negative at dim 2, so the fallback scales
        // phi* to break row normalization instead.
        const std::vector<numvec>& mu0 = cls.mu_set[0];
        std::size_t k_neg = 0;
        prec_t best_margin = 0;
        if (dim >= 3) {
            const prec_t pos = (4.0 / 3.0) / prec_t(dim - 1);
            for (std::size_t sp = 0; sp < S; ++sp)
                for (std::size_t k = 0; k < dim; ++k) {
                    prec_t rest = 0;
                    for (std::size_t k2 = 0; k2 < dim; ++k2)
                        if (k2 != k) rest += mu0[sp][k2];
                    const prec_t margin = mu0[sp][k] / 3.0 - pos * rest;
                    if (margin > best_margin) { best_margin = margin; k_neg = k; }
                }
        }
        std::vector<numvec> bad(S * A);
        if (best_margin > 0) {
            numvec v(dim, (4.0 / 3.0) / prec_t(dim - 1));
            v[k_neg] = -1.0 / 3.0;
            for (std::size_t sa = 0; sa < S * A; ++sa) bad[sa] = v;
        } else {
            for (std::size_t sa = 0; sa < S * A; ++sa) {
                bad[sa] = phi_star[sa];
                for (prec_t& x : bad[sa]) x *= 0.5;
            }
        }
        cls.phi_set.push_back(std::move(bad));
    }

    cls.truth_mu = 0;
    cls.truth_phi = 0;
    cls.rebuild_valid_pairs();
    return cls;
}

// ---------------------------------------------------------------------------
// KNR models and desk-scale scenarios
// ---------------------------------------------------------------------------

/// phi(s,a) = (B_a s + c_a) scaled into the unit ball; covers the one-hot
/// embedding as the special case B_a = one-hot lift, c_a = 0.
struct LinearClipFeature {
    std::vector<Eigen::MatrixXd> B; // per action, dim x state_dim
    std::vector<Eigen::VectorXd> c; // per action, dim

    std::size_t num_actions() const { return B.size(); }
    std::size_t dim() const { return B.empty() ? 0 : std::size_t(B[0].rows()); }

    Eigen::VectorXd operator()(const Eigen::VectorXd& s, std::size_t a) const {
        require(a < B.size(), "LinearClipFeature: action ", a, " out of range");
        Eigen::VectorXd v = B[a] * s + c[a];
        const double norm = v.norm();
        if (norm > 1.0) v /= norm;
        return v;
    }
};

/// Gaussian-noise linear-in-features transition model s' = W phi(s,a) + eps.
struct KNRModel {
    Eigen::MatrixXd W; // state_dim x dim
    LinearClipFeature feature;
    prec_t noise_sigma = 1.0;
    std::size_t state_dim = 0;
    std::size_t feature_dim = 0;
    std::size_t num_actions = 0;

    void validate() const {
        require(noise_sigma > 0, "KNRModel: noise_sigma = ", noise_sigma, " must be > 0");
        require(W.rows() == long(state_dim) && W.cols() == long(feature_dim), "KNRModel: W is ", W.rows(),
                "x", W.cols(), ", expected ", state_dim, "x", feature_dim);
        require(feature.num_actions() == num_actions, "KNRModel: feature has ", feature.num_actions(),
                " actions, expected ", num_actions);
    }
};

/// Linear-index candidate policy: a(s) = argmax_a (theta.row(a) . s + bias_a).
struct KnrLinearPolicy {
    Eigen::MatrixXd theta; // num_actions x state_dim
    Eigen::VectorXd bias;  // num_actions

    std::size_t operator()(const Eigen::VectorXd& s) const {
        std::size_t best = 0;
        double best_v = theta.row(0).dot(s) + bias(0);
        for (long a = 1; a < theta.rows(); ++a) {
            const double v = theta.row(a).dot(s) + bias(a);
            if (v > best_v) { best_v = v; best = std::size_t(a); }
        }
        return best;
    }
};

/// Desk-scale KNR planning problem: truth model, logistic reward in [0,1],
/// Gaussian initial states, and a finite candidate-policy set evaluated by
/// Monte Carlo rollouts.
struct KNRScenario {
    KNRModel model;
    std::size_t horizon = 0;
    Eigen::VectorXd reward_w;  // r(s,a) = logistic(reward_w . s + reward_b[a])
    Eigen::VectorXd reward_b;
    Eigen::VectorXd init_mean;
    prec_t init_sigma = 0;
    std::vector<KnrLinearPolicy> candidate_policies;

    prec_t reward(const Eigen::VectorXd& s, std::size_t a) const {
        return 1.0 / (1.0 + std::exp(-(reward_w.dot(s) + reward_b(long(a)))));
    }

    void validate() const {
        model.validate();
        require(horizon > 0, "KNRScenario: horizon must be positive");
        require(!candidate_policies.empty(), "KNRScenario: candidate policy set is empty");
    }
};

/// Standard-basis feature on finite state-action indices; Gram matrix of the
/// enumerated features is the identity.
struct OneHotFeature {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;

    std::size_t dim() const { return num_states * num_actions; }
    Eigen::VectorXd operator()(std::size_t s, std::size_t a) const {
        require(s < num_states && a < num_actions, "OneHotFeature: pair (s=", s, ",a=", a,
                ") out of range");
        Eigen::VectorXd v = Eigen::VectorXd::Zero(long(dim()));
        v(long(s * num_actions + a)) = 1.0;
        return v;
    }

    /// KNR-form equivalent over one-hot encoded state vectors.
    LinearClipFeature to_linear() const {
        LinearClipFeature f;
        for (std::size_t a = 0; a < num_actions; ++a) {
            Eigen::MatrixXd B = Eigen::MatrixXd::Zero(long(dim()), long(num_states));
            for (std::size_t s = 0; s < num_states; ++s) B(long(s * num_actions + a), long(s)) = 1.0;
            f.B.push_back(std::move(B));
            f.c.push_back(Eigen::VectorXd::Zero(long(dim())));
        }
        return f;
    }
};

inline OneHotFeature knr_one_hot_embedding(std::size_t num_states, std::size_t num_actions) {
    require(num_states > 0 && num_actions > 0, "knr_one_hot_embedding: sizes must be positive");
    return OneHotFeature{num_states, num_actions};
}

/// Random desk-scale KNR scenario, deterministic in seed.
inline KNRScenario make_knr_scenario(std::uint64_t seed, std::size_t state_dim, std::size_t feature_dim,
                                     std::size_t num_actions, std::size_t num_candidates,
                                     std::size_t horizon, prec_t zeta, prec_t w_scale = 0.9) {
    require(state_dim >= 1 && feature_dim >= 1 && num_actions >= 1, "make_knr_scenario: sizes too small");
    std::mt19937_64 rng = make_rng(seed, 0x13a7);
    std::normal_distribution<prec_t> gauss(0.0, 1.0);
    auto rand_mat = [&](long r, long c, double scale) {
        Eigen::MatrixXd m(r, c);
        for (long i = 0; i < r; ++i)
            for (long j = 0; j < c; ++j) m(i, j) = scale * gauss(rng);
        return m;
    };

    KNRScenario sc;
    sc.model.state_dim = state_dim;
    sc.model.feature_dim = feature_dim;
    sc.model.num_actions = num_actions;
    sc.model.noise_sigma = zeta;
    Eigen::MatrixXd W = rand_mat(long(state_dim), long(feature_dim), 1.0);
    sc.model.W = W * (w_scale / std::max(1e-12, W.operatorNorm()));
    for (std::size_t a = 0; a < num_actions; ++a) {
        sc.model.feature.B.push_back(rand_mat(long(feature_dim), long(state_dim), 0.7));
        Eigen::VectorXd c(static_cast<long>(feature_dim));
        for (long i = 0; i < c.size(); ++i) c(i) = 0.3 * gauss(rng);
        sc.model.feature.c.push_back(c);
    }
    sc.horizon = horizon;
    sc.reward_w = Eigen::VectorXd(long(state_dim));
    for (long i = 0; i < sc.reward_w.size(); ++i) sc.reward_w(i) = gauss(rng);
    sc.reward_b = Eigen::VectorXd(long(num_actions));
    for (long i = 0; i < sc.reward_b.size(); ++i) sc.reward_b(i) = 0.5 * gauss(rng);
    sc.init_mean = Eigen::VectorXd(long(state_dim));
    for (long i = 0; i < sc.init_mean.size(); ++i) sc.init_mean(i) = 0.5 * gauss(rng);
    sc.init_sigma = 0.5;
    for (std::size_t k = 0; k < num_candidates; ++k) {
        KnrLinearPolicy p{rand_mat(long(num_actions), long(state_dim), 1.0),
                          Eigen::VectorXd(long(num_actions))};
        for (long i = 0; i < p.bias.size(); ++i) p.bias(i) = gauss(rng);
        sc.candidate_policies.push_back(std::move(p));
    }
    sc.validate();
    return sc;
}

/// Exploratory offline data for a KNR scenario: episodes of `horizon` steps
/// under uniformly random actions, restarting from the initial distribution.
/// Returns aligned (phi(s,a), s') pairs ready for the ridge estimator.
inline std::pair<std::vector<Eigen::VectorXd>, std::vector<Eigen::VectorXd>>
sample_knr_transitions(const KNRScenario& sc, std::size_t n, std::uint64_t seed) {
    require(n > 0, "sample_knr_transitions: n must be positive");
    sc.validate();
    std::mt19937_64 rng = make_rng(seed, 0x5a3);
    std::normal_distribution<prec_t> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> act(0, sc.model.num_actions - 1);

    std::vector<Eigen::VectorXd> phis, nexts;
    phis.reserve(n);
    nexts.reserve(n);
    Eigen::VectorXd state;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % sc.horizon == 0) {
            state = sc.init_mean;
            for (long k = 0; k < state.size(); ++k) state(k) += sc.init_sigma * gauss(rng);
        }
        const std::size_t a = act(rng);
        const Eigen::VectorXd phi = sc.model.feature(state, a);
        Eigen::VectorXd next = sc.model.W * phi;
        for (long k = 0; k < next.size(); ++k) next(k) += sc.model.noise_sigma * gauss(rng);
        phis.push_back(phi);
        nexts.push_back(next);
        state = std::move(next);
    }
    return {std::move(phis), std::move(nexts)};
}

} // namespace offrl
