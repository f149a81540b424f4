// Acceptance gate: ten end-to-end checks covering exact identities,
// calibrated pessimism, estimation rates, gap decay, the pessimism-vs-naive
// separation, Bayesian decay, coverage identities, the KNR confidence ball,
// brute-force agreement of the max-min search, and the low-rank diagnostics
// bound. Each check prints one PASS/FAIL line; the exit code is nonzero when
// any check fails. Pass criterion numbers as arguments to run a subset.
#include <offrl/experiments.hpp>

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

using namespace offrl;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

/// Random offline distribution with strictly positive mass everywhere, tilted
/// so ratios are nondegenerate.
OfflineDistribution tilted_distribution(std::mt19937_64& rng, std::size_t S, std::size_t A) {
    OfflineDistribution rho{S, A, numvec(S * A)};
    std::uniform_real_distribution<prec_t> unif(0.05, 1.0);
    prec_t total = 0;
    for (prec_t& w : rho.table) total += (w = unif(rng));
    for (prec_t& w : rho.table) w /= total;
    return rho;
}

prec_t closed_form_gaussian_l1(prec_t distance, prec_t zeta) {
    return 2.0 * std::erf(distance / (2.0 * std::sqrt(2.0) * zeta));
}

// ---------------------------------------------------------------------------
// 1. Exact identities and conjugacy order-invariance
// ---------------------------------------------------------------------------

Outcome criterion_exactness() {
    std::mt19937_64 rng = make_rng(101, 0xacc);

    // Performance-difference identity on 100 random (pi, pi', P) triples.
    prec_t worst_pd = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t S = 4, A = 3, H = 4;
        const SharedEnv env = random_shared_env(rng, S, A, H);
        const TabularMDP mdp = make_mdp(env, random_transition_table(rng, S, A));
        const TimePolicy base = random_policy(rng, H, S, A);
        const TimePolicy other = random_policy(rng, H, S, A);
        const prec_t lhs = evaluate_policy(mdp, other).value - evaluate_policy(mdp, base).value;
        const ValueTriple adv = evaluate_policy(mdp, base);
        const OccupancyMeasure occ = occupancy(mdp, other);
        prec_t rhs = 0;
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a) rhs += occ.d(h, s, a) * adv.A(h, s, a);
        worst_pd = std::max(worst_pd, std::abs(lhs - rhs));
    }
    if (worst_pd > 1e-9) return {false, fmt("performance-difference residual %.3g > 1e-9", worst_pd)};

    // Simulation inequality on 1000 random triples.
    std::size_t sim_violations = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t S = 4, A = 2, H = 3;
        const SharedEnv env = random_shared_env(rng, S, A, H);
        const TabularMDP a = make_mdp(env, random_transition_table(rng, S, A));
        const TabularMDP b = make_mdp(env, random_transition_table(rng, S, A));
        const TimePolicy pol = random_policy(rng, H, S, A);
        const auto [gap, bound] = simulation_gap_bound(a, b, pol);
        if (gap > bound + 1e-12) ++sim_violations;
    }
    if (sim_violations > 0)
        return {false, fmt("%zu of 1000 simulation-bound violations", sim_violations)};

    // npg_step: invariance to per-(h,s) advantage shifts, simplex preservation.
    prec_t worst_shift = 0, worst_simplex = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t S = 3, A = 3, H = 3;
        const SharedEnv env = random_shared_env(rng, S, A, H);
        const TabularMDP mdp = make_mdp(env, random_transition_table(rng, S, A));
        const TimePolicy pol = random_policy(rng, H, S, A);
        ValueTriple adv = evaluate_policy(mdp, pol);
        const TimePolicy stepped = npg_step(pol, adv, 0.12);

        std::uniform_real_distribution<prec_t> shift(-2.0, 2.0);
        ValueTriple shifted = adv;
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t s = 0; s < S; ++s) {
                const prec_t c = shift(rng);
                for (std::size_t a = 0; a < A; ++a)
                    shifted.adv[(h * S + s) * A + a] += c;
            }
        const TimePolicy stepped2 = npg_step(pol, shifted, 0.12);
        for (std::size_t i = 0; i < stepped.action_probs.size(); ++i)
            worst_shift =
                std::max(worst_shift, std::abs(stepped.action_probs[i] - stepped2.action_probs[i]));

        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t s = 0; s < S; ++s) {
                prec_t sum = 0;
                for (std::size_t a = 0; a < A; ++a) {
                    const prec_t p = stepped.pi(h, s, a);
                    if (p < 0) worst_simplex = std::max(worst_simplex, -p);
                    sum += p;
                }
                worst_simplex = std::max(worst_simplex, std::abs(sum - 1.0));
            }
    }
    if (worst_shift > 1e-12) return {false, fmt("npg shift residual %.3g > 1e-12", worst_shift)};
    if (worst_simplex > 1e-12) return {false, fmt("npg simplex residual %.3g > 1e-12", worst_simplex)};

    // Conjugate updates commute with data order to 1e-10.
    const std::size_t S = 3, A = 2;
    std::mt19937_64 env_rng = make_rng(102, 0xacc);
    const SharedEnv env = random_shared_env(env_rng, S, A, 3);
    const TabularMDP truth = make_mdp(env, random_transition_table(env_rng, S, A));
    const OfflineDataset data =
        sample_dataset(truth, OfflineDistribution::uniform(S, A), 400, 103);
    OfflineDataset lo, hi, rev;
    lo.records.assign(data.records.begin(), data.records.begin() + 200);
    hi.records.assign(data.records.begin() + 200, data.records.end());
    rev.records.assign(data.records.rbegin(), data.records.rend());

    const ModelPrior dprior = ModelPrior::dirichlet_uniform(S, A, 0.7);
    const numvec batch = posterior_update(dprior, data).params.alpha;
    const numvec seq = posterior_update(posterior_update(dprior, lo).params, hi).params.alpha;
    const numvec rsed = posterior_update(dprior, rev).params.alpha;
    prec_t worst_conj = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        worst_conj = std::max(worst_conj, std::abs(batch[i] - seq[i]));
        worst_conj = std::max(worst_conj, std::abs(batch[i] - rsed[i]));
    }

    std::vector<Eigen::VectorXd> phis, nexts;
    std::normal_distribution<prec_t> gauss(0.0, 1.0);
    for (int i = 0; i < 120; ++i) {
        Eigen::VectorXd p(3), x(2);
        for (long k = 0; k < 3; ++k) p(k) = gauss(rng);
        for (long k = 0; k < 2; ++k) x(k) = gauss(rng);
        phis.push_back(p);
        nexts.push_back(x);
    }
    const ModelPrior mprior = ModelPrior::matrix_normal(Eigen::MatrixXd::Zero(2, 3), 0.8, 1.3);
    const ModelPosterior mbatch = posterior_update(mprior, phis, nexts);
    std::vector<Eigen::VectorXd> phis_a(phis.begin(), phis.begin() + 60),
        phis_b(phis.begin() + 60, phis.end()), nexts_a(nexts.begin(), nexts.begin() + 60),
        nexts_b(nexts.begin() + 60, nexts.end());
    const ModelPosterior mseq =
        posterior_update(posterior_update(mprior, phis_b, nexts_b).params, phis_a, nexts_a);
    worst_conj = std::max(worst_conj,
                          (mbatch.params.col_precision - mseq.params.col_precision).cwiseAbs().maxCoeff());
    worst_conj = std::max(worst_conj, (mbatch.params.cross - mseq.params.cross).cwiseAbs().maxCoeff());
    worst_conj =
        std::max(worst_conj, (mbatch.params.mean_w() - mseq.params.mean_w()).cwiseAbs().maxCoeff());
    if (worst_conj > 1e-10) return {false, fmt("conjugacy order residual %.3g > 1e-10", worst_conj)};

    return {true, fmt("pd residual %.1e, 0/1000 simulation violations, npg residual %.1e, "
                      "conjugacy residual %.1e",
                      worst_pd, std::max(worst_shift, worst_simplex), worst_conj)};
}

// ---------------------------------------------------------------------------
// 2. Calibrated pessimism on the reference finite-class scenario
// ---------------------------------------------------------------------------

Outcome criterion_pessimism() {
    const std::size_t S = 6, A = 3, H = 5, n = 2000, draws = 500;
    const FiniteModelClass cls = make_finite_class(2, S, A, 20, 0.6);
    std::mt19937_64 env_rng = make_rng(2, 0xe5f);
    const SharedEnv env = random_shared_env(env_rng, S, A, H);
    const TabularMDP truth = cls.member_mdp(env, cls.truth_index);
    const OfflineDistribution rho = OfflineDistribution::uniform(S, A);

    ThresholdPolicy policy; // rule finite, delta = 0.1
    const std::uint64_t dataset_seed = 7000;
    const prec_t mult = calibrate_threshold(cls, truth, rho, n, policy, draws, dataset_seed);
    const prec_t xi = mult * policy.xi_for_class(n, cls);

    std::mt19937_64 probe_rng = make_rng(4, 0xacc);
    std::vector<TimePolicy> probes;
    numvec probe_values;
    for (int i = 0; i < 100; ++i) {
        probes.push_back(random_policy(probe_rng, H, S, A));
        probe_values.push_back(evaluate_policy(truth, probes.back()).value);
    }

    std::size_t captured = 0, violations = 0;
    for (std::size_t t = 0; t < draws; ++t) {
        const OfflineDataset data = sample_dataset(truth, rho, n, dataset_seed + t);
        const VersionSpace vs = build_version_space(cls, count_transitions(data, S, A), xi);
        if (!vs.contains(cls.truth_index)) continue;
        ++captured;
        for (std::size_t p = 0; p < probes.size(); ++p)
            if (pessimistic_value(vs, env, probes[p]).first > probe_values[p]) ++violations;
    }
    const prec_t rate = prec_t(captured) / prec_t(draws);
    const bool ok = rate >= 0.9 && violations == 0;
    return {ok, fmt("capture %.1f%% (>= 90%% required), %zu pessimism violations on 100 probes "
                    "x %zu captured draws (multiplier %.3g)",
                    100.0 * rate, violations, captured, mult)};
}

// ---------------------------------------------------------------------------
// 3. MLE rate on the log-log grid
// ---------------------------------------------------------------------------

Outcome criterion_mle_rate() {
    const MleRateReport rep = verify_mle_guarantee(3, {250, 1000, 4000, 16000}, 100);
    const bool ok = rep.passed && rep.slope >= -1.3 && rep.slope <= -0.8;
    return {ok, fmt("median-error slope %.3f (required in [-1.3, -0.8]); medians %.2e -> %.2e",
                    rep.slope, rep.median_errors.front(), rep.median_errors.back())};
}

// ---------------------------------------------------------------------------
// 4. Gap decay on the reference partial-coverage scenario
// ---------------------------------------------------------------------------

Outcome criterion_gap_decay() {
    ExperimentConfig cfg;
    cfg.experiment = "gap";
    cfg.scenario.family = "ladder";
    cfg.scenario.seed = 7;
    cfg.algorithm.iterations = 64;
    cfg.sweep.n_grid = {100, 316, 1000, 3162, 10000};
    cfg.sweep.trials = 40;

    const std::vector<GapRow> rows = run_gap_experiment(cfg, 1);
    numvec medians;
    for (std::size_t n : cfg.sweep.n_grid) {
        numvec gaps;
        for (const GapRow& r : rows)
            if (r.n == n) gaps.push_back(r.gap);
        medians.push_back(median_of(std::move(gaps)));
    }
    for (prec_t m : medians)
        if (m <= 0) return {false, fmt("a median gap vanished (%.3g); the slope is undefined", m)};
    const prec_t slope = fit_loglog_slope(cfg.sweep.n_grid, medians);
    const prec_t ratio = medians.back() / medians.front();
    const bool ok = ratio <= 0.5 && slope >= -0.8 && slope <= -0.25;
    return {ok, fmt("median gap %.4f @ n=100 -> %.4f @ n=10000 (ratio %.3f <= 0.5 required), "
                    "slope %.3f (required in [-0.8, -0.25])",
                    medians.front(), medians.back(), ratio, slope)};
}

// ---------------------------------------------------------------------------
// 5. Pessimism beats certainty equivalence under partial coverage
// ---------------------------------------------------------------------------

Outcome criterion_separation() {
    ExperimentConfig cfg;
    cfg.experiment = "separation";
    cfg.scenario.family = "trap";
    cfg.scenario.num_states = 6;
    cfg.scenario.num_actions = 3;
    cfg.scenario.horizon = 5;
    cfg.scenario.class_size = 20;
    cfg.scenario.optimists = 5;
    cfg.scenario.seed = 11;
    cfg.algorithm.iterations = 64;
    cfg.sweep.n_grid = {200};
    cfg.sweep.trials = 50;

    const std::vector<SeparationRow> rows = run_separation_experiment(cfg, 1);
    std::size_t wins = 0;
    prec_t mean_cppo = 0, mean_naive = 0;
    for (const SeparationRow& r : rows) {
        if (r.cppo_gap < r.naive_gap) ++wins;
        mean_cppo += r.cppo_gap;
        mean_naive += r.naive_gap;
    }
    mean_cppo /= prec_t(rows.size());
    mean_naive /= prec_t(rows.size());
    const bool ok = wins >= 40 && mean_cppo < mean_naive;
    return {ok, fmt("pessimism beat the naive baseline on %zu/50 paired draws (>= 40 required); "
                    "mean gap %.4f vs %.4f",
                    wins, mean_cppo, mean_naive)};
}

// ---------------------------------------------------------------------------
// 6. Bayesian gap decay and the T-sweep
// ---------------------------------------------------------------------------

Outcome criterion_bayesian_decay() {
    const std::size_t S = 4, A = 2, H = 4;
    std::mt19937_64 env_rng = make_rng(6, 0xe5f);
    const SharedEnv env = random_shared_env(env_rng, S, A, H);
    const OfflineDistribution rho = OfflineDistribution::uniform(S, A);
    const ModelPrior prior = ModelPrior::dirichlet_uniform(S, A, 1.0);

    const BayesianGapReport lo = bayesian_gap_estimate(prior, env, rho, 100, 64, 0.1, 50, 60);
    const BayesianGapReport hi = bayesian_gap_estimate(prior, env, rho, 10000, 64, 0.1, 50, 60);
    if (!(hi.mean_gap < lo.mean_gap))
        return {false, fmt("mean Bayesian gap did not decay: %.4f @ n=100 vs %.4f @ n=10000",
                           lo.mean_gap, hi.mean_gap)};

    ExperimentConfig cfg;
    cfg.experiment = "pspo_sweep";
    cfg.scenario.family = "finite";
    cfg.scenario.num_states = S;
    cfg.scenario.num_actions = A;
    cfg.scenario.horizon = H;
    cfg.scenario.class_size = 12;
    cfg.scenario.perturbation = 0.5;
    cfg.scenario.seed = 61;
    cfg.algorithm.name = "pspo";
    cfg.algorithm.prior_family = "dirichlet";
    cfg.sweep.n_grid = {10000};
    cfg.sweep.t_grid = {4, 64, 1024};
    cfg.sweep.trials = 50;
    const std::vector<PspoSweepRow> rows = run_pspo_T_sweep(cfg, 1);

    numvec med_by_t;
    for (std::size_t T : {std::size_t(4), std::size_t(64), std::size_t(1024)}) {
        numvec gaps;
        for (const PspoSweepRow& r : rows)
            if (r.T == T) gaps.push_back(r.best_iterate_gap);
        med_by_t.push_back(median_of(std::move(gaps)));
    }
    for (std::size_t i = 1; i < med_by_t.size(); ++i)
        if (med_by_t[i] > med_by_t[i - 1] + 1e-12)
            return {false, fmt("T-sweep median increased: %.5f @ T=%d -> %.5f", med_by_t[i - 1],
                               i == 1 ? 64 : 1024, med_by_t[i])};

    return {true, fmt("mean gap %.4f @ n=100 -> %.4f @ n=10000; T-sweep medians %.4f / %.4f / %.4f",
                      lo.mean_gap, hi.mean_gap, med_by_t[0], med_by_t[1], med_by_t[2])};
}

// ---------------------------------------------------------------------------
// 7. Coverage identities
// ---------------------------------------------------------------------------

Outcome criterion_coverage() {
    std::mt19937_64 rng = make_rng(7, 0xacc);
    const std::size_t S = 4, A = 3, H = 4;
    prec_t worst_order = -inf(), worst_onehot = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const SharedEnv env = random_shared_env(rng, S, A, H);
        const FiniteModelClass cls = make_finite_class(700 + rep, S, A, 8, 0.5);
        const TabularMDP truth = cls.member_mdp(env, cls.truth_index);
        const TimePolicy comparator = plan_optimal(truth).first;
        const OfflineDistribution rho = tilted_distribution(rng, S, A);

        const prec_t c = concentrability(comparator, truth, rho);
        const prec_t c_dag = refined_concentrability(cls, comparator, truth, rho);
        worst_order = std::max(worst_order, c_dag - c);

        const OccupancyMeasure occ = occupancy(truth, comparator);
        auto onehot = [&](std::size_t s, std::size_t a) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(long(S * A));
            e(long(s * A + a)) = 1.0;
            return e;
        };
        const prec_t rel = relative_condition_number(onehot, S, A, occ.average, rho.table);
        worst_onehot = std::max(worst_onehot, std::abs(rel - c));
    }
    if (worst_order > 1e-9)
        return {false, fmt("refined coefficient exceeded the density-ratio one by %.3g", worst_order)};
    if (worst_onehot > 1e-9)
        return {false, fmt("one-hot relative condition number drifted %.3g from C", worst_onehot)};

    // Degenerate prior: every Bayesian coverage draw equals the frequentist value.
    const SharedEnv env = random_shared_env(rng, S, A, H);
    const FiniteModelClass cls = make_finite_class(71, S, A, 8, 0.5);
    const TabularMDP truth = cls.member_mdp(env, cls.truth_index);
    const TimePolicy comparator = plan_optimal(truth).first;
    const OfflineDistribution rho = tilted_distribution(rng, S, A);
    const prec_t c = concentrability(comparator, truth, rho);
    const prec_t c_dag = refined_concentrability(cls, comparator, truth, rho);
    const prec_t c_d0 = initial_dist_concentrability(cls, truth, rho);
    const BayesianCoverageReport rep =
        bayesian_coverage(ModelPrior::discrete_degenerate(cls, cls.truth_index), env, rho, 12, 72);
    for (std::size_t i = 0; i < rep.c_draws.size(); ++i) {
        if (rep.c_draws[i] != c || rep.c_dagger_draws[i] != c_dag || rep.c_d0_draws[i] != c_d0)
            return {false, "a degenerate-prior coverage draw differs from the frequentist value"};
    }
    return {true, fmt("C-dagger <= C on 100 classes (max excess %.1e), one-hot drift %.1e, "
                      "degenerate-prior draws exact",
                      worst_order, worst_onehot)};
}

// ---------------------------------------------------------------------------
// 8. KNR confidence ball, ridge algebra, Gaussian l1 bound
// ---------------------------------------------------------------------------

Outcome criterion_knr() {
    const prec_t lambda = 1.0, delta = 0.1, zeta = 0.5;
    const std::size_t trials = 200, n = 200;
    std::size_t captured = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const KNRScenario sc = make_knr_scenario(800 + t, 2, 3, 2, 4, 3, zeta);
        const auto [phis, nexts] = sample_knr_transitions(sc, n, 801 + t);
        const KnrRidge fit = ridge_mle_knr(phis, nexts, lambda);
        const prec_t w_norm = std::max<prec_t>(1.0, sc.model.W.operatorNorm());
        const prec_t radius = knr_confidence_radius(lambda, w_norm, zeta, 2, delta,
                                                    knr_info_gain(fit.Sigma_n, lambda));
        const Eigen::MatrixXd reg =
            fit.Sigma_n + lambda * Eigen::MatrixXd::Identity(fit.Sigma_n.rows(), fit.Sigma_n.cols());
        if (knr_ball_distance(fit.W_hat, sc.model.W, reg) <= radius) ++captured;
    }
    if (captured < std::size_t(0.9 * prec_t(trials)))
        return {false, fmt("confidence ball captured W* in only %zu/%zu trials", captured, trials)};

    // Ridge solution against the normal equations.
    std::mt19937_64 rng = make_rng(81, 0xacc);
    std::normal_distribution<prec_t> gauss(0.0, 1.0);
    std::vector<Eigen::VectorXd> phis, nexts;
    for (int i = 0; i < 60; ++i) {
        Eigen::VectorXd p(3), x(2);
        for (long k = 0; k < 3; ++k) p(k) = gauss(rng);
        for (long k = 0; k < 2; ++k) x(k) = gauss(rng);
        phis.push_back(p);
        nexts.push_back(x);
    }
    const prec_t lam = 0.7;
    const KnrRidge fit = ridge_mle_knr(phis, nexts, lam);
    Eigen::MatrixXd gram = lam * Eigen::MatrixXd::Identity(3, 3), cross = Eigen::MatrixXd::Zero(2, 3);
    for (std::size_t i = 0; i < phis.size(); ++i) {
        gram += phis[i] * phis[i].transpose();
        cross += nexts[i] * phis[i].transpose();
    }
    const Eigen::MatrixXd direct = gram.fullPivLu().solve(cross.transpose()).transpose();
    const prec_t ridge_err = (fit.W_hat - direct).norm();
    if (ridge_err > 1e-8) return {false, fmt("ridge vs normal equations differ by %.3g", ridge_err)};

    // Gaussian l1 distance: quadrature vs the closed form, under the bound.
    prec_t worst_quad = 0;
    for (prec_t z : {0.1, 1.0, 10.0}) {
        for (prec_t sep : {0.3, 1.0, 3.0}) {
            const prec_t d = sep * z;
            const GaussianL1Check chk = gaussian_l1_bound_check({0.0}, {d}, z);
            worst_quad = std::max(worst_quad, std::abs(chk.l1 - closed_form_gaussian_l1(d, z)));
            if (chk.l1 > chk.bound + 1e-9)
                return {false, fmt("l1 %.6f exceeded the bound %.6f at zeta %.1f", chk.l1, chk.bound, z)};
        }
        const GaussianL1Check two =
            gaussian_l1_bound_check({0.0, 0.0}, {0.6 * z, 0.8 * z}, z);
        worst_quad = std::max(worst_quad, std::abs(two.l1 - closed_form_gaussian_l1(z, z)));
        if (two.l1 > two.bound + 1e-9)
            return {false, fmt("2-d l1 %.6f exceeded the bound %.6f", two.l1, two.bound)};
    }
    if (worst_quad > 1e-4)
        return {false, fmt("quadrature drifted %.3g from the closed form", worst_quad)};

    return {true, fmt("ball capture %zu/%zu at delta=0.1, ridge residual %.1e, quadrature "
                      "residual %.1e",
                      captured, trials, ridge_err, worst_quad)};
}

// ---------------------------------------------------------------------------
// 9. Max-min search agrees with exhaustive enumeration
// ---------------------------------------------------------------------------

Outcome criterion_brute_force() {
    std::mt19937_64 rng = make_rng(9, 0xacc);
    const std::size_t S = 2, A = 2, H = 2;
    prec_t worst = 0;
    std::size_t instances = 0;
    for (std::size_t members = 1; members <= 5; ++members) {
        for (int rep = 0; rep < 40; ++rep, ++instances) {
            const SharedEnv env = random_shared_env(rng, S, A, H);
            VersionSpace vs;
            vs.num_states = S;
            vs.num_actions = A;
            for (std::size_t m = 0; m < members; ++m) {
                vs.member_indices.push_back(m);
                vs.models.push_back(random_transition_table(rng, S, A));
                vs.scores.push_back(0);
            }
            const prec_t exact = brute_force_maxmin(vs, env).first;
            const CppoResult res = cppo_optimize(vs, env, 200, 0.2);
            worst = std::max(worst, std::abs(res.pessimistic_value - exact));
        }
    }
    const bool ok = worst <= 1e-6;
    return {ok, fmt("max |cppo - exhaustive| = %.3g over %zu instances (1e-6 required)", worst,
                    instances)};
}

// ---------------------------------------------------------------------------
// 10. Low-rank diagnostics bound with a calibrated multiplier
// ---------------------------------------------------------------------------

Outcome criterion_lowrank() {
    const std::size_t S = 6, A = 3, H = 5, n = 2000;
    const LowRankModelClass cls = make_low_rank_class(10, S, A, 3, 4, 4);
    std::mt19937_64 env_rng = make_rng(10, 0xe5f);
    const SharedEnv env = random_shared_env(env_rng, S, A, H);
    const FiniteModelClass flat = cls.to_finite_class();
    const TabularMDP truth = flat.member_mdp(env, flat.truth_index);
    const TimePolicy comparator = plan_optimal(truth).first;
    const TimePolicy pi_b = TimePolicy::uniform(H, S, A);
    const OfflineDistribution rho = stationary_as_offline(truth, pi_b);
    ThresholdPolicy threshold;
    threshold.rule = ThresholdRule::low_rank;

    auto run_trial = [&](std::uint64_t seed) {
        const OfflineDataset data = sample_dataset(truth, rho, n, seed);
        return lowrank_gap_diagnostics(cls, data, threshold, comparator, truth, pi_b);
    };

    // Calibrate the single bound multiplier at the 95% quantile on seeds
    // disjoint from the evaluation draws.
    numvec ratios;
    for (std::uint64_t t = 0; t < 40; ++t) {
        const LowRankDiagnostics d = run_trial(5000 + t);
        ratios.push_back(d.theorem_rhs > 0 ? std::max<prec_t>(0.0, d.gap) / d.theorem_rhs : 0.0);
    }
    std::sort(ratios.begin(), ratios.end());
    const prec_t mult = std::max(ratios[std::size_t(0.95 * prec_t(ratios.size() - 1))], 1e-12);

    std::size_t held = 0;
    bool coverage_from_truth = true;
    for (std::uint64_t t = 0; t < 100; ++t) {
        const LowRankDiagnostics d = run_trial(1 + t);
        if (d.gap <= mult * d.theorem_rhs + 1e-12) ++held;
        // The reported ingredients must match a recomputation of the bound
        // from the truth-side quantities the diagnostics expose.
        const prec_t rhs = low_rank_bound_rhs(d.xi, A, H, d.C_d0, d.rel_cond_number, d.rank_sigma_rho,
                                              d.min_pib);
        if (std::abs(rhs - d.theorem_rhs) > 1e-9 * std::max<prec_t>(1.0, std::abs(rhs)))
            coverage_from_truth = false;
    }
    const bool ok = held >= 90 && coverage_from_truth;
    return {ok, fmt("gap <= calibrated bound in %zu/100 trials (>= 90 required; multiplier %.3g)%s",
                    held, mult, coverage_from_truth ? "" : "; ingredient recomputation mismatch")};
}

} // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int number;
        const char* title;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "exact identities and conjugacy order-invariance", criterion_exactness},
        {2, "calibrated pessimism captures the truth and never overestimates", criterion_pessimism},
        {3, "finite-class MLE error decays at a near-1/n rate", criterion_mle_rate},
        {4, "pessimistic gap decays on the partial-coverage ladder", criterion_gap_decay},
        {5, "pessimism beats certainty equivalence on the trap", criterion_separation},
        {6, "Bayesian gap decays in n and the T-sweep is monotone", criterion_bayesian_decay},
        {7, "coverage identities", criterion_coverage},
        {8, "KNR confidence ball, ridge algebra, Gaussian l1 bound", criterion_knr},
        {9, "max-min search matches exhaustive enumeration", criterion_brute_force},
        {10, "low-rank gap sits below the calibrated diagnostics bound", criterion_lowrank},
    };

    std::set<int> requested;
    for (int i = 1; i < argc; ++i) {
        try {
            requested.insert(std::stoi(argv[i]));
        } catch (const std::exception&) {
            std::fprintf(stderr, "usage: %s [criterion numbers]\n", argv[0]);
            return 2;
        }
    }

    std::size_t ran = 0, passed = 0;
    for (const Criterion& c : criteria) {
        if (!requested.empty() && !requested.count(c.number)) continue;
        ++ran;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const prec_t secs =
            std::chrono::duration<prec_t>(std::chrono::steady_clock::now() - start).count();
        if (out.passed) ++passed;
        std::printf("%s criterion %d: %s: %s [%.1f s]\n", out.passed ? "PASS" : "FAIL", c.number,
                    c.title, out.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("acceptance: %zu/%zu criteria passed\n", passed, ran);
    return passed == ran ? 0 : 1;
}
