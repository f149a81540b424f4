// Config-driven experiment runners (gap-vs-n, pessimistic-vs-naive
// separation, posterior-sampling T-sweeps) and the one-shot invariant
// verification suite. All outputs are deterministic functions of
// (config, seed) regardless of the worker-thread count.
#pragma once

#include "offrl/serialize.hpp"

#include <atomic>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <thread>

namespace offrl {

// ---------------------------------------------------------------------------
// Deterministic task scheduling
// ---------------------------------------------------------------------------

namespace detail {

/// Per-task seed derivation; tasks stay reproducible under any thread count.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = splitmix64(base + 0x9e3779b97f4a7c15ULL * (a + 1));
    return splitmix64(x ^ (0x632be59bd9b4e019ULL * (b + 1)));
}

/// Work queue over [0, num_tasks). The first worker exception is rethrown
/// after all workers stop.
inline void parallel_for(std::size_t num_tasks, std::size_t threads,
                         const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || num_tasks <= 1) {
        for (std::size_t i = 0; i < num_tasks; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= num_tasks) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, num_tasks); ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// Zero means "use the default step size 0.4/H", which satisfies the strict
/// eta < 1/(2H) requirement of the incremental updates at every horizon.
inline prec_t effective_eta(prec_t eta, std::size_t horizon) {
    require(horizon > 0, "effective_eta: horizon must be positive");
    return eta > 0 ? eta : 0.4 / prec_t(horizon);
}

/// Scenario descriptor. `family` selects the generator; keys irrelevant to
/// the chosen family keep their defaults and are ignored by it.
struct ScenarioConfig {
    std::string family = "ladder"; ///< finite | trap | ladder | lowrank
    std::size_t num_states = 6;
    std::size_t num_actions = 3;
    std::size_t horizon = 5;
    std::size_t class_size = 20;
    prec_t perturbation = 0.6;   ///< finite family: largest member deviation
    std::size_t optimists = 0;   ///< trap family: 0 means class_size / 4
    std::size_t num_arms = 8;    ///< ladder family
    std::size_t rungs = 14;      ///< ladder family
    std::size_t dim = 3;         ///< lowrank family
    std::size_t num_phi = 4;     ///< lowrank family
    std::size_t num_mu = 4;      ///< lowrank family
    bool full_coverage = false;  ///< replace rho with the uniform distribution
    std::uint64_t seed = 1;
};

struct AlgorithmConfig {
    std::string name = "cppo"; ///< cppo | pspo | naive
    std::size_t iterations = 64;
    prec_t eta = 0; ///< 0 selects 0.4/H
    ThresholdPolicy threshold{};
    prec_t calibration_multiplier = 1.0; ///< folded into threshold.c1 at parse time
    std::string prior_family = "discrete"; ///< pspo: discrete | dirichlet
    bool prior_degenerate = false;         ///< pspo: point mass on the truth
    prec_t prior_concentration = 1.0;      ///< pspo: Dirichlet concentration
};

struct SweepConfig {
    sizvec n_grid = {100, 10000};
    sizvec t_grid = {1, 4, 64, 1024};
    std::size_t trials = 20;
};

struct OutputConfig {
    std::string dir = ".";
    std::string prefix;
};

struct ExperimentConfig {
    std::string experiment = "gap"; ///< gap | separation | pspo_sweep
    ScenarioConfig scenario;
    AlgorithmConfig algorithm;
    SweepConfig sweep;
    OutputConfig output;

    void validate() const {
        require(experiment == "gap" || experiment == "separation" || experiment == "pspo_sweep",
                "config: experiment \"", experiment, "\" is not one of gap | separation | pspo_sweep");
        require(scenario.family == "finite" || scenario.family == "trap" || scenario.family == "ladder" ||
                    scenario.family == "lowrank",
                "config: scenario.family \"", scenario.family,
                "\" is not one of finite | trap | ladder | lowrank");
        require(scenario.horizon >= 1, "config: scenario.horizon must be >= 1");
        require(scenario.class_size >= 2, "config: scenario.class_size must be >= 2");
        auto check_grid = [](const sizvec& grid, const char* key) {
            require(!grid.empty(), "config: sweep.", key, " is empty");
            require(grid.front() >= 1, "config: sweep.", key, " entries must be >= 1");
            for (std::size_t i = 1; i < grid.size(); ++i)
                require(grid[i] > grid[i - 1], "config: sweep.", key, " must be strictly increasing");
        };
        check_grid(sweep.n_grid, "n_grid");
        check_grid(sweep.t_grid, "t_grid");
        require(sweep.trials >= 1, "config: sweep.trials must be >= 1");
        require(algorithm.name == "cppo" || algorithm.name == "pspo" || algorithm.name == "naive",
                "config: algorithm.name \"", algorithm.name, "\" is not one of cppo | pspo | naive");
        require(algorithm.iterations >= 1, "config: algorithm.iterations must be >= 1");
        require(algorithm.eta >= 0, "config: algorithm.eta must be >= 0");
        if (algorithm.name != "naive") {
            const prec_t bound = 0.5 / prec_t(scenario.horizon);
            require(effective_eta(algorithm.eta, scenario.horizon) < bound, "config: algorithm.eta = ",
                    algorithm.eta, " must be < 1/(2H) = ", bound, " at horizon ", scenario.horizon);
        }
        require(algorithm.calibration_multiplier > 0, "config: algorithm.calibration_multiplier must be > 0");
        require(algorithm.prior_family == "discrete" || algorithm.prior_family == "dirichlet",
                "config: algorithm.prior.family \"", algorithm.prior_family,
                "\" is not one of discrete | dirichlet");
        require(algorithm.prior_concentration > 0, "config: algorithm.prior.concentration must be > 0");
        algorithm.threshold.validate();
    }
};

namespace detail {

inline void expect_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    require(j.is_object(), "config: ", path.empty() ? std::string("document") : path, " must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        require(known, "config: unknown key \"", path.empty() ? item.key() : path + "." + item.key(), "\"");
    }
}

template <typename T> T key_or(const json& j, const std::string& path, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        require(false, "config: key \"", path.empty() ? key : path + "." + key, "\": ", e.what());
        return fallback; // unreachable
    }
}

} // namespace detail

/// Strict parse: unknown keys anywhere in the document are errors reported
/// with their full key path; missing keys fall back to the defaults above.
inline ExperimentConfig parse_experiment_config(const json& j) {
    detail::expect_keys(j, "", {"experiment", "scenario", "algorithm", "sweep", "output"});
    ExperimentConfig cfg;
    cfg.experiment = detail::key_or<std::string>(j, "", "experiment", cfg.experiment);

    if (j.contains("scenario")) {
        const json& s = j["scenario"];
        detail::expect_keys(s, "scenario",
                            {"family", "num_states", "num_actions", "horizon", "class_size", "perturbation",
                             "optimists", "num_arms", "rungs", "dim", "num_phi", "num_mu", "full_coverage",
                             "seed"});
        ScenarioConfig& sc = cfg.scenario;
        sc.family = detail::key_or<std::string>(s, "scenario", "family", sc.family);
        sc.num_states = detail::key_or<std::size_t>(s, "scenario", "num_states", sc.num_states);
        sc.num_actions = detail::key_or<std::size_t>(s, "scenario", "num_actions", sc.num_actions);
        sc.horizon = detail::key_or<std::size_t>(s, "scenario", "horizon", sc.horizon);
        sc.class_size = detail::key_or<std::size_t>(s, "scenario", "class_size", sc.class_size);
        sc.perturbation = detail::key_or<prec_t>(s, "scenario", "perturbation", sc.perturbation);
        sc.optimists = detail::key_or<std::size_t>(s, "scenario", "optimists", sc.optimists);
        sc.num_arms = detail::key_or<std::size_t>(s, "scenario", "num_arms", sc.num_arms);
        sc.rungs = detail::key_or<std::size_t>(s, "scenario", "rungs", sc.rungs);
        sc.dim = detail::key_or<std::size_t>(s, "scenario", "dim", sc.dim);
        sc.num_phi = detail::key_or<std::size_t>(s, "scenario", "num_phi", sc.num_phi);
        sc.num_mu = detail::key_or<std::size_t>(s, "scenario", "num_mu", sc.num_mu);
        sc.full_coverage = detail::key_or<bool>(s, "scenario", "full_coverage", sc.full_coverage);
        sc.seed = detail::key_or<std::uint64_t>(s, "scenario", "seed", sc.seed);
    }

    if (j.contains("algorithm")) {
        const json& a = j["algorithm"];
        detail::expect_keys(a, "algorithm",
                            {"name", "iterations", "eta", "threshold", "calibration_multiplier", "prior"});
        AlgorithmConfig& al = cfg.algorithm;
        al.name = detail::key_or<std::string>(a, "algorithm", "name", al.name);
        al.iterations = detail::key_or<std::size_t>(a, "algorithm", "iterations", al.iterations);
        al.eta = detail::key_or<prec_t>(a, "algorithm", "eta", al.eta);
        al.calibration_multiplier =
            detail::key_or<prec_t>(a, "algorithm", "calibration_multiplier", al.calibration_multiplier);
        if (a.contains("threshold")) {
            const json& t = a["threshold"];
            detail::expect_keys(t, "algorithm.threshold", {"rule", "c1", "c2", "delta"});
            const std::string rule =
                detail::key_or<std::string>(t, "algorithm.threshold", "rule", "finite");
            if (rule == "finite") al.threshold.rule = ThresholdRule::finite;
            else if (rule == "tabular") al.threshold.rule = ThresholdRule::tabular;
            else if (rule == "low_rank") al.threshold.rule = ThresholdRule::low_rank;
            else
                require(false, "config: key \"algorithm.threshold.rule\": \"", rule,
                        "\" is not one of finite | tabular | low_rank");
            al.threshold.c1 = detail::key_or<prec_t>(t, "algorithm.threshold", "c1", al.threshold.c1);
            al.threshold.c2 = detail::key_or<prec_t>(t, "algorithm.threshold", "c2", al.threshold.c2);
            al.threshold.delta =
                detail::key_or<prec_t>(t, "algorithm.threshold", "delta", al.threshold.delta);
        }
        if (a.contains("prior")) {
            const json& p = a["prior"];
            detail::expect_keys(p, "algorithm.prior", {"family", "degenerate", "concentration"});
            al.prior_family = detail::key_or<std::string>(p, "algorithm.prior", "family", al.prior_family);
            al.prior_degenerate =
                detail::key_or<bool>(p, "algorithm.prior", "degenerate", al.prior_degenerate);
            al.prior_concentration =
                detail::key_or<prec_t>(p, "algorithm.prior", "concentration", al.prior_concentration);
        }
        // a calibrated threshold scale is equivalent to rescaling c1
        al.threshold.c1 *= al.calibration_multiplier;
    }

    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        detail::expect_keys(s, "sweep", {"n_grid", "t_grid", "trials"});
        cfg.sweep.n_grid = detail::key_or<sizvec>(s, "sweep", "n_grid", cfg.sweep.n_grid);
        cfg.sweep.t_grid = detail::key_or<sizvec>(s, "sweep", "t_grid", cfg.sweep.t_grid);
        cfg.sweep.trials = detail::key_or<std::size_t>(s, "sweep", "trials", cfg.sweep.trials);
    }

    if (j.contains("output")) {
        const json& o = j["output"];
        detail::expect_keys(o, "output", {"dir", "prefix"});
        cfg.output.dir = detail::key_or<std::string>(o, "output", "dir", cfg.output.dir);
        cfg.output.prefix = detail::key_or<std::string>(o, "output", "prefix", cfg.output.prefix);
    }

    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    return parse_experiment_config(read_json(path));
}

// ---------------------------------------------------------------------------
// Scenario factory
// ---------------------------------------------------------------------------

/// Everything a runner needs: the truth, the class it lives in, the offline
/// distribution, and the comparator the gap is measured against.
struct ExperimentScenario {
    TabularMDP truth;
    FiniteModelClass cls;
    OfflineDistribution rho;
    TimePolicy comparator;
};

inline ExperimentScenario make_scenario(const ScenarioConfig& cfg) {
    ExperimentScenario out;
    if (cfg.family == "finite" || cfg.family == "lowrank") {
        std::mt19937_64 env_rng = make_rng(cfg.seed, 0xe5f);
        const SharedEnv env = random_shared_env(env_rng, cfg.num_states, cfg.num_actions, cfg.horizon);
        if (cfg.family == "finite")
            out.cls = make_finite_class(cfg.seed, cfg.num_states, cfg.num_actions, cfg.class_size,
                                        cfg.perturbation);
        else
            out.cls = make_low_rank_class(cfg.seed, cfg.num_states, cfg.num_actions, cfg.dim, cfg.num_phi,
                                          cfg.num_mu)
                          .to_finite_class();
        out.truth = out.cls.member_mdp(env, out.cls.truth_index);
        out.rho = OfflineDistribution::uniform(cfg.num_states, cfg.num_actions);
        out.comparator = plan_optimal(out.truth).first;
    } else if (cfg.family == "trap") {
        auto [mdp, rho, comparator] =
            make_partial_coverage_instance(cfg.seed, cfg.num_states, cfg.num_actions, cfg.horizon);
        out.truth = std::move(mdp);
        out.rho = std::move(rho);
        out.comparator = std::move(comparator);
        const std::size_t optimists =
            cfg.optimists > 0 ? cfg.optimists : std::max<std::size_t>(1, cfg.class_size / 4);
        out.cls = make_trap_class(out.truth, cfg.seed, cfg.class_size, optimists);
    } else if (cfg.family == "ladder") {
        LadderScenario ls = make_gap_ladder_scenario(cfg.seed, cfg.num_arms, cfg.rungs, cfg.horizon);
        out.truth = std::move(ls.truth);
        out.cls = std::move(ls.model_class);
        out.rho = std::move(ls.rho);
        out.comparator = std::move(ls.comparator);
    } else {
        require(false, "make_scenario: unknown family \"", cfg.family, "\"");
    }
    if (cfg.full_coverage)
        out.rho = OfflineDistribution::uniform(out.truth.num_states, out.truth.num_actions);
    return out;
}

// ---------------------------------------------------------------------------
// Gap-vs-n experiment
// ---------------------------------------------------------------------------

struct GapRow {
    std::size_t n = 0;
    std::size_t trial = 0;
    prec_t gap = 0;
    prec_t xi = 0;
    std::size_t version_space_size = 0;
    bool truth_in_space = false;
};

/// One row per (n, trial): draw a dataset, run the configured algorithm, and
/// score the exact gap against the comparator under the truth. For "pspo" the
/// version-space columns report the posterior support instead (zero when the
/// prior family has no finite support).
inline std::vector<GapRow> run_gap_experiment(const ExperimentConfig& config, std::size_t threads = 1) {
    config.validate();
    const ExperimentScenario sc = make_scenario(config.scenario);
    const SharedEnv env = sc.truth.shared();
    const prec_t v_star = evaluate_policy(sc.truth, sc.comparator).value;
    const prec_t eta = effective_eta(config.algorithm.eta, env.horizon);
    const AlgorithmConfig& alg = config.algorithm;
    const std::size_t trials = config.sweep.trials;

    std::vector<GapRow> rows(config.sweep.n_grid.size() * trials);
    detail::parallel_for(rows.size(), threads, [&](std::size_t task) {
        const std::size_t gi = task / trials, trial = task % trials;
        const std::size_t n = config.sweep.n_grid[gi];
        const std::uint64_t dseed = detail::mix_seed(config.scenario.seed, gi + 1, trial + 1);
        const OfflineDataset data = sample_dataset(sc.truth, sc.rho, n, dseed);

        GapRow row;
        row.n = n;
        row.trial = trial;
        if (alg.name == "naive") {
            const std::size_t pick = mle_finite(sc.cls, data).index;
            const TimePolicy policy = plan_optimal(sc.cls.member_mdp(env, pick)).first;
            row.gap = v_star - evaluate_policy(sc.truth, policy).value;
            row.version_space_size = 1;
            row.truth_in_space = pick == sc.cls.truth_index;
        } else if (alg.name == "cppo") {
            const prec_t xi = alg.threshold.xi_for_class(n, sc.cls);
            const VersionSpace vs = build_version_space(sc.cls, data, xi);
            const CppoResult res = cppo_optimize(vs, env, alg.iterations, eta);
            row.gap = v_star - evaluate_policy(sc.truth, res.policy).value;
            row.xi = xi;
            row.version_space_size = vs.size();
            row.truth_in_space = vs.contains(sc.cls.truth_index);
        } else { // pspo
            ModelPrior prior = alg.prior_family == "dirichlet"
                                   ? ModelPrior::dirichlet_uniform(env.num_states, env.num_actions,
                                                                   alg.prior_concentration)
                                   : (alg.prior_degenerate
                                          ? ModelPrior::discrete_degenerate(sc.cls, sc.cls.truth_index)
                                          : ModelPrior::discrete_uniform(sc.cls));
            const ModelPosterior post = posterior_update(prior, data);
            PspoResult res = pspo_run(post, env, alg.iterations, eta, detail::mix_seed(dseed, 0x50, 0));
            row.gap = v_star - evaluate_iterates_under_truth(res, sc.truth).first;
            if (post.params.family == PriorFamily::discrete) {
                for (std::size_t i = 0; i < post.params.weights.size(); ++i)
                    if (post.params.weights[i] > 1e-12) ++row.version_space_size;
                row.truth_in_space = post.params.weights[sc.cls.truth_index] > 1e-12;
            }
        }
        rows[task] = row;
    });

    std::stable_sort(rows.begin(), rows.end(), [](const GapRow& a, const GapRow& b) {
        return a.n != b.n ? a.n < b.n : a.trial < b.trial;
    });
    return rows;
}

inline void write_gap_csv(const std::string& path, const std::vector<GapRow>& rows) {
    CsvWriter csv(path, {"n", "trial", "gap", "xi", "version_space_size", "truth_in_space"});
    for (const GapRow& r : rows) csv.row(r.n, r.trial, r.gap, r.xi, r.version_space_size, r.truth_in_space);
    csv.close();
}

// ---------------------------------------------------------------------------
// Separation experiment (pessimism vs certainty equivalence)
// ---------------------------------------------------------------------------

struct SeparationRow {
    std::size_t n = 0;
    std::size_t trial = 0;
    prec_t cppo_gap = 0;
    prec_t naive_gap = 0;
};

/// Paired draws: each trial's dataset feeds both the pessimistic search and
/// the certainty-equivalent baseline, so their gaps share all randomness.
inline std::vector<SeparationRow> run_separation_experiment(const ExperimentConfig& config,
                                                            std::size_t threads = 1) {
    config.validate();
    require(config.scenario.family == "trap",
            "run_separation_experiment: scenario.family must be \"trap\", got \"", config.scenario.family,
            "\"");
    const ExperimentScenario sc = make_scenario(config.scenario);
    const SharedEnv env = sc.truth.shared();
    const prec_t v_star = evaluate_policy(sc.truth, sc.comparator).value;
    const prec_t eta = effective_eta(config.algorithm.eta, env.horizon);
    const AlgorithmConfig& alg = config.algorithm;
    const std::size_t trials = config.sweep.trials;

    std::vector<SeparationRow> rows(config.sweep.n_grid.size() * trials);
    detail::parallel_for(rows.size(), threads, [&](std::size_t task) {
        const std::size_t gi = task / trials, trial = task % trials;
        const std::size_t n = config.sweep.n_grid[gi];
        const std::uint64_t dseed = detail::mix_seed(config.scenario.seed, 0x5e9a00 + gi, trial + 1);
        const OfflineDataset data = sample_dataset(sc.truth, sc.rho, n, dseed);

        const prec_t xi = alg.threshold.xi_for_class(n, sc.cls);
        const VersionSpace vs = build_version_space(sc.cls, data, xi);
        const CppoResult res = cppo_optimize(vs, env, alg.iterations, eta);
        const TimePolicy naive = naive_certainty_equivalent(sc.cls, env, data);

        rows[task] = SeparationRow{n, trial, v_star - evaluate_policy(sc.truth, res.policy).value,
                                   v_star - evaluate_policy(sc.truth, naive).value};
    });

    std::stable_sort(rows.begin(), rows.end(), [](const SeparationRow& a, const SeparationRow& b) {
        return a.n != b.n ? a.n < b.n : a.trial < b.trial;
    });
    return rows;
}

inline void write_separation_csv(const std::string& path, const std::vector<SeparationRow>& rows) {
    CsvWriter csv(path, {"n", "trial", "cppo_gap", "naive_gap"});
    for (const SeparationRow& r : rows) csv.row(r.n, r.trial, r.cppo_gap, r.naive_gap);
    csv.close();
}

// ---------------------------------------------------------------------------
// Posterior-sampling T-sweep
// ---------------------------------------------------------------------------

struct PspoSweepRow {
    std::size_t T = 0;
    std::size_t trial = 0;
    prec_t best_iterate_gap = 0;
};

/// Per trial: one dataset, one posterior, one trajectory at the largest T;
/// smaller T values read prefixes of that trajectory (the iteration draws are
/// sequential, so a prefix equals a shorter run with the same seed). A T = 1
/// checkpoint is always included.
inline std::vector<PspoSweepRow> run_pspo_T_sweep(const ExperimentConfig& config, std::size_t threads = 1) {
    config.validate();
    sizvec grid = config.sweep.t_grid;
    grid.push_back(1);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const std::size_t t_max = grid.back();

    const ExperimentScenario sc = make_scenario(config.scenario);
    const SharedEnv env = sc.truth.shared();
    const prec_t v_star = evaluate_policy(sc.truth, sc.comparator).value;
    const prec_t eta = effective_eta(config.algorithm.eta, env.horizon);
    const AlgorithmConfig& alg = config.algorithm;
    const std::size_t trials = config.sweep.trials;
    const std::size_t n = config.sweep.n_grid.back();

    std::vector<PspoSweepRow> rows(grid.size() * trials);
    detail::parallel_for(trials, threads, [&](std::size_t trial) {
        const std::uint64_t dseed = detail::mix_seed(config.scenario.seed, 0x75e000, trial + 1);
        const OfflineDataset data = sample_dataset(sc.truth, sc.rho, n, dseed);
        ModelPrior prior = alg.prior_family == "dirichlet"
                               ? ModelPrior::dirichlet_uniform(env.num_states, env.num_actions,
                                                               alg.prior_concentration)
                               : (alg.prior_degenerate
                                      ? ModelPrior::discrete_degenerate(sc.cls, sc.cls.truth_index)
                                      : ModelPrior::discrete_uniform(sc.cls));
        const ModelPosterior post = posterior_update(prior, data);
        PspoResult res = pspo_run(post, env, t_max, eta, detail::mix_seed(dseed, 0x50, 1));
        evaluate_iterates_under_truth(res, sc.truth);

        prec_t best = -inf();
        std::size_t gi = 0;
        for (std::size_t t = 0; t < res.values_under_truth.size(); ++t) {
            best = std::max(best, res.values_under_truth[t]);
            while (gi < grid.size() && grid[gi] == t) {
                rows[gi * trials + trial] = PspoSweepRow{grid[gi], trial, v_star - best};
                ++gi;
            }
        }
        require(gi == grid.size(), "run_pspo_T_sweep: trajectory shorter than the sweep grid");
    });

    std::stable_sort(rows.begin(), rows.end(), [](const PspoSweepRow& a, const PspoSweepRow& b) {
        return a.T != b.T ? a.T < b.T : a.trial < b.trial;
    });
    return rows;
}

inline void write_pspo_sweep_csv(const std::string& path, const std::vector<PspoSweepRow>& rows) {
    CsvWriter csv(path, {"T", "trial", "best_iterate_gap"});
    for (const PspoSweepRow& r : rows) csv.row(r.T, r.trial, r.best_iterate_gap);
    csv.close();
}

// ---------------------------------------------------------------------------
// Exhaustive max-min reference
// ---------------------------------------------------------------------------

/// Max over all deterministic time-indexed policies of the min over version-
/// space members, by full enumeration; tractable only at toy sizes and used
/// as the ground truth for the max-min search.
inline std::pair<prec_t, TimePolicy> brute_force_maxmin(const VersionSpace& vs, const SharedEnv& env) {
    require(vs.size() > 0, "brute_force_maxmin: empty version space");
    const std::size_t S = env.num_states, A = env.num_actions, H = env.horizon;
    const std::size_t cells = H * S;
    const prec_t combos = std::pow(prec_t(A), prec_t(cells));
    require(combos <= 2e6, "brute_force_maxmin: ", combos, " deterministic policies is beyond enumeration");

    std::vector<TabularMDP> members;
    for (const numvec& m : vs.models) members.push_back(make_mdp(env, m));

    sizvec actions(cells, 0);
    prec_t best = -inf();
    TimePolicy best_policy;
    while (true) {
        const TimePolicy policy = TimePolicy::deterministic(H, S, A, actions);
        prec_t worst = inf();
        for (const TabularMDP& m : members) worst = std::min(worst, evaluate_policy(m, policy).value);
        if (worst > best) {
            best = worst;
            best_policy = policy;
        }
        std::size_t c = 0;
        while (c < cells && ++actions[c] == A) {
            actions[c] = 0;
            ++c;
        }
        if (c == cells) break;
    }
    return {best, std::move(best_policy)};
}

// ---------------------------------------------------------------------------
// Invariant verification suite
// ---------------------------------------------------------------------------

struct VerifyEntry {
    std::string name;
    bool passed = false;
    prec_t slack = 0; ///< distance to the failure boundary; >= 0 iff passed
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyEntry> entries;

    bool all_passed() const {
        return std::all_of(entries.begin(), entries.end(), [](const VerifyEntry& e) { return e.passed; });
    }
    std::size_t failed_count() const {
        return std::size_t(
            std::count_if(entries.begin(), entries.end(), [](const VerifyEntry& e) { return !e.passed; }));
    }
};

/// Runs every module's invariant checks at desk scale. Each entry reports the
/// observed slack: how far the quantity sat from the failure boundary (checks
/// that are wholly boolean, including the deliberate-failure probes, use +-1).
inline VerifyReport verify_all(std::uint64_t seed) {
    VerifyReport report;
    auto check = [&](const char* name, const std::function<std::pair<prec_t, std::string>()>& body) {
        try {
            auto [slack, detail] = body();
            report.entries.push_back({name, slack >= 0, slack, std::move(detail)});
        } catch (const std::exception& e) {
            report.entries.push_back({name, false, -1.0, msg("exception: ", e.what())});
        }
    };
    std::mt19937_64 rng = make_rng(seed, 0x5e71f);
    const std::size_t S = 4, A = 3, H = 4;

    // shared fixtures
    std::mt19937_64 fixture_rng = make_rng(seed, 0xf1c5);
    const SharedEnv env = random_shared_env(fixture_rng, S, A, H);
    const TabularMDP mdp = make_mdp(env, random_transition_table(fixture_rng, S, A));
    const TimePolicy policy = random_policy(fixture_rng, H, S, A);

    check("mdp-transition-rows-stochastic", [&]() -> std::pair<prec_t, std::string> {
        const numvec table = random_transition_table(rng, 5, 3);
        prec_t dev = 0;
        for (std::size_t row = 0; row < 5 * 3; ++row) {
            prec_t total = 0;
            for (std::size_t sp = 0; sp < 5; ++sp) total += table[row * 5 + sp];
            dev = std::max(dev, std::abs(total - 1.0));
        }
        return {PROB_TOL - dev, msg("max |row sum - 1| = ", dev)};
    });

    check("policy-rows-stochastic", [&]() -> std::pair<prec_t, std::string> {
        const TimePolicy p = random_policy(rng, H, S, A);
        prec_t dev = 0;
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t s = 0; s < S; ++s) {
                prec_t total = 0;
                for (std::size_t a = 0; a < A; ++a) total += p.pi(h, s, a);
                dev = std::max(dev, std::abs(total - 1.0));
            }
        return {PROB_TOL - dev, msg("max |row sum - 1| = ", dev)};
    });

    check("occupancy-per-step-normalized", [&]() -> std::pair<prec_t, std::string> {
        const OccupancyMeasure occ = occupancy(mdp, policy);
        prec_t dev = 0;
        for (std::size_t h = 0; h < H; ++h) {
            prec_t total = 0;
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a) total += occ.d(h, s, a);
            dev = std::max(dev, std::abs(total - 1.0));
        }
        return {1e-9 - dev, msg("max per-step mass deviation = ", dev)};
    });

    check("occupancy-average-consistency", [&]() -> std::pair<prec_t, std::string> {
        const OccupancyMeasure occ = occupancy(mdp, policy);
        prec_t dev = 0;
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a) {
                prec_t mean = 0;
                for (std::size_t h = 0; h < H; ++h) mean += occ.d(h, s, a) / prec_t(H);
                dev = std::max(dev, std::abs(mean - occ.avg(s, a)));
            }
        return {1e-12 - dev, msg("max |average - mean(per_step)| = ", dev)};
    });

    check("performance-difference-identity", [&]() -> std::pair<prec_t, std::string> {
        prec_t dev = 0;
        for (std::size_t trial = 0; trial < 20; ++trial) {
            const TabularMDP m = make_mdp(env, random_transition_table(rng, S, A));
            const TimePolicy pi1 = random_policy(rng, H, S, A), pi2 = random_policy(rng, H, S, A);
            const prec_t lhs = evaluate_policy(m, pi1).value - evaluate_policy(m, pi2).value;
            const OccupancyMeasure occ = occupancy(m, pi1);
            const ValueTriple val2 = evaluate_policy(m, pi2);
            prec_t rhs = 0;
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t s = 0; s < S; ++s)
                    for (std::size_t a = 0; a < A; ++a) rhs += occ.d(h, s, a) * val2.A(h, s, a);
            dev = std::max(dev, std::abs(lhs - rhs));
        }
        return {1e-9 - dev, msg("max identity residual over 20 triples = ", dev)};
    });

    check("simulation-lemma-bound", [&]() -> std::pair<prec_t, std::string> {
        prec_t margin = inf();
        for (std::size_t trial = 0; trial < 50; ++trial) {
            const TabularMDP m1 = make_mdp(env, random_transition_table(rng, S, A));
            const TabularMDP m2 = make_mdp(env, random_transition_table(rng, S, A));
            const auto [gap, bound] = simulation_gap_bound(m1, m2, random_policy(rng, H, S, A));
            margin = std::min(margin, bound - gap);
        }
        return {margin + 1e-12, msg("min (bound - gap) over 50 triples = ", margin)};
    });

    check("value-within-horizon-bounds", [&]() -> std::pair<prec_t, std::string> {
        prec_t margin = inf();
        for (std::size_t trial = 0; trial < 10; ++trial) {
            const prec_t v = evaluate_policy(mdp, random_policy(rng, H, S, A)).value;
            margin = std::min({margin, v, prec_t(H) - v});
        }
        return {margin + 1e-12, msg("min distance of values to [0, H] edges = ", margin)};
    });

    check("planner-dominates-random-policies", [&]() -> std::pair<prec_t, std::string> {
        const prec_t opt = plan_optimal(mdp).second;
        prec_t margin = inf();
        for (std::size_t trial = 0; trial < 10; ++trial)
            margin = std::min(margin, opt - evaluate_policy(mdp, random_policy(rng, H, S, A)).value);
        return {margin + 1e-12, msg("min (optimal - random policy value) = ", margin)};
    });

    auto random_advantage = [&]() {
        ValueTriple adv{H, S, A, numvec(H * S, 0.0), numvec(H * S * A, 0.0), numvec(H * S * A), 0.0};
        std::normal_distribution<prec_t> gauss(0.0, 1.0);
        for (prec_t& x : adv.adv) x = gauss(rng);
        return adv;
    };

    check("npg-shift-invariance", [&]() -> std::pair<prec_t, std::string> {
        const ValueTriple adv = random_advantage();
        ValueTriple shifted = adv;
        for (prec_t& x : shifted.adv) x += 3.7;
        const TimePolicy p1 = npg_step(policy, adv, 0.1), p2 = npg_step(policy, shifted, 0.1);
        prec_t dev = 0;
        for (std::size_t i = 0; i < p1.action_probs.size(); ++i)
            dev = std::max(dev, std::abs(p1.action_probs[i] - p2.action_probs[i]));
        return {1e-12 - dev, msg("max row difference after a constant shift = ", dev)};
    });

    check("npg-simplex-preservation", [&]() -> std::pair<prec_t, std::string> {
        const TimePolicy p = npg_step(policy, random_advantage(), 0.1);
        p.validate();
        prec_t dev = 0;
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t s = 0; s < S; ++s) {
                prec_t total = 0;
                for (std::size_t a = 0; a < A; ++a) total += p.pi(h, s, a);
                dev = std::max(dev, std::abs(total - 1.0));
            }
        return {PROB_TOL - dev, msg("max |row sum - 1| after update = ", dev)};
    });

    check("npg-zero-advantage-fixed-point", [&]() -> std::pair<prec_t, std::string> {
        ValueTriple zero{H, S, A, numvec(H * S, 0.0), numvec(H * S * A, 0.0), numvec(H * S * A, 0.0), 0.0};
        const TimePolicy guess = TimePolicy::uniform(H, S, A);
        const TimePolicy next = npg_step(guess, zero, 0.1);
        prec_t dev = 0;
        for (std::size_t i = 0; i < next.action_probs.size(); ++i)
            dev = std::max(dev, std::abs(next.action_probs[i] - 1.0 / prec_t(A)));
        return {1e-14 - dev, msg("max deviation from uniform = ", dev)};
    });

    // estimation fixtures: a seeded class with the truth at index 0
    const FiniteModelClass cls = make_finite_class(seed + 11, S, 2, 6, 0.5);
    std::mt19937_64 env_rng2 = make_rng(seed + 11, 0xe5f);
    const SharedEnv env2 = random_shared_env(env_rng2, S, 2, 3);
    const TabularMDP truth2 = cls.member_mdp(env2, cls.truth_index);
    const OfflineDistribution rho2 = OfflineDistribution::uniform(S, 2);
    const OfflineDataset data2 = sample_dataset(truth2, rho2, 4000, detail::mix_seed(seed, 2, 2));
    const TransitionCounts counts2 = count_transitions(data2, S, 2);

    check("mle-selects-truth-at-large-n", [&]() -> std::pair<prec_t, std::string> {
        const std::size_t pick = mle_finite(cls, counts2).index;
        return {pick == cls.truth_index ? 1.0 : -1.0,
                msg("selected member ", pick, ", truth is ", cls.truth_index, " (n = 4000)")};
    });

    check("version-space-captures-truth", [&]() -> std::pair<prec_t, std::string> {
        const numvec& anchor = cls.models[mle_finite(cls, counts2).index];
        const prec_t score = empirical_l1sq(counts2, anchor, cls.models[cls.truth_index]);
        const VersionSpace vs = build_version_space(cls, counts2, 2 * score + 1e-6);
        require(vs.contains(cls.truth_index), "truth not captured at a generous threshold");
        return {vs.xi - score, msg("xi - truth score = ", vs.xi - score)};
    });

    check("version-space-monotone-in-threshold", [&]() -> std::pair<prec_t, std::string> {
        const prec_t xi = 0.01;
        const std::size_t small = build_version_space(cls, counts2, xi).size();
        const std::size_t large = build_version_space(cls, counts2, 4 * xi).size();
        return {prec_t(large) - prec_t(small),
                msg("|M(xi)| = ", small, ", |M(4 xi)| = ", large)};
    });

    const VersionSpace vs_all = build_version_space(cls, counts2, inf());

    check("pessimistic-value-lower-bound", [&]() -> std::pair<prec_t, std::string> {
        prec_t margin = inf();
        for (std::size_t trial = 0; trial < 10; ++trial) {
            const TimePolicy probe = random_policy(rng, 3, S, 2);
            margin = std::min(margin, evaluate_policy(truth2, probe).value -
                                          pessimistic_value(vs_all, env2, probe).first);
        }
        return {margin + 1e-12, msg("min (true value - pessimistic value) over 10 probes = ", margin)};
    });

    check("cppo-best-iterate-dominates-uniform-lcb", [&]() -> std::pair<prec_t, std::string> {
        const CppoResult res = cppo_optimize(vs_all, env2, 16, 0.4 / 3.0);
        const prec_t base = pessimistic_value(vs_all, env2, TimePolicy::uniform(3, S, 2)).first;
        return {res.pessimistic_value - base + 1e-12,
                msg("best LCB ", res.pessimistic_value, " vs uniform LCB ", base)};
    });

    check("cppo-matches-brute-force-small", [&]() -> std::pair<prec_t, std::string> {
        const FiniteModelClass tiny = make_finite_class(seed + 29, 2, 2, 4, 0.8);
        std::mt19937_64 tiny_rng = make_rng(seed + 29, 0xe5f);
        const SharedEnv tiny_env = random_shared_env(tiny_rng, 2, 2, 2);
        const TransitionCounts tc =
            count_transitions(sample_dataset(tiny.member_mdp(tiny_env, 0), OfflineDistribution::uniform(2, 2),
                                             60, detail::mix_seed(seed, 3, 3)),
                              2, 2);
        const VersionSpace tiny_vs = build_version_space(tiny, tc, inf());
        const prec_t search = cppo_optimize(tiny_vs, tiny_env, 128, 0.2).pessimistic_value;
        const prec_t exact = brute_force_maxmin(tiny_vs, tiny_env).first;
        return {1e-6 - std::abs(search - exact),
                msg("search ", search, " vs exhaustive ", exact, " (4 members, 16 policies)")};
    });

    check("dirichlet-conjugacy-order-invariance", [&]() -> std::pair<prec_t, std::string> {
        const ModelPrior prior = ModelPrior::dirichlet_uniform(S, 2, 1.0);
        OfflineDataset front, back;
        front.records.assign(data2.records.begin(), data2.records.begin() + 20);
        back.records.assign(data2.records.begin() + 20, data2.records.begin() + 40);
        OfflineDataset both;
        both.records.assign(data2.records.begin(), data2.records.begin() + 40);
        const ModelPosterior sequential = posterior_update(posterior_update(prior, front).params, back);
        const ModelPosterior batch = posterior_update(prior, both);
        prec_t dev = 0;
        for (std::size_t i = 0; i < batch.params.alpha.size(); ++i)
            dev = std::max(dev, std::abs(batch.params.alpha[i] - sequential.params.alpha[i]));
        return {1e-10 - dev, msg("max |alpha_batch - alpha_sequential| = ", dev)};
    });

    // shared regression fixture for the matrix-normal and ridge checks
    std::vector<Eigen::VectorXd> phis, nexts;
    {
        std::normal_distribution<prec_t> gauss(0.0, 1.0);
        Eigen::MatrixXd w_true(2, 3);
        for (long i = 0; i < 2; ++i)
            for (long j = 0; j < 3; ++j) w_true(i, j) = 0.4 * gauss(rng);
        for (std::size_t k = 0; k < 30; ++k) {
            Eigen::VectorXd phi(3);
            for (long i = 0; i < 3; ++i) phi(i) = gauss(rng);
            Eigen::VectorXd next = w_true * phi;
            for (long i = 0; i < 2; ++i) next(i) += 0.5 * gauss(rng);
            phis.push_back(std::move(phi));
            nexts.push_back(std::move(next));
        }
    }

    check("matrix-normal-conjugacy-order-invariance", [&]() -> std::pair<prec_t, std::string> {
        const ModelPrior prior = ModelPrior::matrix_normal(Eigen::MatrixXd::Zero(2, 3), 0.5, 1.0);
        const std::vector<Eigen::VectorXd> pa(phis.begin(), phis.begin() + 15);
        const std::vector<Eigen::VectorXd> pb(phis.begin() + 15, phis.end());
        const std::vector<Eigen::VectorXd> na(nexts.begin(), nexts.begin() + 15);
        const std::vector<Eigen::VectorXd> nb(nexts.begin() + 15, nexts.end());
        const ModelPosterior sequential = posterior_update(posterior_update(prior, pa, na).params, pb, nb);
        const ModelPosterior batch = posterior_update(prior, phis, nexts);
        const prec_t dev = (batch.params.mean_w() - sequential.params.mean_w()).cwiseAbs().maxCoeff();
        return {1e-10 - dev, msg("max posterior-mean deviation = ", dev)};
    });

    check("matrix-normal-mean-matches-ridge", [&]() -> std::pair<prec_t, std::string> {
        const ModelPrior prior = ModelPrior::matrix_normal(Eigen::MatrixXd::Zero(2, 3), 0.5, 1.0);
        const Eigen::MatrixXd mean = posterior_update(prior, phis, nexts).params.mean_w();
        const Eigen::MatrixXd ridge = ridge_mle_knr(phis, nexts, 1.0).W_hat;
        const prec_t dev = (mean - ridge).cwiseAbs().maxCoeff();
        return {1e-8 - dev, msg("max |posterior mean - ridge| = ", dev)};
    });

    check("knr-ball-contains-truth", [&]() -> std::pair<prec_t, std::string> {
        const KNRScenario sc = make_knr_scenario(seed + 41, 3, 4, 2, 2, 5, 0.5);
        const auto [kphis, knexts] = sample_knr_transitions(sc, 400, detail::mix_seed(seed, 4, 4));
        const prec_t lambda = 1.0;
        const KnrRidge fit = ridge_mle_knr(kphis, knexts, lambda);
        const prec_t info = knr_info_gain(fit.Sigma_n, lambda);
        const prec_t xi = knr_confidence_radius(lambda, 1.0, sc.model.noise_sigma, 3, 0.1, info);
        const Eigen::MatrixXd reg =
            fit.Sigma_n + lambda * Eigen::MatrixXd::Identity(fit.Sigma_n.rows(), fit.Sigma_n.cols());
        const prec_t dist = knr_ball_distance(fit.W_hat, sc.model.W, reg);
        return {xi - dist, msg("radius ", xi, " vs truth distance ", dist, " (n = 400)")};
    });

    check("gaussian-l1-quadrature-bound", [&]() -> std::pair<prec_t, std::string> {
        prec_t margin = inf();
        for (const prec_t zeta : {0.5, 2.0}) {
            const GaussianL1Check one = gaussian_l1_bound_check({0.4}, {-0.1}, zeta);
            const GaussianL1Check two = gaussian_l1_bound_check({0.3, -0.2}, {-0.1, 0.25}, zeta);
            margin = std::min({margin, one.bound - one.l1, two.bound - two.l1});
        }
        return {margin, msg("min (bound - l1) over dims {1,2} x zeta {0.5,2} = ", margin)};
    });

    check("refined-concentrability-at-most-density-ratio", [&]() -> std::pair<prec_t, std::string> {
        prec_t margin = inf();
        for (std::size_t trial = 0; trial < 8; ++trial) {
            const FiniteModelClass c = make_finite_class(seed + 100 + trial, S, 2, 5, 0.5);
            std::mt19937_64 er = make_rng(seed + 100 + trial, 0xe5f);
            const TabularMDP t = c.member_mdp(random_shared_env(er, S, 2, 3), c.truth_index);
            const OfflineDistribution rho = OfflineDistribution::uniform(S, 2);
            const TimePolicy comp = plan_optimal(t).first;
            margin = std::min(margin, concentrability(comp, t, rho) - refined_concentrability(c, comp, t, rho));
        }
        return {margin + 1e-12, msg("min (C - C_dagger) over 8 classes = ", margin)};
    });

    check("onehot-relcond-matches-density-ratio", [&]() -> std::pair<prec_t, std::string> {
        const OccupancyMeasure occ = occupancy(truth2, plan_optimal(truth2).first);
        const OneHotFeature onehot{S, 2};
        const prec_t rel = relative_condition_number(
            [&](std::size_t s, std::size_t a) { return onehot(s, a); }, S, 2, occ.average, rho2.table);
        const prec_t c = concentrability(plan_optimal(truth2).first, truth2, rho2);
        return {1e-9 - std::abs(rel - c), msg("relative condition number ", rel, " vs density C ", c)};
    });

    check("degenerate-prior-matches-frequentist", [&]() -> std::pair<prec_t, std::string> {
        const ModelPrior prior = ModelPrior::discrete_degenerate(cls, cls.truth_index);
        const BayesianCoverageReport bayes = bayesian_coverage(prior, env2, rho2, 10, seed);
        const CoverageReport freq = make_coverage_report(cls, plan_optimal(truth2).first, truth2, rho2);
        prec_t dev = 0;
        for (const prec_t c : bayes.c_draws) dev = std::max(dev, std::abs(c - freq.density_ratio_C));
        for (const prec_t c : bayes.c_dagger_draws) dev = std::max(dev, std::abs(c - freq.refined_C_dagger));
        return {dev == 0 ? 0.0 : -dev, msg("max deviation across draws = ", dev, " (must be exactly 0)")};
    });

    check("threshold-decreasing-in-n", [&]() -> std::pair<prec_t, std::string> {
        const ThresholdPolicy rule{};
        const prec_t hi = rule.xi_finite(100, 10), lo = rule.xi_finite(1000, 10);
        return {hi - lo, msg("xi(n=100) = ", hi, ", xi(n=1000) = ", lo)};
    });

    check("dataset-jsonl-roundtrip", [&]() -> std::pair<prec_t, std::string> {
        const auto path = (std::filesystem::temp_directory_path() / "offrl_verify_dataset.jsonl").string();
        write_dataset(path, data2);
        const OfflineDataset loaded = read_dataset(path);
        std::filesystem::remove(path);
        bool equal = loaded.seed == data2.seed && loaded.source == data2.source &&
                     loaded.records.size() == data2.records.size();
        for (std::size_t i = 0; equal && i < loaded.records.size(); ++i)
            equal = loaded.records[i].s == data2.records[i].s && loaded.records[i].a == data2.records[i].a &&
                    loaded.records[i].sp == data2.records[i].sp && loaded.records[i].r == data2.records[i].r;
        return {equal ? 1.0 : -1.0, msg(loaded.records.size(), " records restored bit-exactly")};
    });

    check("mdp-json-roundtrip", [&]() -> std::pair<prec_t, std::string> {
        const TabularMDP restored = mdp_from_json(mdp_to_json(truth2));
        prec_t dev = 0;
        for (std::size_t i = 0; i < truth2.transition.size(); ++i)
            dev = std::max(dev, std::abs(restored.transition[i] - truth2.transition[i]));
        for (std::size_t i = 0; i < truth2.reward.size(); ++i)
            dev = std::max(dev, std::abs(restored.reward[i] - truth2.reward[i]));
        return {dev == 0 ? 0.0 : -dev, msg("max field deviation = ", dev, " (must be exactly 0)")};
    });

    check("corrupt-transition-detected", [&]() -> std::pair<prec_t, std::string> {
        TabularMDP broken = truth2;
        broken.transition[broken.tidx(1, 0, 0)] += 0.25;
        try {
            broken.validate();
            return {-1.0, "corrupted row passed validation"};
        } catch (const std::exception& e) {
            const std::string what = e.what();
            const bool named = what.find("s=1") != std::string::npos && what.find("a=0") != std::string::npos;
            return {named ? 1.0 : -1.0, msg("rejected with: ", what)};
        }
    });

    check("pspo-rejects-eta-at-bound", [&]() -> std::pair<prec_t, std::string> {
        const ModelPosterior post = posterior_update(ModelPrior::discrete_uniform(cls), data2);
        try {
            pspo_run(post, env2, 1, 0.5 / prec_t(env2.horizon), seed);
            return {-1.0, "step size at 1/(2H) was accepted"};
        } catch (const std::exception& e) {
            return {1.0, msg("rejected with: ", e.what())};
        }
    });

    return report;
}

inline std::string format_verify_report(const VerifyReport& report) {
    std::size_t width = 0;
    for (const VerifyEntry& e : report.entries) width = std::max(width, e.name.size());
    std::ostringstream out;
    for (const VerifyEntry& e : report.entries) {
        char slack[32];
        std::snprintf(slack, sizeof slack, "%.3g", e.slack);
        out << (e.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(int(width) + 2) << e.name
            << " slack " << std::setw(10) << slack << " " << e.detail << "\n";
    }
    out << report.entries.size() - report.failed_count() << "/" << report.entries.size()
        << " invariants passed\n";
    return out.str();
}

} // namespace offrl
