// Experiment runners: scenario factory, the three sweep drivers (gap vs n,
// paired separation, posterior-sampling T-sweep), the exhaustive max-min
// reference, and the self-check suite. The key properties are determinism
// (same config, same rows, independent of the thread count) and coherence of
// the emitted columns.
#include <catch2/catch_amalgamated.hpp>

#include <offrl/experiments.hpp>

#include <map>

using namespace offrl;

namespace {

ExperimentConfig small_gap_config() {
    ExperimentConfig cfg;
    cfg.experiment = "gap";
    cfg.scenario.family = "finite";
    cfg.scenario.num_states = 4;
    cfg.scenario.num_actions = 2;
    cfg.scenario.horizon = 3;
    cfg.scenario.class_size = 6;
    cfg.scenario.perturbation = 0.5;
    cfg.scenario.seed = 17;
    cfg.algorithm.iterations = 8;
    cfg.sweep.n_grid = {50, 200};
    cfg.sweep.trials = 3;
    return cfg;
}

} // namespace

TEST_CASE("the default step size respects the strict incremental-update bound", "[experiments]") {
    REQUIRE(effective_eta(0.05, 4) == 0.05);
    for (std::size_t H : {1, 2, 5, 40}) {
        const prec_t eta = effective_eta(0, H);
        REQUIRE(eta > 0);
        REQUIRE(eta < 0.5 / prec_t(H));
    }
    REQUIRE_THROWS(effective_eta(0, 0));
}

TEST_CASE("seed mixing is deterministic and collision-free on a small grid", "[experiments]") {
    REQUIRE(detail::mix_seed(1, 2, 3) == detail::mix_seed(1, 2, 3));
    std::vector<std::uint64_t> seen;
    for (std::uint64_t a = 0; a < 8; ++a)
        for (std::uint64_t b = 0; b < 8; ++b) seen.push_back(detail::mix_seed(9, a, b));
    std::sort(seen.begin(), seen.end());
    REQUIRE(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("the scenario factory produces coherent instances for every family", "[experiments]") {
    for (const char* family : {"finite", "trap", "ladder", "lowrank"}) {
        ScenarioConfig sc;
        sc.family = family;
        sc.num_states = 4;
        sc.num_actions = 2;
        sc.horizon = 3;
        sc.class_size = 6;
        sc.perturbation = 0.5;
        sc.seed = 5;
        const ExperimentScenario out = make_scenario(sc);
        INFO("family " << family);
        out.truth.validate();
        out.cls.validate();
        out.rho.validate();
        out.comparator.validate();
        REQUIRE(out.cls.size() >= 2);
        REQUIRE(out.cls.truth() == out.truth.transition);
        REQUIRE(out.comparator.horizon == out.truth.horizon);
    }

    SECTION("full coverage replaces the logging distribution with uniform") {
        ScenarioConfig sc;
        sc.family = "trap";
        sc.num_states = 4;
        sc.num_actions = 2;
        sc.horizon = 3;
        sc.class_size = 6;
        sc.seed = 5;
        sc.full_coverage = true;
        const ExperimentScenario out = make_scenario(sc);
        const prec_t w = 1.0 / prec_t(out.truth.num_states * out.truth.num_actions);
        for (prec_t p : out.rho.table) REQUIRE(p == Catch::Approx(w).margin(1e-15));
    }

    SECTION("unknown family is rejected") {
        ScenarioConfig sc;
        sc.family = "mystery";
        REQUIRE_THROWS(make_scenario(sc));
    }
}

TEST_CASE("gap runner rows are deterministic and thread-count independent", "[experiments]") {
    const ExperimentConfig cfg = small_gap_config();
    const std::vector<GapRow> one = run_gap_experiment(cfg, 1);
    const std::vector<GapRow> again = run_gap_experiment(cfg, 1);
    const std::vector<GapRow> two = run_gap_experiment(cfg, 2);

    REQUIRE(one.size() == cfg.sweep.n_grid.size() * cfg.sweep.trials);
    REQUIRE(again.size() == one.size());
    REQUIRE(two.size() == one.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        REQUIRE(one[i].n == again[i].n);
        REQUIRE(one[i].trial == again[i].trial);
        REQUIRE(one[i].gap == again[i].gap);
        REQUIRE(one[i].gap == two[i].gap);
        REQUIRE(one[i].xi == two[i].xi);
        REQUIRE(one[i].version_space_size == two[i].version_space_size);
        REQUIRE(one[i].truth_in_space == two[i].truth_in_space);
    }

    // Rows come back sorted by (n, trial) with every cell of the sweep present.
    std::size_t i = 0;
    for (std::size_t gi = 0; gi < cfg.sweep.n_grid.size(); ++gi)
        for (std::size_t trial = 0; trial < cfg.sweep.trials; ++trial, ++i) {
            REQUIRE(one[i].n == cfg.sweep.n_grid[gi]);
            REQUIRE(one[i].trial == trial);
        }

    // Column coherence: the comparator is optimal under the truth, so gaps
    // cannot be meaningfully negative; xi is positive; the surviving set is a
    // subset of the class and contains at least the MLE.
    for (const GapRow& r : one) {
        REQUIRE(r.gap >= -1e-9);
        REQUIRE(r.xi > 0);
        REQUIRE(r.version_space_size >= 1);
        REQUIRE(r.version_space_size <= cfg.scenario.class_size);
    }
}

TEST_CASE("the naive baseline reports a singleton version space", "[experiments]") {
    ExperimentConfig cfg = small_gap_config();
    cfg.algorithm.name = "naive";
    const std::vector<GapRow> rows = run_gap_experiment(cfg, 1);
    for (const GapRow& r : rows) {
        REQUIRE(r.version_space_size == 1);
        REQUIRE(r.xi == 0);
        REQUIRE(r.gap >= -1e-9);
    }
}

TEST_CASE("the posterior-sampling runner emits support-size columns", "[experiments]") {
    ExperimentConfig cfg = small_gap_config();
    cfg.algorithm.name = "pspo";
    cfg.algorithm.prior_family = "discrete";
    cfg.sweep.n_grid = {400};
    const std::vector<GapRow> rows = run_gap_experiment(cfg, 1);
    REQUIRE(rows.size() == cfg.sweep.trials);
    for (const GapRow& r : rows) {
        REQUIRE(r.version_space_size >= 1);
        REQUIRE(r.version_space_size <= cfg.scenario.class_size);
        REQUIRE(r.gap >= -1e-9);
    }
    // With a Dirichlet prior there is no finite support to report.
    cfg.algorithm.prior_family = "dirichlet";
    const std::vector<GapRow> dir_rows = run_gap_experiment(cfg, 1);
    for (const GapRow& r : dir_rows) {
        REQUIRE(r.version_space_size == 0);
        REQUIRE(!r.truth_in_space);
    }
}

TEST_CASE("separation runner pairs both algorithms on the same draws", "[experiments]") {
    ExperimentConfig cfg;
    cfg.experiment = "separation";
    cfg.scenario.family = "trap";
    cfg.scenario.num_states = 4;
    cfg.scenario.num_actions = 2;
    cfg.scenario.horizon = 3;
    cfg.scenario.class_size = 8;
    cfg.scenario.optimists = 2;
    cfg.scenario.seed = 23;
    cfg.algorithm.iterations = 8;
    cfg.sweep.n_grid = {100};
    cfg.sweep.trials = 4;

    const std::vector<SeparationRow> rows = run_separation_experiment(cfg, 1);
    const std::vector<SeparationRow> two = run_separation_experiment(cfg, 2);
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        REQUIRE(rows[i].n == 100);
        REQUIRE(rows[i].trial == i);
        REQUIRE(rows[i].cppo_gap == two[i].cppo_gap);
        REQUIRE(rows[i].naive_gap == two[i].naive_gap);
    }

    SECTION("only the trap family is accepted") {
        ExperimentConfig bad = cfg;
        bad.scenario.family = "finite";
        REQUIRE_THROWS_WITH(run_separation_experiment(bad, 1),
                            Catch::Matchers::ContainsSubstring("trap"));
    }
}

TEST_CASE("T-sweep always reports T = 1 and is per-trial non-increasing", "[experiments]") {
    ExperimentConfig cfg;
    cfg.experiment = "pspo_sweep";
    cfg.scenario.family = "finite";
    cfg.scenario.num_states = 4;
    cfg.scenario.num_actions = 2;
    cfg.scenario.horizon = 3;
    cfg.scenario.class_size = 6;
    cfg.scenario.perturbation = 0.5;
    cfg.scenario.seed = 29;
    cfg.algorithm.name = "pspo";
    cfg.sweep.n_grid = {100, 300};
    cfg.sweep.t_grid = {4, 16}; // no 1: the runner must add it
    cfg.sweep.trials = 3;

    const std::vector<PspoSweepRow> rows = run_pspo_T_sweep(cfg, 1);
    const std::vector<PspoSweepRow> two = run_pspo_T_sweep(cfg, 2);
    REQUIRE(rows.size() == 3 * cfg.sweep.trials); // T in {1, 4, 16}
    for (std::size_t i = 0; i < rows.size(); ++i) {
        REQUIRE(rows[i].T == two[i].T);
        REQUIRE(rows[i].best_iterate_gap == two[i].best_iterate_gap);
    }

    std::map<std::size_t, std::map<std::size_t, prec_t>> by_trial; // trial -> T -> gap
    for (const PspoSweepRow& r : rows) by_trial[r.trial][r.T] = r.best_iterate_gap;
    for (const auto& [trial, curve] : by_trial) {
        REQUIRE(curve.size() == 3);
        REQUIRE(curve.count(1) == 1);
        prec_t prev = inf();
        for (const auto& [T, gap] : curve) { // std::map iterates T ascending
            REQUIRE(gap <= prev + 1e-12);
            prev = gap;
        }
    }
}

TEST_CASE("exhaustive max-min enumeration guards its blow-up", "[experiments]") {
    std::mt19937_64 rng = make_rng(31, 0x3e);
    const SharedEnv big = random_shared_env(rng, 4, 4, 4); // 4^16 policies
    const TabularMDP big_mdp = make_mdp(big, random_transition_table(rng, 4, 4));
    REQUIRE_THROWS(brute_force_maxmin(VersionSpace::singleton(big_mdp), big));

    const SharedEnv env = random_shared_env(rng, 3, 2, 2); // 2^6 = 64 policies
    const TabularMDP mdp = make_mdp(env, random_transition_table(rng, 3, 2));
    const auto [value, policy] = brute_force_maxmin(VersionSpace::singleton(mdp), env);
    // One member: max-min degenerates to planning, and the optimum is attained
    // by a deterministic policy, so enumeration recovers it exactly.
    REQUIRE(value == Catch::Approx(plan_optimal(mdp).second).margin(1e-12));
    REQUIRE(evaluate_policy(mdp, policy).value == Catch::Approx(value).margin(1e-12));

    VersionSpace empty;
    REQUIRE_THROWS(brute_force_maxmin(empty, env));
}

TEST_CASE("the self-check suite passes and its report names every entry", "[experiments]") {
    const VerifyReport report = verify_all(1);
    CAPTURE(format_verify_report(report));
    REQUIRE(report.entries.size() >= 20);
    REQUIRE(report.all_passed());
    REQUIRE(report.failed_count() == 0);
    for (const VerifyEntry& e : report.entries) {
        REQUIRE(!e.name.empty());
        REQUIRE(e.passed == (e.slack >= 0));
    }

    const std::string text = format_verify_report(report);
    REQUIRE_THAT(text, Catch::Matchers::ContainsSubstring("PASS"));
    REQUIRE_THAT(text, Catch::Matchers::ContainsSubstring(
                           std::to_string(report.entries.size()) + "/" +
                           std::to_string(report.entries.size()) + " invariants passed"));

    VerifyReport broken = report;
    broken.entries[0].passed = false;
    const std::string bad_text = format_verify_report(broken);
    REQUIRE_THAT(bad_text, Catch::Matchers::ContainsSubstring("FAIL"));
    REQUIRE(broken.failed_count() == 1);
}
