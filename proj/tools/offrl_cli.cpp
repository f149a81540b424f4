// Command-line front end: scenario/dataset generation, single algorithm runs
// with per-iteration traces, coverage reports, config-driven experiments, and
// the invariant verification gate.
#include "offrl/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace offrl;

/// Global flags; --seed and --out override the loaded config in place.
struct CliState {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    bool seed_given = false;
    bool out_given = false;

    ExperimentConfig config() const {
        ExperimentConfig cfg =
            config_path.empty() ? ExperimentConfig{} : load_experiment_config(config_path);
        if (seed_given) cfg.scenario.seed = seed;
        if (out_given) cfg.output.dir = out_dir;
        cfg.validate();
        return cfg;
    }
};

/// Output path under the config's directory, creating it on first use.
std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    const std::filesystem::path dir(cfg.output.dir);
    std::filesystem::create_directories(dir);
    return (dir / (cfg.output.prefix + name)).string();
}

ModelPrior make_prior(const AlgorithmConfig& alg, const ExperimentScenario& sc, const SharedEnv& env) {
    if (alg.prior_family == "dirichlet")
        return ModelPrior::dirichlet_uniform(env.num_states, env.num_actions, alg.prior_concentration);
    if (alg.prior_degenerate) return ModelPrior::discrete_degenerate(sc.cls, sc.cls.truth_index);
    return ModelPrior::discrete_uniform(sc.cls);
}

void cmd_gen_mdp(const CliState& state) {
    const ExperimentConfig cfg = state.config();
    const ExperimentScenario sc = make_scenario(cfg.scenario);
    const std::string mdp_file = out_path(cfg, "mdp.json");
    const std::string scenario_file = out_path(cfg, "scenario.json");
    write_json(mdp_file, mdp_to_json(sc.truth));
    write_json(scenario_file, scenario_to_json(sc.truth, sc.cls));
    std::cout << "wrote " << mdp_file << "\n"
              << "wrote " << scenario_file << " (" << sc.cls.size() << " members, truth at "
              << sc.cls.truth_index << ")\n";
}

void cmd_gen_data(const CliState& state, std::size_t n_override) {
    const ExperimentConfig cfg = state.config();
    const ExperimentScenario sc = make_scenario(cfg.scenario);
    const std::size_t n = n_override > 0 ? n_override : cfg.sweep.n_grid.back();
    const OfflineDataset data =
        sample_dataset(sc.truth, sc.rho, n, detail::mix_seed(cfg.scenario.seed, 0xda7a, 1));
    const std::string data_file = out_path(cfg, "dataset.jsonl");
    write_dataset(data_file, data);
    std::cout << "wrote " << data_file << " (" << data.n() << " transitions)\n";
}

void cmd_run_cppo(const CliState& state, const std::string& data_path, std::size_t n_override) {
    const ExperimentConfig cfg = state.config();
    const ExperimentScenario sc = make_scenario(cfg.scenario);
    const SharedEnv env = sc.truth.shared();
    const std::size_t n = n_override > 0 ? n_override : cfg.sweep.n_grid.back();
    const OfflineDataset data =
        data_path.empty()
            ? sample_dataset(sc.truth, sc.rho, n, detail::mix_seed(cfg.scenario.seed, 0xda7a, 1))
            : read_dataset(data_path);
    const prec_t eta = effective_eta(cfg.algorithm.eta, env.horizon);

    const CppoResult res =
        cppo_pipeline(sc.cls, env, data, cfg.algorithm.threshold, cfg.algorithm.iterations, eta);
    const prec_t v_truth = evaluate_policy(sc.truth, res.policy).value;
    const prec_t v_star = evaluate_policy(sc.truth, sc.comparator).value;

    const std::string trace_file = out_path(cfg, "cppo_iterations.csv");
    CsvWriter csv(trace_file, {"iteration", "pessimistic_value", "worst_model_index"});
    for (std::size_t t = 0; t < res.trajectory.size(); ++t)
        csv.row(t, res.trajectory[t].first, res.trajectory[t].second);
    csv.close();

    const std::string result_file = out_path(cfg, "cppo_result.json");
    write_json(result_file, json{{"pessimistic_value", res.pessimistic_value},
                                 {"worst_model_index", res.worst_model_index},
                                 {"iterations", res.iterations},
                                 {"xi", res.xi},
                                 {"version_space_size", res.version_space_size},
                                 {"truth_captured", res.truth_captured},
                                 {"value_under_truth", v_truth},
                                 {"comparator_value", v_star},
                                 {"gap", v_star - v_truth},
                                 {"policy", policy_to_json(res.policy)}});
    std::cout << "wrote " << trace_file << "\n"
              << "wrote " << result_file << "\n"
              << "pessimistic value " << res.pessimistic_value << ", gap under truth " << v_star - v_truth
              << " (version space " << res.version_space_size << "/" << sc.cls.size() << ", truth "
              << (res.truth_captured ? "captured" : "missed") << ")\n";
}

void cmd_run_pspo(const CliState& state, const std::string& data_path, std::size_t n_override) {
    const ExperimentConfig cfg = state.config();
    const ExperimentScenario sc = make_scenario(cfg.scenario);
    const SharedEnv env = sc.truth.shared();
    const std::size_t n = n_override > 0 ? n_override : cfg.sweep.n_grid.back();
    const OfflineDataset data =
        data_path.empty()
            ? sample_dataset(sc.truth, sc.rho, n, detail::mix_seed(cfg.scenario.seed, 0xda7a, 1))
            : read_dataset(data_path);
    const prec_t eta = effective_eta(cfg.algorithm.eta, env.horizon);

    const ModelPosterior post = posterior_update(make_prior(cfg.algorithm, sc, env), data);
    PspoResult res = pspo_run(post, env, cfg.algorithm.iterations, eta,
                              detail::mix_seed(cfg.scenario.seed, 0x50, 2));
    const auto [best_value, best_iterate] = evaluate_iterates_under_truth(res, sc.truth);
    const prec_t v_star = evaluate_policy(sc.truth, sc.comparator).value;

    // row t is iterate t; the model id is the draw that produced it from
    // iterate t-1 (the uniform start has no draw)
    const std::string trace_file = out_path(cfg, "pspo_iterations.csv");
    CsvWriter csv(trace_file, {"iteration", "sampled_model_id", "value_under_truth"});
    for (std::size_t t = 0; t < res.policies.size(); ++t)
        csv.row(t, t == 0 ? long(-1) : res.sampled_models[t - 1], res.values_under_truth[t]);
    csv.close();

    const std::string result_file = out_path(cfg, "pspo_result.json");
    write_json(result_file, json{{"iterations", res.iterations},
                                 {"eta", res.eta},
                                 {"best_iterate", best_iterate},
                                 {"best_value_under_truth", best_value},
                                 {"comparator_value", v_star},
                                 {"gap", v_star - best_value},
                                 {"final_policy", policy_to_json(res.final_policy())},
                                 {"best_policy", policy_to_json(res.policies[best_iterate])}});
    std::cout << "wrote " << trace_file << "\n"
              << "wrote " << result_file << "\n"
              << "best iterate " << best_iterate << "/" << res.iterations << ", gap under truth "
              << v_star - best_value << "\n";
}

void cmd_coverage(const CliState& state, const std::string& scenario_path) {
    const ExperimentConfig cfg = state.config();
    TabularMDP truth;
    FiniteModelClass cls;
    OfflineDistribution rho;
    TimePolicy comparator;
    if (scenario_path.empty()) {
        ExperimentScenario sc = make_scenario(cfg.scenario);
        truth = std::move(sc.truth);
        cls = std::move(sc.cls);
        rho = std::move(sc.rho);
        comparator = std::move(sc.comparator);
    } else {
        // externally supplied scenario: uniform rho, optimal comparator
        std::tie(truth, cls) = scenario_from_json(read_json(scenario_path));
        rho = OfflineDistribution::uniform(truth.num_states, truth.num_actions);
        comparator = plan_optimal(truth).first;
    }

    const CoverageReport rep = make_coverage_report(cls, comparator, truth, rho);
    const std::string report_file = out_path(cfg, "coverage.json");
    write_json(report_file, json{{"density_ratio_C", json_real(rep.density_ratio_C)},
                                 {"refined_C_dagger", json_real(rep.refined_C_dagger)},
                                 {"rel_cond_number", json_real(rep.rel_cond_number)},
                                 {"C_d0", json_real(rep.C_d0)},
                                 {"rank_sigma_rho", rep.rank_sigma_rho}});

    const OccupancyMeasure occ = occupancy(truth, comparator);
    const std::string ratio_file = out_path(cfg, "coverage_ratios.csv");
    CsvWriter csv(ratio_file, {"s", "a", "comparator_occupancy", "rho", "ratio"});
    for (std::size_t s = 0; s < truth.num_states; ++s)
        for (std::size_t a = 0; a < truth.num_actions; ++a)
            csv.row(s, a, occ.avg(s, a), rho.rho(s, a), rep.ratio_table[s * truth.num_actions + a]);
    csv.close();

    std::cout << "wrote " << report_file << "\n"
              << "wrote " << ratio_file << "\n"
              << "C = " << rep.density_ratio_C << ", C-dagger = " << rep.refined_C_dagger
              << ", relative condition number = " << rep.rel_cond_number << ", C_d0 = " << rep.C_d0
              << ", rank(Sigma_rho) = " << rep.rank_sigma_rho << "\n";
}

void cmd_experiment(const CliState& state) {
    const ExperimentConfig cfg = state.config();
    if (cfg.experiment == "gap") {
        const std::vector<GapRow> rows = run_gap_experiment(cfg, state.threads);
        const std::string file = out_path(cfg, "gap.csv");
        write_gap_csv(file, rows);
        std::cout << "wrote " << file << " (" << rows.size() << " rows)\n";
        for (const std::size_t n : cfg.sweep.n_grid) {
            numvec gaps;
            for (const GapRow& r : rows)
                if (r.n == n) gaps.push_back(r.gap);
            std::cout << "  n = " << n << ": median gap " << median_of(gaps) << "\n";
        }
    } else if (cfg.experiment == "separation") {
        const std::vector<SeparationRow> rows = run_separation_experiment(cfg, state.threads);
        const std::string file = out_path(cfg, "separation.csv");
        write_separation_csv(file, rows);
        prec_t cppo_mean = 0, naive_mean = 0;
        std::size_t wins = 0;
        for (const SeparationRow& r : rows) {
            cppo_mean += r.cppo_gap / prec_t(rows.size());
            naive_mean += r.naive_gap / prec_t(rows.size());
            wins += r.cppo_gap < r.naive_gap ? 1 : 0;
        }
        std::cout << "wrote " << file << " (" << rows.size() << " rows)\n"
                  << "  mean gap: pessimistic " << cppo_mean << " vs naive " << naive_mean
                  << "; pessimistic wins " << wins << "/" << rows.size() << " pairs\n";
    } else {
        const std::vector<PspoSweepRow> rows = run_pspo_T_sweep(cfg, state.threads);
        const std::string file = out_path(cfg, "pspo_sweep.csv");
        write_pspo_sweep_csv(file, rows);
        std::cout << "wrote " << file << " (" << rows.size() << " rows)\n";
        std::size_t i = 0;
        while (i < rows.size()) {
            numvec gaps;
            const std::size_t T = rows[i].T;
            for (; i < rows.size() && rows[i].T == T; ++i) gaps.push_back(rows[i].best_iterate_gap);
            std::cout << "  T = " << T << ": median best-iterate gap " << median_of(gaps) << "\n";
        }
    }
}

int cmd_verify(const CliState& state) {
    const VerifyReport report = verify_all(state.seed_given ? state.seed : 1);
    std::cout << format_verify_report(report);
    return report.all_passed() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pessimistic model-based offline RL: version-space max-min and "
                 "posterior-sampling policy optimization"};
    app.require_subcommand(1);

    CliState state;
    auto* opt_config = app.add_option("--config", state.config_path,
                                      "Config document (JSON); defaults are used when omitted");
    opt_config->check(CLI::ExistingFile);
    auto* opt_seed = app.add_option("--seed", state.seed, "Override the scenario seed");
    auto* opt_out = app.add_option("--out", state.out_dir, "Output directory (overrides output.dir)");
    app.add_option("--threads", state.threads, "Worker threads for experiment trials")
        ->check(CLI::PositiveNumber);

    std::string data_path, scenario_path;
    std::size_t n_override = 0;
    int exit_code = 0;

    // callbacks fire after parsing completes, so option counts are final here
    auto sync = [&]() {
        state.seed_given = opt_seed->count() > 0;
        state.out_given = opt_out->count() > 0;
    };

    auto* gen_mdp = app.add_subcommand("gen-mdp", "Write the scenario's MDP and model-class documents");
    gen_mdp->callback([&]() {
        sync();
        cmd_gen_mdp(state);
    });

    auto* gen_data = app.add_subcommand("gen-data", "Sample an offline dataset from the scenario");
    gen_data->add_option("--n", n_override, "Transitions to sample (default: largest sweep n)");
    gen_data->callback([&]() {
        sync();
        cmd_gen_data(state, n_override);
    });

    auto* run_cppo = app.add_subcommand("run-cppo", "Run the pessimistic max-min search on one dataset");
    run_cppo->add_option("--data", data_path, "Dataset file (default: sample from the scenario)")
        ->check(CLI::ExistingFile);
    run_cppo->add_option("--n", n_override, "Transitions to sample when --data is omitted");
    run_cppo->callback([&]() {
        sync();
        cmd_run_cppo(state, data_path, n_override);
    });

    auto* run_pspo = app.add_subcommand("run-pspo", "Run posterior-sampling policy optimization");
    run_pspo->add_option("--data", data_path, "Dataset file (default: sample from the scenario)")
        ->check(CLI::ExistingFile);
    run_pspo->add_option("--n", n_override, "Transitions to sample when --data is omitted");
    run_pspo->callback([&]() {
        sync();
        cmd_run_pspo(state, data_path, n_override);
    });

    auto* coverage = app.add_subcommand("coverage", "Coverage report for a scenario");
    coverage->add_option("--scenario", scenario_path, "Scenario document (default: build from config)")
        ->check(CLI::ExistingFile);
    coverage->callback([&]() {
        sync();
        cmd_coverage(state, scenario_path);
    });

    auto* experiment = app.add_subcommand("experiment", "Run the experiment named in the config");
    experiment->callback([&]() {
        sync();
        cmd_experiment(state);
    });

    auto* verify = app.add_subcommand("verify", "Run the invariant suite; exit 0 iff all pass");
    verify->callback([&]() {
        sync();
        exit_code = cmd_verify(state);
    });

    for (auto* sub : {gen_mdp, gen_data, run_cppo, run_pspo, coverage, experiment, verify})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}
