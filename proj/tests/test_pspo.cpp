// Posterior-sampling policy optimization: conjugate updates, sampling,
// the NPG trajectory, the LCB slack term, and the Bayesian gap experiment.
#include <catch2/catch_amalgamated.hpp>

#include <offrl/experiments.hpp>
#include <offrl/model_zoo.hpp>
#include <offrl/pspo.hpp>

#include <cmath>

using namespace offrl;

namespace {

struct Scene {
    FiniteModelClass cls;
    SharedEnv env;
    TabularMDP truth;
    OfflineDistribution rho;
};

Scene make_scene(std::uint64_t seed, std::size_t S, std::size_t A, std::size_t H,
                 std::size_t size, prec_t pert) {
    Scene sc;
    sc.cls = make_finite_class(seed, S, A, size, pert);
    std::mt19937_64 rng = make_rng(seed, 0xe5f);
    sc.env = random_shared_env(rng, S, A, H);
    sc.truth = sc.cls.member_mdp(sc.env, sc.cls.truth_index);
    sc.rho = OfflineDistribution::uniform(S, A);
    return sc;
}

} // namespace

TEST_CASE("posterior_update with no data returns the prior", "[pspo]") {
    Scene sc = make_scene(1, 3, 2, 3, 5, 0.5);
    const ModelPrior prior = ModelPrior::discrete_uniform(sc.cls);
    const OfflineDataset empty = sample_dataset(sc.truth, sc.rho, 0, 1);
    const ModelPosterior post = posterior_update(prior, empty);
    REQUIRE(post.params.weights == prior.weights);

    const ModelPrior dir = ModelPrior::dirichlet_uniform(3, 2, 1.0);
    const ModelPosterior dpost = posterior_update(dir, empty);
    REQUIRE(dpost.params.alpha == dir.alpha);
}

TEST_CASE("Dirichlet update adds transition counts", "[pspo]") {
    const ModelPrior prior = ModelPrior::dirichlet_uniform(2, 1, 1.0);
    OfflineDataset d;
    d.source = "manual";
    // Three transitions 0 -> 0, one 0 -> 1 under the single action.
    d.records = {{0, 0, 0.5, 0}, {0, 0, 0.5, 0}, {0, 0, 0.5, 0}, {0, 0, 0.5, 1}};
    const ModelPosterior post = posterior_update(prior, d);
    REQUIRE(post.params.alpha[0] == Catch::Approx(4.0).margin(1e-15)); // 1 + 3
    REQUIRE(post.params.alpha[1] == Catch::Approx(2.0).margin(1e-15)); // 1 + 1
}

TEST_CASE("discrete posterior zeroes members contradicted by the data", "[pspo]") {
    // Member 1 forbids the transition 0 -> 1 that member 0 allows.
    FiniteModelClass cls;
    cls.num_states = 2;
    cls.num_actions = 1;
    cls.models = {{0.5, 0.5, 0.5, 0.5}, {1.0, 0.0, 0.5, 0.5}};
    cls.truth_index = 0;
    const ModelPrior prior = ModelPrior::discrete_uniform(cls);
    OfflineDataset d;
    d.records = {{0, 0, 0.2, 1}};
    const ModelPosterior post = posterior_update(prior, d);
    REQUIRE(post.params.weights[1] == 0.0);
    REQUIRE(post.params.weights[0] == Catch::Approx(1.0).margin(1e-15));

    // If every member is contradicted the update must fail loudly.
    FiniteModelClass broken = cls;
    broken.models[0] = broken.models[1];
    REQUIRE_THROWS(posterior_update(ModelPrior::discrete_uniform(broken), d));
}

TEST_CASE("discrete posterior equals brute-force prior-times-likelihood", "[pspo]") {
    Scene sc = make_scene(3, 3, 2, 3, 6, 0.6);
    const OfflineDataset d = sample_dataset(sc.truth, sc.rho, 20, 5);
    const ModelPrior prior = ModelPrior::discrete_uniform(sc.cls);
    const ModelPosterior post = posterior_update(prior, d);

    numvec expect(sc.cls.size(), 0.0);
    for (std::size_t j = 0; j < sc.cls.size(); ++j) {
        prec_t like = prior.weights[j];
        for (const DataRecord& rec : d.records)
            like *= sc.cls.models[j][(rec.s * 2 + rec.a) * 3 + rec.sp];
        expect[j] = like;
    }
    prec_t total = 0;
    for (prec_t w : expect) total += w;
    for (std::size_t j = 0; j < sc.cls.size(); ++j)
        REQUIRE(post.params.weights[j] == Catch::Approx(expect[j] / total).margin(1e-12));
}

TEST_CASE("conjugate updates are order invariant", "[pspo]") {
    Scene sc = make_scene(7, 4, 2, 3, 4, 0.5);
    const OfflineDataset d = sample_dataset(sc.truth, sc.rho, 40, 9);

    OfflineDataset first, second, reversed;
    first.records.assign(d.records.begin(), d.records.begin() + 20);
    second.records.assign(d.records.begin() + 20, d.records.end());
    reversed.records.assign(d.records.rbegin(), d.records.rend());

    const ModelPrior prior = ModelPrior::dirichlet_uniform(4, 2, 0.7);
    const ModelPosterior batch = posterior_update(prior, d);
    const ModelPosterior seq =
        posterior_update(ModelPrior(posterior_update(prior, first).params), second);
    const ModelPosterior rev = posterior_update(prior, reversed);
    for (std::size_t i = 0; i < batch.params.alpha.size(); ++i) {
        REQUIRE(batch.params.alpha[i] == Catch::Approx(seq.params.alpha[i]).margin(1e-10));
        REQUIRE(batch.params.alpha[i] == Catch::Approx(rev.params.alpha[i]).margin(1e-10));
    }
}

TEST_CASE("posterior sampling honors the posterior law", "[pspo]") {
    SECTION("degenerate discrete posterior always returns its single member") {
        Scene sc = make_scene(11, 3, 2, 3, 4, 0.5);
        const ModelPrior prior = ModelPrior::discrete_degenerate(sc.cls, 2);
        std::mt19937_64 rng = make_rng(12, 0x42);
        for (int i = 0; i < 20; ++i) {
            const SampledModel m = posterior_sample(prior, rng);
            REQUIRE(m.member_index == 2);
            REQUIRE(m.transition == sc.cls.models[2]);
        }
    }
    SECTION("Dirichlet samples are valid tables with the right mean") {
        const ModelPrior prior = ModelPrior::dirichlet_uniform(3, 2, 1.0);
        OfflineDataset d;
        for (int i = 0; i < 30; ++i) d.records.push_back({0, 0, 0.1, std::size_t(i % 2)});
        const ModelPosterior post = posterior_update(ModelPrior(prior), d);
        std::mt19937_64 rng = make_rng(13, 0x42);
        const std::size_t samples = 100000;
        numvec mean(3, 0.0);
        for (std::size_t i = 0; i < samples; ++i) {
            const SampledModel m = posterior_sample(post, rng);
            prec_t row = 0;
            for (std::size_t sp = 0; sp < 3; ++sp) row += m.transition[sp];
            REQUIRE(std::abs(row - 1.0) <= 1e-12);
            for (std::size_t sp = 0; sp < 3; ++sp) mean[sp] += m.transition[sp];
        }
        // Posterior alpha over (s0,a0) is (16, 16, 1): mean 16/33, 16/33, 1/33.
        numvec alpha = {16, 16, 1};
        const prec_t total = 33;
        for (std::size_t sp = 0; sp < 3; ++sp) {
            const prec_t p = alpha[sp] / total;
            const prec_t var = p * (1 - p) / (total + 1);
            const prec_t se = std::sqrt(var / prec_t(samples));
            REQUIRE(std::abs(mean[sp] / prec_t(samples) - p) <= 4.0 * se);
        }
    }
}

TEST_CASE("pspo_run contract", "[pspo]") {
    Scene sc = make_scene(17, 3, 2, 4, 5, 0.5);
    const ModelPrior prior = ModelPrior::discrete_uniform(sc.cls);
    const OfflineDataset d = sample_dataset(sc.truth, sc.rho, 200, 19);
    const ModelPosterior post = posterior_update(prior, d);

    SECTION("eta at or beyond the strict bound is rejected with the bound named") {
        REQUIRE_THROWS_WITH(pspo_run(post, sc.env, 4, 0.5 / 4.0, 1),
                            Catch::Matchers::ContainsSubstring("1/(2H)"));
        REQUIRE_THROWS(pspo_run(post, sc.env, 4, 0.2, 1));
    }
    SECTION("zero iterations returns only the uniform start") {
        const PspoResult res = pspo_run(post, sc.env, 0, 0.1, 1);
        REQUIRE(res.policies.size() == 1);
        const TimePolicy uni = TimePolicy::uniform(4, 3, 2);
        REQUIRE(res.final_policy().action_probs == uni.action_probs);
    }
    SECTION("trajectory has T+1 valid policies and T draws, reproducibly") {
        const PspoResult a = pspo_run(post, sc.env, 16, 0.1, 7);
        const PspoResult b = pspo_run(post, sc.env, 16, 0.1, 7);
        REQUIRE(a.policies.size() == 17);
        REQUIRE(a.sampled_models.size() == 16);
        for (const TimePolicy& p : a.policies) p.validate();
        REQUIRE(a.sampled_models == b.sampled_models);
        for (std::size_t t = 0; t < a.policies.size(); ++t)
            REQUIRE(a.policies[t].action_probs == b.policies[t].action_probs);
        // A different seed changes the draw sequence on a spread posterior.
        const PspoResult c = pspo_run(post, sc.env, 16, 0.1, 8);
        REQUIRE(a.sampled_models != c.sampled_models);
    }
    SECTION("a run at T is a prefix of a run at T' > T with the same seed") {
        const PspoResult shorter = pspo_run(post, sc.env, 6, 0.1, 7);
        const PspoResult longer = pspo_run(post, sc.env, 20, 0.1, 7);
        for (std::size_t t = 0; t < shorter.sampled_models.size(); ++t)
            REQUIRE(shorter.sampled_models[t] == longer.sampled_models[t]);
        for (std::size_t t = 0; t < shorter.policies.size(); ++t)
            REQUIRE(shorter.policies[t].action_probs == longer.policies[t].action_probs);
    }
}

TEST_CASE("degenerate posterior turns sampling into planning", "[pspo]") {
    Scene sc = make_scene(23, 4, 3, 4, 3, 0.5);
    const ModelPrior prior = ModelPrior::discrete_degenerate(sc.cls, sc.cls.truth_index);
    PspoResult res = pspo_run(ModelPosterior{prior, 0, "none"}, sc.env, 256, 0.1, 3);
    const auto [best, best_idx] = evaluate_iterates_under_truth(res, sc.truth);
    (void)best_idx;
    const prec_t opt = plan_optimal(sc.truth).second;
    const prec_t H = 4;
    REQUIRE(best <= opt + 1e-10);
    REQUIRE(opt - best <= 4 * H * H * std::sqrt(std::log(3.0) / 256.0) + 0.05 * H);
    REQUIRE(res.values_under_truth.size() == res.policies.size());
}

TEST_CASE("lcb_gap_term measures the version-space slack at the comparator", "[pspo]") {
    Scene sc = make_scene(29, 4, 2, 4, 8, 0.6);
    const TimePolicy comparator = plan_optimal(sc.truth).first;

    SECTION("singleton space has zero slack") {
        REQUIRE(lcb_gap_term(VersionSpace::singleton(sc.truth), comparator, sc.truth) ==
                Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("slack is nonnegative under capture and decays with n") {
        numvec slacks;
        for (std::size_t n : {100, 10000}) {
            const OfflineDataset d = sample_dataset(sc.truth, sc.rho, n, 31);
            const VersionSpace vs = build_version_space(
                sc.cls, count_transitions(d, 4, 2), ThresholdPolicy{}.xi_for_class(n, sc.cls));
            REQUIRE(vs.contains(sc.cls.truth_index));
            const prec_t slack = lcb_gap_term(vs, comparator, sc.truth);
            REQUIRE(slack >= -1e-12);
            slacks.push_back(slack);
        }
        REQUIRE(slacks[1] <= slacks[0] + 1e-12);
    }
}

TEST_CASE("matched posterior draws make truth and iterate values exchangeable", "[pspo]") {
    Scene sc = make_scene(37, 3, 2, 3, 6, 0.5);
    const ModelPrior prior = ModelPrior::discrete_uniform(sc.cls);
    const OfflineDataset d = sample_dataset(sc.truth, sc.rho, 60, 39);
    const ModelPosterior post = posterior_update(prior, d);

    // Under the posterior, E[LCB at pi(P)] is the same whether P plays the
    // role of the truth or of the sampled model: estimate both with matched
    // pairs and compare.
    std::mt19937_64 rng = make_rng(41, 0x42);
    const std::size_t draws = 4000;
    numvec diff;
    const VersionSpace vs = build_version_space(sc.cls, count_transitions(d, 3, 2), 4.0);
    for (std::size_t i = 0; i < draws; ++i) {
        const SampledModel star = posterior_sample(post, rng);
        const SampledModel iter = posterior_sample(post, rng);
        const TimePolicy pi_star =
            plan_optimal(make_mdp(sc.env, star.transition)).first;
        const TimePolicy pi_iter =
            plan_optimal(make_mdp(sc.env, iter.transition)).first;
        const prec_t a = pessimistic_value(vs, sc.env, pi_star).first;
        const prec_t b = pessimistic_value(vs, sc.env, pi_iter).first;
        diff.push_back(a - b);
    }
    prec_t mean = 0;
    for (prec_t v : diff) mean += v;
    mean /= prec_t(draws);
    prec_t var = 0;
    for (prec_t v : diff) var += (v - mean) * (v - mean);
    var /= prec_t(draws - 1);
    const prec_t se = std::sqrt(var / prec_t(draws));
    REQUIRE(std::abs(mean) <= 3.0 * se + 1e-9);
}

TEST_CASE("bayesian_gap_estimate aggregates nonnegative gaps that shrink with data", "[pspo]") {
    Scene sc = make_scene(43, 3, 2, 3, 5, 0.5);
    const ModelPrior prior = ModelPrior::discrete_uniform(sc.cls);

    const BayesianGapReport small =
        bayesian_gap_estimate(prior, sc.env, sc.rho, 30, 24, 0.1, 12, 5);
    const BayesianGapReport large =
        bayesian_gap_estimate(prior, sc.env, sc.rho, 20000, 24, 0.1, 12, 5);
    for (prec_t g : small.gaps) REQUIRE(g >= -1e-9);
    for (prec_t g : large.gaps) REQUIRE(g >= -1e-9);
    REQUIRE(large.mean_gap <= small.mean_gap + 1e-9);
    REQUIRE(small.c_draws.size() == 12);
    REQUIRE(small.c_dagger_draws.size() == 12);
    for (std::size_t i = 0; i < 12; ++i)
        if (std::isfinite(small.c_draws[i]))
            REQUIRE(small.c_dagger_draws[i] <= small.c_draws[i] + 1e-9);
}
