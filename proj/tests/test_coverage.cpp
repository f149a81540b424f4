// Coverage and concentrability: density ratios, the refined class-based
// coefficient, relative condition numbers, ranks, Bayesian averaging, and the
// Gaussian l1 bound.
#include <catch2/catch_amalgamated.hpp>

#include <offrl/coverage.hpp>
#include <offrl/model_zoo.hpp>

#include <cmath>

using namespace offrl;

namespace {

struct Scene {
    FiniteModelClass cls;
    SharedEnv env;
    TabularMDP truth;
    OfflineDistribution rho;
    TimePolicy comparator;
};

Scene make_scene(std::uint64_t seed, std::size_t S, std::size_t A, std::size_t H,
                 std::size_t size, prec_t pert) {
    Scene sc;
    sc.cls = make_finite_class(seed, S, A, size, pert);
    std::mt19937_64 rng = make_rng(seed, 0xe5f);
    sc.env = random_shared_env(rng, S, A, H);
    sc.truth = sc.cls.member_mdp(sc.env, sc.cls.truth_index);
    sc.rho = OfflineDistribution::uniform(S, A);
    sc.comparator = plan_optimal(sc.truth).first;
    return sc;
}

} // namespace

TEST_CASE("density-ratio concentrability special cases", "[coverage]") {
    Scene sc = make_scene(1, 4, 2, 3, 3, 0.5);

    SECTION("rho equal to the comparator occupancy gives exactly one") {
        const OccupancyMeasure occ = occupancy(sc.truth, sc.comparator);
        const OfflineDistribution rho{4, 2, occ.average};
        REQUIRE(concentrability(sc.comparator, sc.truth, rho) ==
                Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("point-mass occupancy against uniform rho gives the pair count") {
        // Deterministic chain that stays in (s=0, a=0) forever.
        TabularMDP mdp;
        mdp.num_states = 2;
        mdp.num_actions = 2;
        mdp.horizon = 3;
        mdp.transition.assign(8, 0.0);
        for (std::size_t a = 0; a < 2; ++a) {
            mdp.p(0, a, 0) = 1;
            mdp.p(1, a, 1) = 1;
        }
        mdp.reward.assign(4, 0.5);
        mdp.initial_dist = {1, 0};
        mdp.validate();
        const TimePolicy stay = TimePolicy::deterministic(3, 2, 2, sizvec(6, 0));
        REQUIRE(concentrability(stay, mdp, OfflineDistribution::uniform(2, 2)) ==
                Catch::Approx(4.0).margin(1e-12));
    }
    SECTION("unvisited comparator mass over a zero-rho pair gives infinity") {
        OfflineDistribution rho = OfflineDistribution::uniform(4, 2);
        const OccupancyMeasure occ = occupancy(sc.truth, sc.comparator);
        // Zero out a pair the comparator visits.
        std::size_t target = 0;
        for (std::size_t sa = 0; sa < 8; ++sa)
            if (occ.average[sa] > 1e-6) target = sa;
        numvec t = rho.table;
        const prec_t freed = t[target];
        t[target] = 0;
        for (prec_t& v : t) v /= (1 - freed);
        t[target] = 0;
        rho.table = t;
        REQUIRE(std::isinf(concentrability(sc.comparator, sc.truth, rho)));
    }
}

TEST_CASE("refined concentrability conventions and dominance", "[coverage]") {
    SECTION("singleton class yields the vacuous zero") {
        Scene sc = make_scene(3, 3, 2, 3, 1, 0.5);
        REQUIRE(refined_concentrability(sc.cls, sc.comparator, sc.truth, sc.rho) == 0.0);
    }
    SECTION("refined coefficient never exceeds the density ratio") {
        for (std::uint64_t seed = 10; seed < 30; ++seed) {
            Scene sc = make_scene(seed, 4, 2, 3, 6, 0.7);
            // Tilt rho to make the density ratio informative but finite.
            std::mt19937_64 rng = make_rng(seed, 0x77);
            std::uniform_real_distribution<prec_t> unif(0.2, 1.0);
            prec_t total = 0;
            for (prec_t& v : sc.rho.table) {
                v = unif(rng);
                total += v;
            }
            for (prec_t& v : sc.rho.table) v /= total;
            const prec_t c = concentrability(sc.comparator, sc.truth, sc.rho);
            const prec_t c_dag = refined_concentrability(sc.cls, sc.comparator, sc.truth, sc.rho);
            REQUIRE(std::isfinite(c));
            REQUIRE(c_dag <= c + 1e-9);
            REQUIRE(c_dag >= 0.0);
        }
    }
}

TEST_CASE("initial-distribution concentrability", "[coverage]") {
    SECTION("singleton class is zero by convention") {
        Scene sc = make_scene(31, 3, 2, 3, 1, 0.5);
        REQUIRE(initial_dist_concentrability(sc.cls, sc.truth, sc.rho) == 0.0);
    }
    SECTION("bounded by the worst d0-to-rho ratio and matches brute force") {
        Scene sc = make_scene(32, 4, 2, 3, 6, 0.6);
        const prec_t val = initial_dist_concentrability(sc.cls, sc.truth, sc.rho);

        prec_t brute = 0;
        const std::size_t S = 4, A = 2;
        for (std::size_t j = 0; j < sc.cls.size(); ++j) {
            if (j == sc.cls.truth_index) continue;
            prec_t num = 0, den = 0;
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a) {
                    prec_t l1 = 0;
                    for (std::size_t sp = 0; sp < S; ++sp)
                        l1 += std::abs(sc.cls.models[j][(s * A + a) * S + sp] -
                                       sc.truth.transition[(s * A + a) * S + sp]);
                    num += sc.truth.initial_dist[s] / prec_t(A) * l1 * l1;
                    den += sc.rho.rho(s, a) * l1 * l1;
                }
            if (den > 0) brute = std::max(brute, num / den);
        }
        REQUIRE(val == Catch::Approx(brute).margin(1e-12));

        // Uniform rho and uniform actions: the ratio of the weights alone
        // bounds the coefficient.
        prec_t weight_bound = 0;
        for (std::size_t s = 0; s < S; ++s)
            weight_bound = std::max(weight_bound,
                                    sc.truth.initial_dist[s] / prec_t(A) / sc.rho.rho(s, 0));
        REQUIRE(val <= weight_bound + 1e-12);
    }
}

TEST_CASE("relative condition number identities", "[coverage]") {
    Scene sc = make_scene(41, 3, 2, 3, 3, 0.5);
    const OneHotFeature feat = knr_one_hot_embedding(3, 2);
    const OccupancyMeasure occ = occupancy(sc.truth, sc.comparator);

    SECTION("identical distributions give one") {
        REQUIRE(relative_condition_number(feat, 3, 2, occ.average, occ.average, 0.0) ==
                Catch::Approx(1.0).margin(1e-9));
    }
    SECTION("one-hot features recover the density ratio on the support") {
        const prec_t c = concentrability(sc.comparator, sc.truth, sc.rho);
        const prec_t rel = relative_condition_number(feat, 3, 2, occ.average, sc.rho.table, 0.0);
        REQUIRE(std::isfinite(c));
        REQUIRE(rel == Catch::Approx(c).epsilon(1e-9));
    }
    SECTION("numerator mass outside the denominator range signals infinity") {
        numvec num(6, 0.0), den(6, 0.0);
        num[0] = 1.0; // only (s0,a0)
        den[5] = 1.0; // only (s2,a1)
        REQUIRE(std::isinf(relative_condition_number(feat, 3, 2, num, den, 0.0)));
        // A ridge restores finiteness.
        REQUIRE(std::isfinite(relative_condition_number(feat, 3, 2, num, den, 1e-3)));
    }
    SECTION("positive rescaling of the feature map cancels") {
        struct Scaled {
            OneHotFeature base;
            prec_t scale;
            std::size_t dim() const { return base.dim(); }
            Eigen::VectorXd operator()(std::size_t s, std::size_t a) const {
                return scale * base(s, a);
            }
        };
        const Scaled scaled{feat, 3.7};
        const prec_t a = relative_condition_number(feat, 3, 2, occ.average, sc.rho.table, 0.0);
        const prec_t b = relative_condition_number(scaled, 3, 2, occ.average, sc.rho.table, 0.0);
        REQUIRE(a == Catch::Approx(b).epsilon(1e-9));
    }
}

TEST_CASE("numerical rank counts significant directions", "[coverage]") {
    REQUIRE(numerical_rank(Eigen::MatrixXd::Identity(4, 4)) == 4);

    Eigen::VectorXd v(3);
    v << 1, 2, 3;
    REQUIRE(numerical_rank(Eigen::MatrixXd(v * v.transpose())) == 1);

    // Sigma_rho from rho supported on k one-hot pairs has rank k.
    const OneHotFeature feat = knr_one_hot_embedding(2, 2);
    numvec rho = {0.5, 0.5, 0.0, 0.0};
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(4, 4);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t a = 0; a < 2; ++a) {
            const Eigen::VectorXd f = feat(s, a);
            sigma += rho[s * 2 + a] * f * f.transpose();
        }
    REQUIRE(numerical_rank(sigma) == 2);

    Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
    bad(0, 0) = -0.5;
    REQUIRE_THROWS(numerical_rank(bad));
}

TEST_CASE("coverage report assembles the pieces coherently", "[coverage]") {
    Scene sc = make_scene(51, 4, 2, 3, 6, 0.6);
    const CoverageReport rep = make_coverage_report(sc.cls, sc.comparator, sc.truth, sc.rho);
    REQUIRE(rep.refined_C_dagger <= rep.density_ratio_C + 1e-9);
    REQUIRE(rep.C_d0 >= 0.0);
    REQUIRE(rep.rank_sigma_rho == 8); // uniform rho covers every pair
    REQUIRE(rep.ratio_table.size() == 8);
    if (std::isfinite(rep.density_ratio_C))
        REQUIRE(rep.rel_cond_number == Catch::Approx(rep.density_ratio_C).epsilon(1e-9));
}

TEST_CASE("Bayesian coverage averages per-draw quantities", "[coverage]") {
    Scene sc = make_scene(61, 3, 2, 3, 5, 0.5);

    SECTION("degenerate prior reproduces the frequentist report exactly") {
        const ModelPrior prior = ModelPrior::discrete_degenerate(sc.cls, sc.cls.truth_index);
        const BayesianCoverageReport bay = bayesian_coverage(prior, sc.env, sc.rho, 10, 3);
        const CoverageReport freq = make_coverage_report(sc.cls, sc.comparator, sc.truth, sc.rho);
        for (prec_t c : bay.c_draws) REQUIRE(c == freq.density_ratio_C);
        for (prec_t cd : bay.c_dagger_draws) REQUIRE(cd == freq.refined_C_dagger);
        for (prec_t c0 : bay.c_d0_draws) REQUIRE(c0 == freq.C_d0);
    }
    SECTION("per-draw refined coefficient never exceeds per-draw density ratio") {
        const ModelPrior prior = ModelPrior::discrete_uniform(sc.cls);
        const BayesianCoverageReport bay = bayesian_coverage(prior, sc.env, sc.rho, 24, 5);
        REQUIRE(bay.c_draws.size() == 24);
        for (std::size_t i = 0; i < bay.c_draws.size(); ++i)
            if (std::isfinite(bay.c_draws[i]))
                REQUIRE(bay.c_dagger_draws[i] <= bay.c_draws[i] + 1e-9);
        REQUIRE(bay.mean_c_dagger <= bay.mean_c + 1e-9);
    }
    SECTION("independent seeds agree within sampling error") {
        const ModelPrior prior = ModelPrior::discrete_uniform(sc.cls);
        const BayesianCoverageReport a = bayesian_coverage(prior, sc.env, sc.rho, 60, 7);
        const BayesianCoverageReport b = bayesian_coverage(prior, sc.env, sc.rho, 60, 8);
        const prec_t se = std::sqrt(a.se_c * a.se_c + b.se_c * b.se_c);
        REQUIRE(std::abs(a.mean_c - b.mean_c) <= 3.5 * se + 1e-9);
    }
}

TEST_CASE("Gaussian l1 bound sweep", "[coverage]") {
    SECTION("coincident means are at distance zero") {
        const GaussianL1Check chk = gaussian_l1_bound_check({0.0}, {0.0}, 0.5);
        REQUIRE(chk.l1 == Catch::Approx(0.0).margin(1e-9));
        REQUIRE(chk.bound == 0.0);
    }
    SECTION("inequality holds across noise scales") {
        for (prec_t zeta : {0.1, 1.0, 10.0}) {
            const GaussianL1Check chk = gaussian_l1_bound_check({0.0}, {0.6 * zeta}, zeta);
            REQUIRE(chk.l1 <= chk.bound + 1e-6);
            REQUIRE(chk.bound == Catch::Approx(0.6).margin(1e-12));
            // The l1 value itself is scale invariant in (separation/zeta).
        }
    }
    SECTION("dimension above two is rejected") {
        REQUIRE_THROWS(gaussian_l1_bound_check({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, 1.0));
    }
}
