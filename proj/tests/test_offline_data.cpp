// Offline distributions, dataset sampling, empirical expectations, and the
// behavior-policy conversions.
#include <catch2/catch_amalgamated.hpp>

#include <offrl/model_zoo.hpp>
#include <offrl/offline_data.hpp>

#include <cmath>

using namespace offrl;

namespace {

TabularMDP fixture_mdp(std::uint64_t seed, std::size_t S, std::size_t A, std::size_t H) {
    std::mt19937_64 rng = make_rng(seed, 0x0ff);
    const SharedEnv env = random_shared_env(rng, S, A, H);
    return make_mdp(env, random_transition_table(rng, S, A));
}

} // namespace

TEST_CASE("sample_dataset basic contracts", "[data]") {
    const TabularMDP mdp = fixture_mdp(1, 4, 2, 3);
    const OfflineDistribution rho = OfflineDistribution::uniform(4, 2);

    SECTION("n = 0 gives an empty dataset") {
        const OfflineDataset d = sample_dataset(mdp, rho, 0, 5);
        REQUIRE(d.n() == 0);
    }
    SECTION("identical seeds give identical records") {
        const OfflineDataset a = sample_dataset(mdp, rho, 500, 5);
        const OfflineDataset b = sample_dataset(mdp, rho, 500, 5);
        REQUIRE(a.n() == b.n());
        for (std::size_t i = 0; i < a.n(); ++i) {
            REQUIRE(a.records[i].s == b.records[i].s);
            REQUIRE(a.records[i].a == b.records[i].a);
            REQUIRE(a.records[i].sp == b.records[i].sp);
            REQUIRE(a.records[i].r == b.records[i].r);
        }
    }
    SECTION("rewards are copied from the reward table") {
        const OfflineDataset d = sample_dataset(mdp, rho, 200, 6);
        for (const DataRecord& rec : d.records) REQUIRE(rec.r == mdp.r(rec.s, rec.a));
    }
}

TEST_CASE("point-mass distribution on a deterministic model repeats one record", "[data]") {
    TabularMDP mdp = fixture_mdp(2, 3, 2, 2);
    // Make (s=1, a=0) deterministic into state 2.
    for (std::size_t sp = 0; sp < 3; ++sp) mdp.p(1, 0, sp) = sp == 2 ? 1.0 : 0.0;
    OfflineDistribution rho{3, 2, numvec(6, 0.0)};
    rho.rho(1, 0) = 1.0;
    const OfflineDataset d = sample_dataset(mdp, rho, 50, 9);
    for (const DataRecord& rec : d.records) {
        REQUIRE(rec.s == 1);
        REQUIRE(rec.a == 0);
        REQUIRE(rec.sp == 2);
    }
}

TEST_CASE("large-sample frequencies match rho and the transition law", "[data]") {
    const TabularMDP mdp = fixture_mdp(3, 4, 2, 3);
    OfflineDistribution rho = OfflineDistribution::uniform(4, 2);
    rho.table = {0.05, 0.10, 0.20, 0.05, 0.15, 0.10, 0.25, 0.10};
    const std::size_t n = 100000;
    const OfflineDataset d = sample_dataset(mdp, rho, n, 11);

    numvec pair_freq(8, 0.0);
    std::vector<numvec> next_freq(8, numvec(4, 0.0));
    for (const DataRecord& rec : d.records) {
        pair_freq[rec.s * 2 + rec.a] += 1;
        next_freq[rec.s * 2 + rec.a][rec.sp] += 1;
    }
    for (std::size_t sa = 0; sa < 8; ++sa) {
        const prec_t p = rho.table[sa];
        const prec_t se = std::sqrt(p * (1 - p) / prec_t(n));
        REQUIRE(std::abs(pair_freq[sa] / prec_t(n) - p) <= 3.5 * se);
        const prec_t m = pair_freq[sa];
        for (std::size_t sp = 0; sp < 4; ++sp) {
            const prec_t q = mdp.p(sa / 2, sa % 2, sp);
            const prec_t se_q = std::sqrt(std::max<prec_t>(q * (1 - q), 1e-12) / m);
            REQUIRE(std::abs(next_freq[sa][sp] / m - q) <= 3.5 * se_q + 1e-9);
        }
    }
}

TEST_CASE("empirical_l1sq arithmetic and bounds", "[data]") {
    const TabularMDP mdp = fixture_mdp(4, 3, 2, 2);
    const OfflineDistribution rho = OfflineDistribution::uniform(3, 2);
    const OfflineDataset d = sample_dataset(mdp, rho, 300, 13);
    std::mt19937_64 rng = make_rng(5, 0x0ff);
    const numvec p = random_transition_table(rng, 3, 2);
    const numvec q = random_transition_table(rng, 3, 2);
    const numvec w = random_transition_table(rng, 3, 2);

    SECTION("identical models are at distance zero") {
        REQUIRE(empirical_l1sq(d, p, p, 3, 2) == 0.0);
    }
    SECTION("range and symmetry") {
        const prec_t v = empirical_l1sq(d, p, q, 3, 2);
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 4.0);
        REQUIRE(v == Catch::Approx(empirical_l1sq(d, q, p, 3, 2)).margin(1e-14));
    }
    SECTION("quadratic triangle bound") {
        const prec_t pw = empirical_l1sq(d, p, w, 3, 2);
        const prec_t pq = empirical_l1sq(d, p, q, 3, 2);
        const prec_t qw = empirical_l1sq(d, q, w, 3, 2);
        REQUIRE(pw <= 2 * pq + 2 * qw + 1e-12);
    }
    SECTION("dataset concentrated on one pair reduces to a single distance") {
        OfflineDistribution point{3, 2, numvec(6, 0.0)};
        point.rho(2, 1) = 1.0;
        const OfflineDataset single = sample_dataset(mdp, point, 40, 17);
        numvec diff(3, 0.0);
        prec_t l1 = 0;
        for (std::size_t sp = 0; sp < 3; ++sp) l1 += std::abs(p[(2 * 2 + 1) * 3 + sp] - q[(2 * 2 + 1) * 3 + sp]);
        REQUIRE(empirical_l1sq(single, p, q, 3, 2) == Catch::Approx(l1 * l1).margin(1e-13));
        (void)diff;
    }
    SECTION("empty dataset is rejected") {
        const OfflineDataset empty = sample_dataset(mdp, rho, 0, 3);
        REQUIRE_THROWS_WITH(empirical_l1sq(empty, p, q, 3, 2),
                            Catch::Matchers::ContainsSubstring("empty"));
    }
}

TEST_CASE("occupancy_as_offline equals the average occupancy table", "[data]") {
    const TabularMDP mdp = fixture_mdp(6, 4, 3, 4);
    std::mt19937_64 rng = make_rng(7, 0x0ff);
    const TimePolicy behavior = random_policy(rng, 4, 4, 3);
    const OfflineDistribution rho = occupancy_as_offline(mdp, behavior);
    rho.validate();
    const OccupancyMeasure occ = occupancy(mdp, behavior);
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t a = 0; a < 3; ++a)
            REQUIRE(rho.rho(s, a) == Catch::Approx(occ.avg(s, a)).margin(1e-14));
}

TEST_CASE("stationary distribution conversion reports its fixed-point gap", "[data]") {
    const TabularMDP mdp = fixture_mdp(8, 4, 2, 3);
    const TimePolicy behavior = TimePolicy::uniform(3, 4, 2);
    const OfflineDistribution rho = stationary_as_offline(mdp, behavior);
    rho.validate();
    // The reported stationarity gap of the converged table is tiny.
    REQUIRE(stationarity_gap(mdp, behavior, rho) <= 1e-6);
}
