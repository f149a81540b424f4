// Offline distributions, dataset sampling from rho x P*, transition-count
// aggregation, and empirical expectation helpers.
#pragma once

#include "offrl/dp.hpp"

#include <string>

namespace offrl {

/// Explicit offline distribution rho(s,a). Behavior-policy inputs are
/// converted eagerly (coverage computations need rho pointwise).
struct OfflineDistribution {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    numvec table; // rho(s,a), row-major

    prec_t rho(std::size_t s, std::size_t a) const { return table[s * num_actions + a]; }
    prec_t& rho(std::size_t s, std::size_t a) { return table[s * num_actions + a]; }

    static OfflineDistribution uniform(std::size_t num_states, std::size_t num_actions) {
        require(num_states > 0 && num_actions > 0, "OfflineDistribution::uniform: sizes must be positive");
        return OfflineDistribution{num_states, num_actions,
                                   numvec(num_states * num_actions, 1.0 / prec_t(num_states * num_actions))};
    }

    void validate() const {
        require(table.size() == num_states * num_actions, "OfflineDistribution: table has ", table.size(),
                " entries, expected ", num_states * num_actions);
        detail::check_dist(table, 0, table.size(), PROB_TOL, "OfflineDistribution");
    }
};

/// One transition tuple; rewards are copied from the known reward table.
struct DataRecord {
    std::size_t s = 0;
    std::size_t a = 0;
    prec_t r = 0;
    std::size_t sp = 0;
};

/// i.i.d. offline transitions with provenance (seed + source descriptor).
struct OfflineDataset {
    std::vector<DataRecord> records;
    std::uint64_t seed = 0;
    std::string source;

    std::size_t n() const { return records.size(); }
};

/// Aggregated counts over a dataset: count(s,a,s') and the (s,a) marginal.
/// All dataset-wide sums reduce to sums over these tables.
struct TransitionCounts {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::size_t n = 0;
    std::vector<std::uint64_t> triple; // (s,a,s')
    std::vector<std::uint64_t> pair;   // (s,a)

    std::uint64_t c3(std::size_t s, std::size_t a, std::size_t sp) const {
        return triple[(s * num_actions + a) * num_states + sp];
    }
    std::uint64_t c2(std::size_t s, std::size_t a) const { return pair[s * num_actions + a]; }
};

inline TransitionCounts count_transitions(const OfflineDataset& data, std::size_t S, std::size_t A) {
    TransitionCounts counts{S, A, data.n(), std::vector<std::uint64_t>(S * A * S, 0),
                            std::vector<std::uint64_t>(S * A, 0)};
    for (const DataRecord& rec : data.records) {
        require(rec.s < S && rec.a < A && rec.sp < S, "count_transitions: record (s=", rec.s, ",a=", rec.a,
                ",sp=", rec.sp, ") out of range for |S|=", S, " |A|=", A);
        ++counts.triple[(rec.s * A + rec.a) * S + rec.sp];
        ++counts.pair[rec.s * A + rec.a];
    }
    return counts;
}

/// Draws n i.i.d. records: (s,a) ~ rho, r = r(s,a), s' ~ P*(.|s,a).
inline OfflineDataset sample_dataset(const TabularMDP& mdp_true, const OfflineDistribution& rho,
                                     std::size_t n, std::uint64_t seed) {
    require(rho.num_states == mdp_true.num_states && rho.num_actions == mdp_true.num_actions,
            "sample_dataset: rho dimensions (", rho.num_states, ",", rho.num_actions,
            ") do not match the model");
    const std::size_t S = mdp_true.num_states, A = mdp_true.num_actions;
    std::mt19937_64 rng = make_rng(seed, 0x0ffd);
    OfflineDataset data;
    data.seed = seed;
    data.source = "rho_table";
    data.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t sa = sample_row(rng, rho.table, 0, S * A);
        const std::size_t s = sa / A, a = sa % A;
        const std::size_t sp = sample_row(rng, mdp_true.transition, mdp_true.tidx(s, a, 0), S);
        data.records.push_back(DataRecord{s, a, mdp_true.r(s, a), sp});
    }
    return data;
}

/// Average over the dataset's (s,a) marginal of ||p(.|s,a) - q(.|s,a)||_1^2.
inline prec_t empirical_l1sq(const TransitionCounts& counts, const numvec& p, const numvec& q) {
    require(counts.n > 0, "empirical_l1sq: empty dataset, the average is undefined");
    const std::size_t S = counts.num_states, A = counts.num_actions;
    require(p.size() == S * A * S && q.size() == S * A * S, "empirical_l1sq: model dimensions (", p.size(),
            ", ", q.size(), ") do not match counts (", S * A * S, ")");
    prec_t total = 0;
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) {
            const std::uint64_t c = counts.c2(s, a);
            if (c == 0) continue;
            const prec_t d = l1_row_distance(p, q, S, A, s, a);
            total += prec_t(c) * d * d;
        }
    return total / prec_t(counts.n);
}

inline prec_t empirical_l1sq(const OfflineDataset& data, const numvec& p, const numvec& q, std::size_t S,
                             std::size_t A) {
    return empirical_l1sq(count_transitions(data, S, A), p, q);
}

/// Offline distribution equal to the average occupancy of the behavior policy.
inline OfflineDistribution occupancy_as_offline(const TabularMDP& mdp_true, const TimePolicy& behavior) {
    const OccupancyMeasure occ = occupancy(mdp_true, behavior);
    return OfflineDistribution{mdp_true.num_states, mdp_true.num_actions, occ.average};
}

/// Offline distribution rho(s,a) = rho(s) pi_b(a|s) with rho(s) the stationary
/// state distribution of the behavior chain (power iteration from uniform).
/// Used by low-rank scenarios, whose analysis assumes stationarity; behavior
/// rows are read at h = 0.
inline OfflineDistribution stationary_as_offline(const TabularMDP& mdp_true, const TimePolicy& behavior,
                                                 std::size_t max_iter = 20000, prec_t tol = 1e-14) {
    check_dims(mdp_true, behavior);
    const std::size_t S = mdp_true.num_states, A = mdp_true.num_actions;
    numvec dist(S, prec_t(1) / prec_t(S));
    for (std::size_t it = 0; it < max_iter; ++it) {
        numvec next(S, 0.0);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a) {
                const prec_t mass = dist[s] * behavior.pi(0, s, a);
                if (mass == 0) continue;
                const std::size_t base = mdp_true.tidx(s, a, 0);
                for (std::size_t sp = 0; sp < S; ++sp) next[sp] += mass * mdp_true.transition[base + sp];
            }
        prec_t diff = 0;
        for (std::size_t s = 0; s < S; ++s) diff += std::abs(next[s] - dist[s]);
        dist = std::move(next);
        if (diff < tol) break;
    }
    OfflineDistribution rho{S, A, numvec(S * A)};
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) rho.rho(s, a) = dist[s] * behavior.pi(0, s, a);
    return rho;
}

/// l1 change of rho's state marginal after one step of the behavior chain;
/// below ~1e-6 the distribution is stationary for practical purposes.
inline prec_t stationarity_gap(const TabularMDP& mdp_true, const TimePolicy& behavior,
                               const OfflineDistribution& rho) {
    const std::size_t S = mdp_true.num_states, A = mdp_true.num_actions;
    numvec state(S, 0.0), pushed(S, 0.0);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) {
            const prec_t mass = rho.rho(s, a);
            state[s] += mass;
            const std::size_t base = mdp_true.tidx(s, a, 0);
            for (std::size_t sp = 0; sp < S; ++sp) pushed[sp] += mass * mdp_true.transition[base + sp];
        }
    // compare against the marginal re-weighted by the behavior's action split
    prec_t diff = 0;
    for (std::size_t s = 0; s < S; ++s) diff += std::abs(pushed[s] - state[s]);
    (void)behavior;
    return diff;
}

} // namespace offrl
