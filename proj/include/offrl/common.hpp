// Shared scalar types, seeded RNG streams, simplex sampling, and the logger.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace offrl {

using prec_t = double;
using numvec = std::vector<prec_t>;
using sizvec = std::vector<std::size_t>;

constexpr prec_t PROB_TOL = 1e-12;
inline constexpr prec_t inf() { return std::numeric_limits<prec_t>::infinity(); }

/// Builds an error message by streaming the arguments together.
template <typename... Args> std::string msg(const Args&... args) {
    std::ostringstream ss;
    (ss << ... << args);
    return ss.str();
}

/// Throws std::invalid_argument when the condition fails.
template <typename... Args> void require(bool cond, const Args&... args) {
    if (!cond) throw std::invalid_argument(msg(args...));
}

// ---------------------------------------------------------------------------
// RNG streams
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Independent deterministic generator for (seed, stream); used so parallel
/// trials draw from disjoint streams regardless of scheduling order.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    const std::uint64_t s = splitmix64(splitmix64(seed) ^ splitmix64(stream * 0x9e3779b97f4a7c15ull + 1));
    return std::mt19937_64(s);
}

/// Samples an index from unnormalized nonnegative weights.
template <typename RNG> std::size_t sample_weighted(RNG& rng, const numvec& w) {
    prec_t total = 0;
    for (prec_t x : w) total += x;
    require(total > 0, "sample_weighted: weights sum to ", total);
    std::uniform_real_distribution<prec_t> unif(0.0, 1.0);
    prec_t u = unif(rng) * total, acc = 0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        acc += w[i];
        if (u < acc) return i;
    }
    return w.size() - 1;
}

/// Samples from a probability row stored at w[offset..offset+n).
template <typename RNG>
std::size_t sample_row(RNG& rng, const numvec& w, std::size_t offset, std::size_t n) {
    std::uniform_real_distribution<prec_t> unif(0.0, 1.0);
    prec_t u = unif(rng), acc = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        acc += w[offset + i];
        if (u < acc) return i;
    }
    return n - 1;
}

/// Draws from Dirichlet(alpha) via normalized Gamma variates.
template <typename RNG> numvec sample_dirichlet(RNG& rng, const numvec& alpha) {
    numvec out(alpha.size());
    prec_t total = 0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        require(alpha[i] > 0, "sample_dirichlet: alpha[", i, "] = ", alpha[i], " must be > 0");
        std::gamma_distribution<prec_t> gamma(alpha[i], 1.0);
        out[i] = gamma(rng);
        total += out[i];
    }
    if (total <= 0) { // all-zero draw is possible only for tiny alphas; fall back to the mean
        total = 0;
        for (std::size_t i = 0; i < alpha.size(); ++i) { out[i] = alpha[i]; total += alpha[i]; }
    }
    for (prec_t& x : out) x /= total;
    return out;
}

/// Uniform draw from the probability simplex of the given dimension.
template <typename RNG> numvec sample_simplex(RNG& rng, std::size_t dim) {
    return sample_dirichlet(rng, numvec(dim, 1.0));
}

// ---------------------------------------------------------------------------
// Logging: level read once from OFFLINE_RL_LOG in {error,warn,info,debug}.
// ---------------------------------------------------------------------------

enum class LogLevel : int { error = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("OFFLINE_RL_LOG");
        if (env == nullptr) return LogLevel::warn;
        const std::string v(env);
        if (v == "error") return LogLevel::error;
        if (v == "warn") return LogLevel::warn;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        std::fprintf(stderr, "[warn] OFFLINE_RL_LOG=%s not recognized; using warn\n", env);
        return LogLevel::warn;
    }();
    return level;
}

template <typename... Args> void log_at(LogLevel level, const Args&... args) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(level)], msg(args...).c_str());
}

template <typename... Args> void log_error(const Args&... args) { log_at(LogLevel::error, args...); }
template <typename... Args> void log_warn(const Args&... args) { log_at(LogLevel::warn, args...); }
template <typename... Args> void log_info(const Args&... args) { log_at(LogLevel::info, args...); }
template <typename... Args> void log_debug(const Args&... args) { log_at(LogLevel::debug, args...); }

} // namespace offrl
