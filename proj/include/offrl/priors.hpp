// Bayesian model priors and conjugate posterior updates for the three
// supported families: discrete weights over a finite class, per-(s,a)
// Dirichlet rows, and a matrix-normal law over linear-Gaussian dynamics.
#pragma once

#include "offrl/estimation.hpp"

namespace offrl {

enum class PriorFamily { discrete, dirichlet, matrix_normal };

/// Prior over transition models. Exactly the fields of the active family are
/// meaningful; validate() checks them.
struct ModelPrior {
    PriorFamily family = PriorFamily::discrete;

    // discrete: weights over the members of a finite class
    FiniteModelClass model_class;
    numvec weights;

    // dirichlet: concentration alpha(s,a,s') > 0, row-major like a table
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    numvec alpha;

    // matrix_normal: W has iid rows N(mean row, zeta^2 * col_precision^{-1});
    // the prior is mean W0 with column precision lambda I. `cross` accumulates
    // lambda W0 + sum s' phi^T so the posterior mean is always cross *
    // col_precision^{-1}, which reproduces the ridge solution when W0 = 0.
    Eigen::MatrixXd w0;            // state_dim x feature_dim
    Eigen::MatrixXd cross;         // state_dim x feature_dim
    Eigen::MatrixXd col_precision; // feature_dim x feature_dim
    prec_t zeta = 1.0;
    prec_t lambda = 1.0;

    Eigen::MatrixXd mean_w() const {
        return col_precision.ldlt().solve(cross.transpose()).transpose();
    }

    void validate() const {
        switch (family) {
        case PriorFamily::discrete: {
            model_class.validate();
            require(weights.size() == model_class.size(), "ModelPrior: ", weights.size(),
                    " weights for a class of ", model_class.size());
            prec_t total = 0;
            for (std::size_t i = 0; i < weights.size(); ++i) {
                require(weights[i] >= 0, "ModelPrior: weight ", i, " = ", weights[i], " is negative");
                total += weights[i];
            }
            require(std::abs(total - 1.0) <= PROB_TOL, "ModelPrior: weights sum to ", total);
            break;
        }
        case PriorFamily::dirichlet: {
            require(num_states > 0 && num_actions > 0, "ModelPrior: dirichlet dimensions unset");
            require(alpha.size() == num_states * num_actions * num_states, "ModelPrior: alpha has ",
                    alpha.size(), " entries, expected ", num_states * num_actions * num_states);
            for (std::size_t i = 0; i < alpha.size(); ++i)
                require(alpha[i] > 0, "ModelPrior: alpha entry ", i, " = ", alpha[i],
                        " must be strictly positive");
            break;
        }
        case PriorFamily::matrix_normal: {
            require(zeta > 0 && lambda > 0, "ModelPrior: zeta and lambda must be > 0");
            require(w0.rows() > 0 && w0.cols() > 0, "ModelPrior: W0 unset");
            require(col_precision.rows() == w0.cols() && col_precision.cols() == w0.cols(),
                    "ModelPrior: col_precision is ", col_precision.rows(), "x", col_precision.cols(),
                    ", expected ", w0.cols(), "x", w0.cols());
            break;
        }
        }
    }

    static ModelPrior discrete_uniform(FiniteModelClass cls) {
        ModelPrior p;
        p.family = PriorFamily::discrete;
        p.weights.assign(cls.size(), 1.0 / prec_t(cls.size()));
        p.model_class = std::move(cls);
        return p;
    }

    /// Prior putting weight 1 on one member; Bayesian quantities under it
    /// reduce to their frequentist counterparts.
    static ModelPrior discrete_degenerate(FiniteModelClass cls, std::size_t index) {
        require(index < cls.size(), "ModelPrior: degenerate index ", index, " out of range");
        ModelPrior p;
        p.family = PriorFamily::discrete;
        p.weights.assign(cls.size(), 0.0);
        p.weights[index] = 1.0;
        p.model_class = std::move(cls);
        return p;
    }

    static ModelPrior dirichlet_uniform(std::size_t num_states, std::size_t num_actions,
                                        prec_t concentration = 1.0) {
        require(concentration > 0, "ModelPrior: concentration must be > 0");
        ModelPrior p;
        p.family = PriorFamily::dirichlet;
        p.num_states = num_states;
        p.num_actions = num_actions;
        p.alpha.assign(num_states * num_actions * num_states, concentration);
        return p;
    }

    static ModelPrior matrix_normal(Eigen::MatrixXd mean, prec_t zeta, prec_t lambda) {
        require(zeta > 0 && lambda > 0, "ModelPrior: zeta and lambda must be > 0");
        ModelPrior p;
        p.family = PriorFamily::matrix_normal;
        p.w0 = mean;
        p.cross = lambda * mean;
        p.col_precision = lambda * Eigen::MatrixXd::Identity(mean.cols(), mean.cols());
        p.zeta = zeta;
        p.lambda = lambda;
        return p;
    }
};

/// Posterior: same family with updated parameters plus dataset provenance.
struct ModelPosterior {
    ModelPrior params;
    std::size_t n = 0;
    std::string source;
};

/// Conjugate / exact Bayesian update from tabular transition counts.
/// Discrete: weights times exact likelihood, renormalized in log space.
/// Dirichlet: concentration plus counts. Matrix-normal is not count-based;
/// use the feature-vector overload.
inline ModelPosterior posterior_update(const ModelPrior& prior, const TransitionCounts& counts,
                                       std::string source = "") {
    prior.validate();
    ModelPosterior post{prior, counts.n, std::move(source)};
    switch (prior.family) {
    case PriorFamily::discrete: {
        if (counts.n == 0) return post;
        const FiniteModelClass& cls = prior.model_class;
        numvec logw(cls.size(), -inf());
        prec_t best = -inf();
        for (std::size_t j = 0; j < cls.size(); ++j) {
            if (prior.weights[j] <= 0) continue;
            prec_t lw = std::log(prior.weights[j]);
            const numvec& p = cls.models[j];
            for (std::size_t i = 0; i < p.size() && lw > -inf(); ++i) {
                const prec_t c = counts.triple[i];
                if (c == 0) continue;
                lw = p[i] > 0 ? lw + c * std::log(p[i]) : -inf();
            }
            logw[j] = lw;
            best = std::max(best, lw);
        }
        require(best > -inf(), "posterior_update: every positive-prior member assigns zero "
                               "probability to some observed transition");
        prec_t total = 0;
        for (std::size_t j = 0; j < cls.size(); ++j) {
            post.params.weights[j] = logw[j] > -inf() ? std::exp(logw[j] - best) : 0.0;
            total += post.params.weights[j];
        }
        for (prec_t& w : post.params.weights) w /= total;
        break;
    }
    case PriorFamily::dirichlet: {
        require(counts.num_states == prior.num_states && counts.num_actions == prior.num_actions,
                "posterior_update: counts are over ", counts.num_states, "x", counts.num_actions,
                ", prior is over ", prior.num_states, "x", prior.num_actions);
        for (std::size_t i = 0; i < post.params.alpha.size(); ++i)
            post.params.alpha[i] += prec_t(counts.triple[i]);
        break;
    }
    case PriorFamily::matrix_normal:
        require(false, "posterior_update: matrix-normal updates need feature vectors, "
                       "use the (phis, next_states) overload");
    }
    return post;
}

inline ModelPosterior posterior_update(const ModelPrior& prior, const OfflineDataset& data) {
    if (prior.family == PriorFamily::discrete)
        return posterior_update(
            prior, count_transitions(data, prior.model_class.num_states, prior.model_class.num_actions),
            data.source);
    require(prior.family == PriorFamily::dirichlet,
            "posterior_update: matrix-normal updates need feature vectors");
    return posterior_update(prior, count_transitions(data, prior.num_states, prior.num_actions),
                            data.source);
}

/// Matrix-normal conjugate update: col_precision += sum phi phi^T and
/// cross += sum s' phi^T, so mean_w() is the ridge solution with the prior's
/// lambda whenever W0 = 0.
inline ModelPosterior posterior_update(const ModelPrior& prior, const std::vector<Eigen::VectorXd>& phis,
                                       const std::vector<Eigen::VectorXd>& next_states,
                                       std::string source = "") {
    prior.validate();
    require(prior.family == PriorFamily::matrix_normal,
            "posterior_update: feature-vector data requires a matrix-normal prior");
    require(phis.size() == next_states.size(), "posterior_update: ", phis.size(), " features vs ",
            next_states.size(), " next states");
    ModelPosterior post{prior, phis.size(), std::move(source)};
    for (std::size_t i = 0; i < phis.size(); ++i) {
        require(phis[i].size() == prior.w0.cols() && next_states[i].size() == prior.w0.rows(),
                "posterior_update: record ", i, " has inconsistent dimensions");
        post.params.col_precision.noalias() += phis[i] * phis[i].transpose();
        post.params.cross.noalias() += next_states[i] * phis[i].transpose();
    }
    return post;
}

/// One draw from a posterior (or prior). Exactly the fields of the family are
/// filled: discrete fills member_index and the member's table, dirichlet
/// fills the table, matrix_normal fills W.
struct SampledModel {
    long member_index = -1; ///< >= 0 only for discrete draws
    numvec transition;
    Eigen::MatrixXd W;
};

template <typename RNG> SampledModel posterior_sample(const ModelPrior& dist, RNG& rng) {
    dist.validate();
    SampledModel out;
    switch (dist.family) {
    case PriorFamily::discrete: {
        const std::size_t j = sample_row(rng, dist.weights, 0, dist.weights.size());
        out.member_index = long(j);
        out.transition = dist.model_class.models[j];
        break;
    }
    case PriorFamily::dirichlet: {
        const std::size_t S = dist.num_states, A = dist.num_actions;
        out.transition.resize(S * A * S);
        numvec row_alpha(S);
        for (std::size_t sa = 0; sa < S * A; ++sa) {
            std::copy(dist.alpha.begin() + sa * S, dist.alpha.begin() + (sa + 1) * S, row_alpha.begin());
            const numvec row = sample_dirichlet(rng, row_alpha);
            std::copy(row.begin(), row.end(), out.transition.begin() + sa * S);
        }
        break;
    }
    case PriorFamily::matrix_normal: {
        // W = mean + zeta * Z * col_precision^{-1/2}: rows get covariance
        // zeta^2 col_precision^{-1}
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dist.col_precision);
        require(es.eigenvalues().minCoeff() > 0, "posterior_sample: column precision not positive definite");
        Eigen::MatrixXd half_inv = es.eigenvectors()
                                   * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal()
                                   * es.eigenvectors().transpose();
        std::normal_distribution<prec_t> gauss(0.0, 1.0);
        Eigen::MatrixXd z(dist.w0.rows(), dist.w0.cols());
        for (long i = 0; i < z.rows(); ++i)
            for (long j = 0; j < z.cols(); ++j) z(i, j) = gauss(rng);
        out.W = dist.mean_w() + dist.zeta * z * half_inv;
        break;
    }
    }
    return out;
}

template <typename RNG> SampledModel posterior_sample(const ModelPosterior& post, RNG& rng) {
    return posterior_sample(post.params, rng);
}

inline SampledModel posterior_sample(const ModelPosterior& post, std::uint64_t seed) {
    std::mt19937_64 rng = make_rng(seed, 0xba1e);
    return posterior_sample(post.params, rng);
}

} // namespace offrl
