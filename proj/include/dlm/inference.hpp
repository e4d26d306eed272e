#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "filter.hpp"
#include "optimize.hpp"
#include "parameters.hpp"
#include "random.hpp"
#include "statespace.hpp"
#include "timeseries.hpp"

namespace dlm {

enum class PriorKind { half_normal, uniform, normal };

/// Univariate prior density for one θ entry.
struct Prior {
    PriorKind kind = PriorKind::uniform;
    double a = 0.0;  ///< scale (half-normal), lower bound (uniform), mean (normal)
    double b = 0.0;  ///< upper bound (uniform), sd (normal)

    static Prior half_normal(double scale) {
        if (!(scale > 0.0)) throw ConfigError("half-normal prior needs a positive scale");
        return {PriorKind::half_normal, scale, 0.0};
    }
    static Prior uniform(double lower, double upper) {
        if (!(upper > lower)) throw ConfigError("uniform prior needs lower < upper");
        return {PriorKind::uniform, lower, upper};
    }
    static Prior normal(double mean, double sd) {
        if (!(sd > 0.0)) throw ConfigError("normal prior needs a positive sd");
        return {PriorKind::normal, mean, sd};
    }

    [[nodiscard]] double log_density(double v) const {
        constexpr double ninf = -std::numeric_limits<double>::infinity();
        const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
        if (!std::isfinite(v)) return ninf;
        switch (kind) {
            case PriorKind::half_normal:
                if (v < 0.0) return ninf;
                return std::log(2.0) - std::log(a) - half_log_2pi - 0.5 * (v / a) * (v / a);
            case PriorKind::uniform:
                if (v < a || v > b) return ninf;
                return -std::log(b - a);
            case PriorKind::normal: {
                const double z = (v - a) / b;
                return -std::log(b) - half_log_2pi - 0.5 * z * z;
            }
        }
        return ninf;
    }
};

using Priors = std::map<std::string, Prior>;

inline std::string describe(const ParameterVector& theta) {
    std::ostringstream os;
    os << "θ = {";
    for (std::size_t i = 0; i < theta.size(); ++i)
        os << (i ? ", " : "") << theta.entry(i).name << "=" << theta.entry(i).value;
    os << "}";
    return os.str();
}

/// log p(θ | y) up to a constant: -0.5 * (-2 log L) + Σ log prior. Priors are
/// summed over every entry that has one, fixed or free. Returns -inf outside
/// the prior or model support.
inline double log_posterior(const StateSpaceModel& model, const TimeSeries& data, const Priors& priors,
                            const ParameterVector& theta, const FilterOptions& fopts = {}) {
    if (!model.in_support(theta)) return -std::numeric_limits<double>::infinity();
    double lp = 0.0;
    for (const auto& [name, prior] : priors) {
        if (!theta.contains(name)) continue;
        lp += prior.log_density(theta[name]);
    }
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    try {
        return lp - 0.5 * neg2_log_likelihood(model, data, theta, fopts);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (" + describe(theta) + ")");
    }
}

// ---------------------------------------------------------------------------
// Maximum likelihood

struct MleOptions {
    SimplexOptions simplex;
    int max_restarts = 4;
    std::uint64_t seed = 1;
    FilterOptions filter;
};

struct MleResult {
    ParameterVector theta_hat;
    double neg2_loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    int restarts = 0;
};

/// Minimizes -2 log L over the free entries of θ in unconstrained
/// coordinates (log for standard deviations, atanh for (-1, 1)).
inline MleResult fit_mle(const StateSpaceModel& model, const TimeSeries& data, const ParameterVector& theta0,
                         const MleOptions& opts = {}) {
    model.check_parameters(theta0);
    double f0;
    try {
        f0 = neg2_log_likelihood(model, data, theta0, opts.filter);
    } catch (const NumericalError& e) {
        throw InitializationError(std::string("likelihood fails at the starting point: ") + e.what());
    }
    if (!std::isfinite(f0)) throw InitializationError("non-finite likelihood at the starting point");

    MleResult res{theta0, f0, true, 0, 0};
    if (theta0.free_indices().empty()) return res;

    for (const auto& p : theta0.entries())
        if (!p.fixed && p.domain == Domain::nonnegative && !(p.value > 0.0))
            throw InitializationError("free standard deviation '" + p.name + "' must start above zero");

    auto objective = [&](const Eigen::VectorXd& z) {
        ParameterVector th = theta0.with_unconstrained(z);
        if (!model.in_support(th)) return std::numeric_limits<double>::infinity();
        try {
            return neg2_log_likelihood(model, data, th, opts.filter);
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const Eigen::VectorXd z0 = theta0.free_unconstrained();
    Eigen::VectorXd start = z0;
    Rng rng(opts.seed);
    SimplexResult best;
    best.x = z0;
    best.value = f0;
    bool converged = false;
    int iterations = 0, restarts = 0;
    for (int attempt = 0; attempt <= opts.max_restarts; ++attempt) {
        SimplexResult r = nelder_mead(objective, start, opts.simplex);
        iterations += r.iterations;
        const double previous = best.value;
        if (r.value <= best.value) best = r;
        if (r.converged) {
            const bool stalled = attempt > 0 && std::abs(previous - r.value) <= 1e-8 * (std::abs(r.value) + 1.0);
            converged = true;
            if (stalled) break;
            start = best.x;  // restart from the optimum with a fresh simplex
        } else {
            converged = false;
            start = z0 + 0.1 * rng.normal_vector(z0.size());
        }
        ++restarts;
    }
    res.theta_hat = theta0.with_unconstrained(best.x);
    res.neg2_loglik = best.value;
    res.converged = converged;
    res.iterations = iterations;
    res.restarts = restarts;
    return res;
}

// ---------------------------------------------------------------------------
// Adaptive random-walk Metropolis

struct McmcOptions {
    int warmup = 1000;
    int adapt_interval = 100;
    double initial_scale = 0.1;  ///< initial proposal sd in unconstrained coordinates
    double target_scale = 0.0;   ///< proposal covariance multiplier; 0 means 2.38^2 / d
    FilterOptions filter;
};

struct SamplerOutput {
    Eigen::MatrixXd draws;        ///< n_samples x d
    Eigen::VectorXd log_target;   ///< log target at each retained draw
    double acceptance_rate = 0.0; ///< over retained iterations
    Eigen::MatrixXd proposal_cov;
};

/// Random-walk Metropolis on R^d whose Gaussian proposal covariance is
/// re-estimated from the chain history every `adapt_interval` warmup
/// iterations and frozen afterwards. Warmup draws are discarded.
inline SamplerOutput adaptive_metropolis(const std::function<double(const Eigen::VectorXd&)>& log_target,
                                         const Eigen::VectorXd& x0, int n_samples, const McmcOptions& opts, Rng& rng) {
    if (n_samples < 1) throw ConfigError("n_samples must be at least 1");
    const Eigen::Index d = x0.size();
    SamplerOutput out{Eigen::MatrixXd(n_samples, d), Eigen::VectorXd(n_samples), 0.0, Eigen::MatrixXd()};
    double lp = log_target(x0);
    if (!std::isfinite(lp)) throw InitializationError("target density is zero at the starting point");
    Eigen::VectorXd x = x0;
    if (d == 0) {
        out.log_target.setConstant(lp);
        out.acceptance_rate = 1.0;
        return out;
    }

    const double scale = opts.target_scale > 0.0 ? opts.target_scale : 2.38 * 2.38 / static_cast<double>(d);
    Eigen::MatrixXd cov = opts.initial_scale * opts.initial_scale * Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd L = cov.llt().matrixL();

    const int warmup = std::max(0, opts.warmup);
    Eigen::MatrixXd history(std::max(warmup, 1), d);
    long accepted = 0;
    for (int it = 0; it < warmup + n_samples; ++it) {
        Eigen::VectorXd prop = x + L * rng.normal_vector(d);
        double lq = lp;
        if (prop != x) lq = log_target(prop);
        const double u = rng.uniform();
        const bool accept = std::isfinite(lq) && std::log(u) < lq - lp;
        if (accept) {
            x = prop;
            lp = lq;
        }
        if (it < warmup) {
            history.row(it) = x.transpose();
            const int seen = it + 1;
            if (opts.adapt_interval > 0 && seen % opts.adapt_interval == 0 && seen >= 2 * static_cast<int>(d) + 2) {
                const Eigen::MatrixXd h = history.topRows(seen);
                const Eigen::RowVectorXd mean = h.colwise().mean();
                const Eigen::MatrixXd c = h.rowwise() - mean;
                Eigen::MatrixXd emp = (c.transpose() * c) / static_cast<double>(seen - 1);
                Eigen::MatrixXd next = scale * (emp + 1e-10 * Eigen::MatrixXd::Identity(d, d));
                Eigen::LLT<Eigen::MatrixXd> llt(next);
                if (llt.info() == Eigen::Success && emp.diagonal().minCoeff() > 0.0) {
                    cov = next;
                    L = llt.matrixL();
                }
            }
        } else {
            const int j = it - warmup;
            out.draws.row(j) = x.transpose();
            out.log_target(j) = lp;
            if (accept) ++accepted;
        }
    }
    out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(n_samples);
    out.proposal_cov = cov;
    return out;
}

/// Posterior draws of the free θ entries.
struct McmcChain {
    std::vector<std::string> names;   ///< free entry names, column order of draws
    Eigen::MatrixXd draws;            ///< n_samples x n_free, natural (untransformed) scale
    Eigen::VectorXd log_posts;        ///< -2 log posterior of each draw
    double acceptance_rate = 0.0;
    Eigen::MatrixXd proposal_cov_final;
    std::uint64_t seed = 0;
    ParameterVector theta0;           ///< supplies the fixed entries

    [[nodiscard]] Eigen::Index size() const { return draws.rows(); }

    [[nodiscard]] ParameterVector theta(Eigen::Index i) const {
        return theta0.with_free_values(draws.row(i).transpose());
    }
};

/// Samples p(θ | y) ∝ L(θ) p(θ) with the Kalman-filter likelihood. Sampling
/// happens in unconstrained coordinates, with the transform Jacobian added.
inline McmcChain mcmc_sample(const StateSpaceModel& model, const TimeSeries& data, const Priors& priors,
                             const ParameterVector& theta0, int n_samples, const McmcOptions& opts, Rng& rng) {
    model.check_parameters(theta0);
    for (const auto& name : theta0.free_names())
        if (!priors.count(name)) throw ConfigError("no prior given for free parameter '" + name + "'");
    for (const auto& p : theta0.entries())
        if (!p.fixed && p.domain == Domain::nonnegative && !(p.value > 0.0))
            throw InitializationError("free standard deviation '" + p.name + "' must start above zero");

    double lp0;
    try {
        lp0 = log_posterior(model, data, priors, theta0, opts.filter);
    } catch (const NumericalError& e) {
        throw InitializationError(std::string("posterior fails at the starting point: ") + e.what());
    }
    if (!std::isfinite(lp0)) throw InitializationError("zero posterior mass at the starting point " + describe(theta0));

    auto target = [&](const Eigen::VectorXd& z) {
        ParameterVector th = theta0.with_unconstrained(z);
        try {
            double lp = log_posterior(model, data, priors, th, opts.filter);
            return std::isfinite(lp) ? lp + theta0.log_jacobian(z) : lp;
        } catch (const NumericalError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    const Eigen::VectorXd z0 = theta0.free_unconstrained();
    SamplerOutput s = adaptive_metropolis(target, z0, n_samples, opts, rng);

    McmcChain chain;
    chain.names = theta0.free_names();
    chain.theta0 = theta0;
    chain.seed = rng.seed();
    chain.acceptance_rate = s.acceptance_rate;
    chain.proposal_cov_final = s.proposal_cov;
    chain.draws.resize(n_samples, z0.size());
    chain.log_posts.resize(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        const Eigen::VectorXd z = s.draws.row(i).transpose();
        ParameterVector th = theta0.with_unconstrained(z);
        chain.draws.row(i) = th.free_values().transpose();
        chain.log_posts(i) = -2.0 * (s.log_target(i) - theta0.log_jacobian(z));
    }
    return chain;
}

/// Evenly spaced chain indices used to pair θ draws with state draws.
inline std::vector<Eigen::Index> thinning_indices(Eigen::Index chain_length, Eigen::Index count) {
    if (count < 1) throw ConfigError("number of state draws must be at least 1");
    if (count > chain_length)
        throw ConfigError("requested " + std::to_string(count) + " state draws from a chain of length " +
                          std::to_string(chain_length));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = (i * chain_length) / count;
    return idx;
}

}  // namespace dlm
