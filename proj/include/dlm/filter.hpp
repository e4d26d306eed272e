#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "parameters.hpp"
#include "statespace.hpp"
#include "timeseries.hpp"

namespace dlm {

struct FilterOptions {
    /// Joseph-form covariance update instead of C - G H C.
    bool joseph = false;
    /// Number of leading time steps left out of the likelihood (reduces the
    /// sensitivity to the diffuse variance kappa). Filtering itself is unchanged.
    Eigen::Index likelihood_burn_in = 0;
};

/// Per-time quantities of one forward pass. Index t is 0-based.
struct FilterResult {
    std::vector<Eigen::VectorXd> prior_mean;    ///< x̂_t
    std::vector<Eigen::MatrixXd> prior_cov;     ///< Ĉ_t
    std::vector<Eigen::MatrixXd> pred_obs_cov;  ///< Ĉ_y,t = H Ĉ Hᵀ + R (all k components)
    std::vector<Eigen::MatrixXd> gain;          ///< G_t, m x k, zero columns where missing
    std::vector<Eigen::VectorXd> residual;      ///< r_t, NaN where missing
    std::vector<Eigen::VectorXd> post_mean;     ///< x̄_t
    std::vector<Eigen::MatrixXd> post_cov;      ///< C̄_t
    BoolMatrix missing;
    double neg2_loglik = 0.0;
    Eigen::Index n_obs_used = 0;

    [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(post_mean.size()); }
};

namespace detail {

inline void symmetrize(Eigen::MatrixXd& A) { A = 0.5 * (A + A.transpose()).eval(); }

struct NullSink {
    void operator()(Eigen::Index, const Eigen::VectorXd&, const Eigen::MatrixXd&, const Eigen::MatrixXd&,
                    const Eigen::MatrixXd&, const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::MatrixXd&) {}
    static constexpr bool wants_pred_obs_cov = false;
};

struct StoreSink {
    FilterResult* out;
    void operator()(Eigen::Index, const Eigen::VectorXd& xp, const Eigen::MatrixXd& Cp, const Eigen::MatrixXd& Cy,
                    const Eigen::MatrixXd& G, const Eigen::VectorXd& r, const Eigen::VectorXd& xf,
                    const Eigen::MatrixXd& Cf) {
        out->prior_mean.push_back(xp);
        out->prior_cov.push_back(Cp);
        out->pred_obs_cov.push_back(Cy);
        out->gain.push_back(G);
        out->residual.push_back(r);
        out->post_mean.push_back(xf);
        out->post_cov.push_back(Cf);
    }
    static constexpr bool wants_pred_obs_cov = true;
};

/// Forward Kalman recursion. Missing components are handled by deleting the
/// matching rows of H and rows/columns of R at that time step. Returns
/// -2 log p(y | θ) including the 2π constant.
template <class Sink>
double run_filter(BoundModel& sys, const TimeSeries& data, const FilterOptions& opts, Sink&& sink,
                  Eigen::Index& n_obs_used) {
    const Eigen::Index n = data.size(), k = data.dim(), m = sys.state_dim();
    if (k != sys.obs_dim())
        throw DimensionError("model observation dimension " + std::to_string(sys.obs_dim()) +
                             " does not match data dimension " + std::to_string(k));

    Eigen::VectorXd x = sys.init().mean;
    Eigen::MatrixXd C = sys.init().covariance;
    Eigen::VectorXd xp(m), r(k);
    Eigen::MatrixXd Cp(m, m), G(m, k), Cy;
    std::vector<Eigen::Index> obs;
    obs.reserve(static_cast<std::size_t>(k));
    double total = 0.0;
    Eigen::Index counted = 0;
    n_obs_used = 0;
    constexpr double log2pi = 1.8378770664093454836;  // log(2*pi)

    for (Eigen::Index t = 0; t < n; ++t) {
        const SystemMatrices& s = sys.at(t);
        xp.noalias() = s.M * x;
        Cp.noalias() = s.M * C * s.M.transpose();
        Cp += s.Q;
        symmetrize(Cp);

        obs.clear();
        for (Eigen::Index j = 0; j < k; ++j)
            if (!data.missing(t, j)) obs.push_back(j);
        const auto q = static_cast<Eigen::Index>(obs.size());
        n_obs_used += q;
        const bool in_likelihood = t >= opts.likelihood_burn_in;

        if constexpr (std::decay_t<Sink>::wants_pred_obs_cov) {
            Cy.noalias() = s.H * Cp * s.H.transpose();
            Cy += s.R;
        }

        if (q == 0) {
            r.setConstant(std::numeric_limits<double>::quiet_NaN());
            G.setZero();
            x = xp;
            C = Cp;
            sink(t, xp, Cp, Cy, G, r, x, C);
            continue;
        }

        r.setConstant(std::numeric_limits<double>::quiet_NaN());
        G.setZero();

        if (k == 1) {
            // scalar fast path
            Eigen::VectorXd PHt = Cp * s.H.row(0).transpose();
            const double S = s.H.row(0).dot(PHt) + s.R(0, 0);
            if (!(S > 0.0) || !std::isfinite(S))
                throw NumericalError("prediction variance is not positive at time index " + std::to_string(t + 1));
            const double res = data.values()(t, 0) - s.H.row(0).dot(xp);
            r(0) = res;
            G.col(0) = PHt / S;
            x = xp + G.col(0) * res;
            if (opts.joseph) {
                Eigen::MatrixXd IKH = Eigen::MatrixXd::Identity(m, m) - G.col(0) * s.H.row(0);
                C = IKH * Cp * IKH.transpose() + (s.R(0, 0) * G.col(0)) * G.col(0).transpose();
            } else {
                C = Cp - G.col(0) * PHt.transpose();
            }
            symmetrize(C);
            if (in_likelihood) {
                total += res * res / S + std::log(S);
                ++counted;
            }
            sink(t, xp, Cp, Cy, G, r, x, C);
            continue;
        }

        Eigen::MatrixXd Hs(q, m), Rs(q, q);
        Eigen::VectorXd ys(q);
        for (Eigen::Index a = 0; a < q; ++a) {
            Hs.row(a) = s.H.row(obs[static_cast<std::size_t>(a)]);
            ys(a) = data.values()(t, obs[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < q; ++b)
                Rs(a, b) = s.R(obs[static_cast<std::size_t>(a)], obs[static_cast<std::size_t>(b)]);
        }
        Eigen::MatrixXd PHt = Cp * Hs.transpose();
        Eigen::MatrixXd S = Hs * PHt + Rs;
        symmetrize(S);
        Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success || !S.allFinite())
            throw NumericalError("prediction covariance is not positive definite at time index " +
                                 std::to_string(t + 1));
        const Eigen::VectorXd rs = ys - Hs * xp;
        const Eigen::MatrixXd K = llt.solve(PHt.transpose()).transpose();
        x = xp + K * rs;
        if (opts.joseph) {
            Eigen::MatrixXd IKH = Eigen::MatrixXd::Identity(m, m) - K * Hs;
            C = IKH * Cp * IKH.transpose() + K * Rs * K.transpose();
        } else {
            C = Cp - K * PHt.transpose();
        }
        symmetrize(C);
        for (Eigen::Index a = 0; a < q; ++a) {
            r(obs[static_cast<std::size_t>(a)]) = rs(a);
            G.col(obs[static_cast<std::size_t>(a)]) = K.col(a);
        }
        if (in_likelihood) {
            const Eigen::VectorXd w = llt.matrixL().solve(rs);
            const Eigen::MatrixXd L = llt.matrixL();
            total += w.squaredNorm() + 2.0 * L.diagonal().array().log().sum();
            counted += q;
        }
        sink(t, xp, Cp, Cy, G, r, x, C);
    }
    return total + static_cast<double>(counted) * log2pi;
}

}  // namespace detail

/// Forward Kalman filter over the whole series.
inline FilterResult kalman_filter(const StateSpaceModel& model, const TimeSeries& data, const ParameterVector& theta,
                                  const FilterOptions& opts = {}) {
    auto sys = model.bind(theta);
    FilterResult out;
    const auto n = static_cast<std::size_t>(data.size());
    out.prior_mean.reserve(n);
    out.prior_cov.reserve(n);
    out.pred_obs_cov.reserve(n);
    out.gain.reserve(n);
    out.residual.reserve(n);
    out.post_mean.reserve(n);
    out.post_cov.reserve(n);
    out.missing = data.missing_mask();
    out.neg2_loglik = detail::run_filter(sys, data, opts, detail::StoreSink{&out}, out.n_obs_used);
    return out;
}

/// -2 log p(y_1..y_n | θ), including the n_obs log(2π) normalization.
inline double neg2_log_likelihood(const StateSpaceModel& model, const TimeSeries& data, const ParameterVector& theta,
                                  const FilterOptions& opts = {}) {
    auto sys = model.bind(theta);
    Eigen::Index used = 0;
    return detail::run_filter(sys, data, opts, detail::NullSink{}, used);
}

/// Residuals whitened by the lower Cholesky factor of the prediction
/// covariance of the observed components: r* = L^{-1} r. Missing entries stay NaN.
inline std::vector<Eigen::VectorXd> scaled_residuals(const FilterResult& fr) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(fr.residual.size());
    for (std::size_t t = 0; t < fr.residual.size(); ++t) {
        const Eigen::VectorXd& r = fr.residual[t];
        const Eigen::Index k = r.size();
        Eigen::VectorXd z = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
        std::vector<Eigen::Index> obs;
        for (Eigen::Index j = 0; j < k; ++j)
            if (!fr.missing(static_cast<Eigen::Index>(t), j)) obs.push_back(j);
        const auto q = static_cast<Eigen::Index>(obs.size());
        if (q == 0) {
            out.push_back(z);
            continue;
        }
        if (k == 1) {
            const double S = fr.pred_obs_cov[t](0, 0);
            if (!(S > 0.0))
                throw NumericalError("prediction variance is not positive at time index " + std::to_string(t + 1));
            z(0) = r(0) / std::sqrt(S);
            out.push_back(z);
            continue;
        }
        Eigen::MatrixXd S(q, q);
        Eigen::VectorXd rs(q);
        for (Eigen::Index a = 0; a < q; ++a) {
            rs(a) = r(obs[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < q; ++b)
                S(a, b) = fr.pred_obs_cov[t](obs[static_cast<std::size_t>(a)], obs[static_cast<std::size_t>(b)]);
        }
        Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success)
            throw NumericalError("cannot take the square root of the prediction covariance at time index " +
                                 std::to_string(t + 1));
        Eigen::VectorXd w = llt.matrixL().solve(rs);
        for (Eigen::Index a = 0; a < q; ++a) z(obs[static_cast<std::size_t>(a)]) = w(a);
        out.push_back(z);
    }
    return out;
}

}  // namespace dlm
