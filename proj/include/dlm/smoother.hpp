#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "filter.hpp"
#include "random.hpp"
#include "statespace.hpp"

namespace dlm {

/// Marginal smoothed moments p(x_t | y_1..y_n) = N(smooth_mean, smooth_cov).
struct SmootherResult {
    std::vector<Eigen::VectorXd> smooth_mean;
    std::vector<Eigen::MatrixXd> smooth_cov;
    /// Cov(x_t, x_{t+1} | y_1..y_n) for t = 0..n-2.
    std::vector<Eigen::MatrixXd> lag_cov;

    [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(smooth_mean.size()); }
};

/// Fixed-interval smoother over stored filter output. Gives the same
/// moments as the Rauch-Tung-Striebel recursion
///
///   A_t = C̄_t M_{t+1}ᵀ (M_{t+1} C̄_t M_{t+1}ᵀ + Q_{t+1})⁻¹
///   x̃_t = x̄_t + A_t (x̃_{t+1} - x̂_{t+1})
///   C̃_t = C̄_t + A_t (C̃_{t+1} - Ĉ_{t+1}) A_tᵀ
///
/// but accumulates the backward information instead (r, N start at zero
/// after the last step; v_t, F_t are the residual and prediction covariance
/// of the rows observed at t):
///
///   x̃_t = x̄_t + C̄_t M_{t+1}ᵀ r_t
///   C̃_t = C̄_t - C̄_t M_{t+1}ᵀ N_t M_{t+1} C̄_t
///   L_t = M_{t+1} (I - Ĉ_t Hᵀ F_t⁻¹ H)
///   r_{t-1} = Hᵀ F_t⁻¹ v_t + L_tᵀ r_t,   N_{t-1} = Hᵀ F_t⁻¹ H + L_tᵀ N_t L_t
///
/// No state covariance is inverted, so Q = 0 with a poorly conditioned M
/// costs no accuracy (the RTS form loses most of its digits there), and
/// working from C̄_t rather than Ĉ_t keeps the diffuse prior scale out.
inline SmootherResult rts_smoother(const FilterResult& fr, const StateSpaceModel& model, const ParameterVector& theta) {
    const Eigen::Index n = fr.size();
    SmootherResult out;
    if (n == 0) return out;
    const Eigen::Index m = model.state_dim();
    const auto un = static_cast<std::size_t>(n);
    out.smooth_mean.resize(un);
    out.smooth_cov.resize(un);
    out.lag_cov.resize(un - 1);
    out.smooth_mean[un - 1] = fr.post_mean[un - 1];
    out.smooth_cov[un - 1] = fr.post_cov[un - 1];

    auto sys = model.bind(theta);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(m, m);
    std::vector<Eigen::Index> obs;
    for (Eigen::Index t = n - 1; t >= 0; --t) {
        const auto ut = static_cast<std::size_t>(t);
        Eigen::MatrixXd L = t + 1 < n ? Eigen::MatrixXd(sys.at(t + 1).M) : I;
        if (t + 1 < n) {
            const Eigen::MatrixXd CM = fr.post_cov[ut] * L.transpose();  // C̄_t M_{t+1}ᵀ
            out.smooth_mean[ut] = fr.post_mean[ut] + CM * r;
            Eigen::MatrixXd Cs = fr.post_cov[ut] - CM * N * CM.transpose();
            detail::symmetrize(Cs);
            out.smooth_cov[ut] = std::move(Cs);
            out.lag_cov[ut] = CM * (I - N * fr.prior_cov[ut + 1]);
        }
        if (t == 0) break;

        const Eigen::MatrixXd H = sys.at(t).H;
        const Eigen::MatrixXd& P = fr.prior_cov[ut];
        obs.clear();
        for (Eigen::Index j = 0; j < fr.missing.cols(); ++j)
            if (!fr.missing(t, j)) obs.push_back(j);
        const auto q = static_cast<Eigen::Index>(obs.size());
        if (q == 0) {
            r = L.transpose() * r;
            N = L.transpose() * N * L;
            continue;
        }
        Eigen::MatrixXd Hs(q, m), F(q, q);
        Eigen::VectorXd v(q);
        for (Eigen::Index a = 0; a < q; ++a) {
            const auto ja = obs[static_cast<std::size_t>(a)];
            Hs.row(a) = H.row(ja);
            v(a) = fr.residual[ut](ja);
            for (Eigen::Index b = 0; b < q; ++b) F(a, b) = fr.pred_obs_cov[ut](ja, obs[static_cast<std::size_t>(b)]);
        }
        Eigen::LLT<Eigen::MatrixXd> llt(F);
        if (llt.info() != Eigen::Success)
            throw NumericalError("prediction covariance is not positive definite at time index " + std::to_string(t));
        const Eigen::MatrixXd FiH = llt.solve(Hs);
        L = L * (I - P * Hs.transpose() * FiH);
        r = FiH.transpose() * v + L.transpose() * r;
        N = Hs.transpose() * FiH + L.transpose() * N * L;
        detail::symmetrize(N);
    }
    return out;
}

namespace detail {

/// S with S Sᵀ = A for a symmetric PSD A (negative eigenvalues clipped).
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return A;
    if (A.isDiagonal(0.0)) return A.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace detail

struct SimulatedPath {
    Eigen::MatrixXd states;        ///< n x m
    Eigen::MatrixXd observations;  ///< n x k
};

/// Draws x_1..x_n and y_1..y_n from the state-space equations. With
/// init_draw the initial state is sampled from the model's prior; otherwise
/// x_0 is the prior mean.
inline SimulatedPath simulate_forward(const StateSpaceModel& model, const ParameterVector& theta, Eigen::Index n,
                                      Rng& rng, bool init_draw = true) {
    if (n < 1) throw DomainError("simulation length must be at least 1");
    const Eigen::Index m = model.state_dim(), k = model.obs_dim();
    auto sys = model.bind(theta);
    Eigen::VectorXd x = model.init().mean;
    if (init_draw) x += detail::psd_sqrt(model.init().covariance) * rng.normal_vector(m);

    SimulatedPath out{Eigen::MatrixXd(n, m), Eigen::MatrixXd(n, k)};
    Eigen::MatrixXd Q_last, R_last, Qs, Rs;
    for (Eigen::Index t = 0; t < n; ++t) {
        const SystemMatrices& s = sys.at(t);
        if (t == 0 || (model.time_varying() && s.Q != Q_last)) {
            Q_last = s.Q;
            Qs = detail::psd_sqrt(s.Q);
        }
        if (t == 0) {
            R_last = s.R;
            Rs = detail::psd_sqrt(s.R);
        }
        x = s.M * x + Qs * rng.normal_vector(m);
        out.states.row(t) = x.transpose();
        out.observations.row(t) = (s.H * x + Rs * rng.normal_vector(k)).transpose();
    }
    return out;
}

/// One joint draw x*_1..x*_n from p(x_1..x_n | y_1..y_n, θ).
struct StateDraw {
    Eigen::MatrixXd trajectory;  ///< n x m
    ParameterVector theta_used;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

/// Simulation smoother: simulate (x̌, y̌) from the model, smooth y̌ (with the
/// data's missing pattern) to get x̆, and return x̌ - x̆ + x̃.
inline StateDraw simulation_smoother(const StateSpaceModel& model, const TimeSeries& data, const ParameterVector& theta,
                                     const SmootherResult& smoothed, Rng& rng, const FilterOptions& fopts = {}) {
    const Eigen::Index n = data.size(), m = model.state_dim();
    if (smoothed.size() != n) throw DimensionError("smoother result does not match the data length");
    SimulatedPath sim = simulate_forward(model, theta, n, rng, true);
    TimeSeries ysim(sim.observations, data.missing_mask());
    FilterResult fsim = kalman_filter(model, ysim, theta, fopts);
    SmootherResult ssim = rts_smoother(fsim, model, theta);

    StateDraw draw{Eigen::MatrixXd(n, m), theta, rng.seed(), 0};
    for (Eigen::Index t = 0; t < n; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        draw.trajectory.row(t) =
            (sim.states.row(t).transpose() - ssim.smooth_mean[ut] + smoothed.smooth_mean[ut]).transpose();
    }
    return draw;
}

}  // namespace dlm
