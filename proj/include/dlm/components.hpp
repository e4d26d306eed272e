#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "statespace.hpp"

namespace dlm {

/// Regression covariates Z_t (one row per time index). Must be complete.
struct CovariateMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> column_names;

    CovariateMatrix() = default;
    CovariateMatrix(Eigen::MatrixXd v, std::vector<std::string> names)
        : values(std::move(v)), column_names(std::move(names)) {
        if (static_cast<Eigen::Index>(column_names.size()) != values.cols())
            throw DimensionError("covariate column names do not match the column count");
        if (!values.allFinite()) throw DataError("covariates must be complete and finite");
    }

    [[nodiscard]] Eigen::Index size() const { return values.rows(); }
    [[nodiscard]] Eigen::Index columns() const { return values.cols(); }
};

namespace detail {

inline double sd(const ParameterVector& theta, const std::string& slot) {
    double s = theta[slot];
    if (!(s >= 0.0)) throw DomainError("standard deviation '" + slot + "' must be nonnegative");
    return s;
}

inline MatrixFn constant(Eigen::MatrixXd A) {
    return [A = std::move(A)](Eigen::Index, const ParameterVector&) { return A; };
}

}  // namespace detail

/// Random-walk level: x = [mu], M = 1, H = 1, Q = sigma_level^2.
inline ComponentBlock local_level(std::string name, std::string level_sd_slot) {
    ComponentBlock b;
    b.name = std::move(name);
    b.kind = BlockKind::level;
    b.state_dim = 1;
    b.m_fn = detail::constant(Eigen::MatrixXd::Ones(1, 1));
    b.h_fn = detail::constant(Eigen::MatrixXd::Ones(1, 1));
    b.q_fn = [slot = level_sd_slot](Eigen::Index, const ParameterVector& th) {
        double s = detail::sd(th, slot);
        return Eigen::MatrixXd::Constant(1, 1, s * s);
    };
    b.parameter_slots = {std::move(level_sd_slot)};
    return b;
}

/// Local linear trend: x = [mu, alpha], M = [[1,1],[0,1]], H = [1, 0],
/// Q = diag(sigma_level^2, sigma_trend^2).
inline ComponentBlock local_level_trend(std::string name, std::string level_sd_slot, std::string trend_sd_slot) {
    if (level_sd_slot == trend_sd_slot) throw ConfigError("level and trend slots must differ");
    ComponentBlock b;
    b.name = std::move(name);
    b.kind = BlockKind::trend;
    b.state_dim = 2;
    Eigen::MatrixXd M(2, 2);
    M << 1, 1, 0, 1;
    Eigen::MatrixXd H(1, 2);
    H << 1, 0;
    b.m_fn = detail::constant(M);
    b.h_fn = detail::constant(H);
    b.q_fn = [lv = level_sd_slot, tr = trend_sd_slot](Eigen::Index, const ParameterVector& th) {
        double sl = detail::sd(th, lv), st = detail::sd(th, tr);
        Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(2, 2);
        Q(0, 0) = sl * sl;
        Q(1, 1) = st * st;
        return Q;
    };
    b.parameter_slots = {std::move(level_sd_slot), std::move(trend_sd_slot)};
    return b;
}

/// Trigonometric seasonal component with `harmonics` pairs of states. Pair j
/// rotates by 2*pi*j/period per step; H picks the first state of each pair;
/// Q = sigma_seas^2 I. The period is in sample steps.
inline ComponentBlock seasonal_harmonics(std::string name, double period, int harmonics, std::string seas_sd_slot) {
    if (!std::isfinite(period) || period <= 0.0) throw DomainError("seasonal period must be positive and finite");
    if (period <= 2.0) throw DomainError("seasonal period must exceed 2 sample steps");
    if (harmonics < 1) throw DomainError("seasonal component needs at least one harmonic");
    const Eigen::Index d = 2 * harmonics;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(1, d);
    for (int j = 1; j <= harmonics; ++j) {
        const double w = 2.0 * std::numbers::pi * j / period;
        const Eigen::Index i = 2 * (j - 1);
        M(i, i) = std::cos(w);
        M(i, i + 1) = std::sin(w);
        M(i + 1, i) = -std::sin(w);
        M(i + 1, i + 1) = std::cos(w);
        H(0, i) = 1.0;
    }
    ComponentBlock b;
    b.name = std::move(name);
    b.kind = BlockKind::seasonal_harmonic;
    b.state_dim = d;
    b.m_fn = detail::constant(M);
    b.h_fn = detail::constant(H);
    b.q_fn = [slot = seas_sd_slot, d](Eigen::Index, const ParameterVector& th) {
        double s = detail::sd(th, slot);
        return Eigen::MatrixXd((s * s) * Eigen::MatrixXd::Identity(d, d));
    };
    b.parameter_slots = {std::move(seas_sd_slot)};
    return b;
}

/// Companion matrix of an AR(p) recursion with coefficients rho.
inline Eigen::MatrixXd ar_companion(const Eigen::VectorXd& rho) {
    const Eigen::Index p = rho.size();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
    M.col(0) = rho;
    for (Eigen::Index i = 0; i + 1 < p; ++i) M(i, i + 1) = 1.0;
    return M;
}

/// True when every root of the AR characteristic polynomial lies outside the
/// unit circle (companion eigenvalues strictly inside).
inline bool ar_stationary(const Eigen::VectorXd& rho) {
    if (rho.size() == 1) return std::abs(rho(0)) < 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(ar_companion(rho), false);
    return es.eigenvalues().cwiseAbs().maxCoeff() < 1.0;
}

/// AR(p) noise in companion form: M has rho in its first column and an
/// identity superdiagonal, H = [1 0 ... 0], Q = sigma_ar^2 in (0,0) only.
inline ComponentBlock ar_block(std::string name, std::vector<std::string> coeff_slots, std::string innovation_sd_slot) {
    const auto p = static_cast<Eigen::Index>(coeff_slots.size());
    if (p < 1) throw DomainError("AR order must be at least 1");
    auto coeffs = [coeff_slots](const ParameterVector& th) {
        Eigen::VectorXd rho(static_cast<Eigen::Index>(coeff_slots.size()));
        for (std::size_t j = 0; j < coeff_slots.size(); ++j) rho(static_cast<Eigen::Index>(j)) = th[coeff_slots[j]];
        return rho;
    };
    ComponentBlock b;
    b.name = std::move(name);
    b.kind = BlockKind::ar;
    b.state_dim = p;
    b.m_fn = [coeffs](Eigen::Index, const ParameterVector& th) { return ar_companion(coeffs(th)); };
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(1, p);
    H(0, 0) = 1.0;
    b.h_fn = detail::constant(H);
    b.q_fn = [slot = innovation_sd_slot, p](Eigen::Index, const ParameterVector& th) {
        double s = detail::sd(th, slot);
        Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(p, p);
        Q(0, 0) = s * s;
        return Q;
    };
    b.support = [coeffs](const ParameterVector& th) { return ar_stationary(coeffs(th)); };
    b.parameter_slots = coeff_slots;
    b.parameter_slots.push_back(std::move(innovation_sd_slot));
    return b;
}

/// Dynamic regression on covariates: states are the coefficients beta_t,
/// M = I, H_t = Z_t, Q = diag(sigma_1^2, ..., sigma_p^2). Zero variances give
/// static regression coefficients.
inline ComponentBlock regression_block(std::string name, CovariateMatrix covariates, std::vector<std::string> sd_slots) {
    const Eigen::Index p = covariates.columns();
    if (p < 1) throw DimensionError("regression block needs at least one covariate");
    if (static_cast<Eigen::Index>(sd_slots.size()) != p)
        throw DimensionError("regression block needs one variance slot per covariate");
    ComponentBlock b;
    b.name = std::move(name);
    b.kind = BlockKind::regression;
    b.state_dim = p;
    b.time_varying = true;
    b.m_fn = detail::constant(Eigen::MatrixXd::Identity(p, p));
    b.h_fn = [Z = std::move(covariates.values)](Eigen::Index t, const ParameterVector&) {
        if (t < 0 || t >= Z.rows())
            throw DimensionError("covariate requested at time index " + std::to_string(t + 1) + " outside 1.." +
                                 std::to_string(Z.rows()));
        return Eigen::MatrixXd(Z.row(t));
    };
    b.q_fn = [slots = sd_slots, p](Eigen::Index, const ParameterVector& th) {
        Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            double s = detail::sd(th, slots[static_cast<std::size_t>(j)]);
            Q(j, j) = s * s;
        }
        return Q;
    };
    b.parameter_slots = std::move(sd_slots);
    return b;
}

/// A block with fixed, parameter-free matrices.
inline ComponentBlock custom_block(std::string name, Eigen::MatrixXd M, Eigen::MatrixXd H, Eigen::MatrixXd Q) {
    if (M.rows() != M.cols() || Q.rows() != M.rows() || Q.cols() != M.cols() || H.cols() != M.rows())
        throw DimensionError("custom block matrices have inconsistent shapes");
    ComponentBlock b;
    b.name = std::move(name);
    b.kind = BlockKind::custom;
    b.state_dim = M.rows();
    b.obs_dim = H.rows();
    b.m_fn = detail::constant(std::move(M));
    b.h_fn = detail::constant(std::move(H));
    b.q_fn = detail::constant(std::move(Q));
    return b;
}

}  // namespace dlm
