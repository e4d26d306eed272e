#pragma once

// Brute-force reference for linear-Gaussian state-space models: builds the
// joint Gaussian of all states and observed values and conditions it
// directly. Extended precision, O((n m)^3); for small test problems only.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "dlm/parameters.hpp"
#include "dlm/statespace.hpp"
#include "dlm/timeseries.hpp"

namespace oracle {

using Real = long double;
using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using VecR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

class JointGaussian {
public:
    JointGaussian(const dlm::StateSpaceModel& model, const dlm::TimeSeries& data, const dlm::ParameterVector& theta)
        : n_(data.size()), m_(model.state_dim()), k_(data.dim()) {
        const Eigen::Index N = n_ * m_;
        // x_t = M_t x_{t-1} + E_t, stacked as X = mu + L z with
        // z = (x_{-1} - mean0, E_0, ..., E_{n-1}) ~ N(0, D).
        MatR L = MatR::Zero(N, (n_ + 1) * m_);
        MatR D = MatR::Zero((n_ + 1) * m_, (n_ + 1) * m_);
        mu_ = VecR::Zero(N);
        D.topLeftCorner(m_, m_) = model.init().covariance.cast<Real>();
        MatR prev = MatR::Zero(m_, (n_ + 1) * m_);
        prev.leftCols(m_) = MatR::Identity(m_, m_);
        VecR prev_mean = model.init().mean.cast<Real>();
        std::vector<MatR> H(static_cast<std::size_t>(n_)), R(static_cast<std::size_t>(n_));
        for (Eigen::Index t = 0; t < n_; ++t) {
            const dlm::SystemMatrices s = model.materialize(t, theta);
            const MatR M = s.M.cast<Real>();
            MatR row = M * prev;
            row.block(0, (t + 1) * m_, m_, m_) += MatR::Identity(m_, m_);
            D.block((t + 1) * m_, (t + 1) * m_, m_, m_) = s.Q.cast<Real>();
            L.middleRows(t * m_, m_) = row;
            prev_mean = M * prev_mean;
            mu_.segment(t * m_, m_) = prev_mean;
            prev = row;
            H[static_cast<std::size_t>(t)] = s.H.cast<Real>();
            R[static_cast<std::size_t>(t)] = s.R.cast<Real>();
        }
        Sx_ = L * D * L.transpose();
        Sx_ = (Sx_ + Sx_.transpose()) / 2;

        for (Eigen::Index t = 0; t < n_; ++t)
            for (Eigen::Index j = 0; j < k_; ++j)
                if (!data.missing(t, j)) obs_.push_back({t, j, static_cast<Real>(data.values()(t, j))});
        const auto q = static_cast<Eigen::Index>(obs_.size());
        A_ = MatR::Zero(q, N);
        Ro_ = MatR::Zero(q, q);
        for (Eigen::Index a = 0; a < q; ++a) {
            const auto& oa = obs_[static_cast<std::size_t>(a)];
            A_.block(a, oa.t * m_, 1, m_) = H[static_cast<std::size_t>(oa.t)].row(oa.j);
            for (Eigen::Index b = 0; b < q; ++b) {
                const auto& ob = obs_[static_cast<std::size_t>(b)];
                if (oa.t == ob.t) Ro_(a, b) = R[static_cast<std::size_t>(oa.t)](oa.j, ob.j);
            }
        }
    }

    /// p(x_t | observations at times < upto), all t, as a joint Gaussian.
    void condition(Eigen::Index upto, VecR& mean, MatR& cov) const {
        std::vector<Eigen::Index> sel;
        for (std::size_t a = 0; a < obs_.size(); ++a)
            if (obs_[a].t < upto) sel.push_back(static_cast<Eigen::Index>(a));
        mean = mu_;
        cov = Sx_;
        if (sel.empty()) return;
        const auto q = static_cast<Eigen::Index>(sel.size());
        MatR A(q, A_.cols()), Ro(q, q);
        VecR y(q);
        for (Eigen::Index a = 0; a < q; ++a) {
            A.row(a) = A_.row(sel[static_cast<std::size_t>(a)]);
            y(a) = obs_[static_cast<std::size_t>(sel[static_cast<std::size_t>(a)])].y;
            for (Eigen::Index b = 0; b < q; ++b)
                Ro(a, b) = Ro_(sel[static_cast<std::size_t>(a)], sel[static_cast<std::size_t>(b)]);
        }
        const MatR Sxy = Sx_ * A.transpose();
        MatR Sy = A * Sxy + Ro;
        Sy = (Sy + Sy.transpose()) / 2;
        Eigen::LDLT<MatR> ldlt(Sy);
        mean = mu_ + Sxy * ldlt.solve(y - A * mu_);
        cov = Sx_ - Sxy * ldlt.solve(Sxy.transpose());
        cov = (cov + cov.transpose()) / 2;
    }

    /// Filtered (conditioning on times <= t) moments of x_t.
    [[nodiscard]] Moments filtered(Eigen::Index t) const { return block_of(t + 1, t); }
    /// One-step predicted (conditioning on times < t) moments of x_t.
    [[nodiscard]] Moments predicted(Eigen::Index t) const { return block_of(t, t); }

    /// Smoothed moments of x_t given all observations.
    [[nodiscard]] Moments smoothed(Eigen::Index t) const {
        ensure_full();
        return {full_mean_.segment(t * m_, m_).cast<double>(), full_cov_.block(t * m_, t * m_, m_, m_).cast<double>()};
    }

    /// Cov(x_s, x_t | all observations).
    [[nodiscard]] Eigen::MatrixXd smoothed_cross(Eigen::Index s, Eigen::Index t) const {
        ensure_full();
        return full_cov_.block(s * m_, t * m_, m_, m_).cast<double>();
    }

    /// -2 log density of the observed values, including 2 pi terms.
    [[nodiscard]] double neg2_loglik() const {
        const auto q = static_cast<Eigen::Index>(obs_.size());
        if (q == 0) return 0.0;
        VecR y(q);
        for (Eigen::Index a = 0; a < q; ++a) y(a) = obs_[static_cast<std::size_t>(a)].y;
        MatR Sy = A_ * Sx_ * A_.transpose() + Ro_;
        Sy = (Sy + Sy.transpose()) / 2;
        Eigen::LLT<MatR> llt(Sy);
        const VecR w = llt.matrixL().solve(y - A_ * mu_);
        Real logdet = 0;
        for (Eigen::Index i = 0; i < q; ++i) logdet += 2 * std::log(llt.matrixL()(i, i));
        const Real log2pi = std::log(2 * 3.14159265358979323846264338327950288L);
        return static_cast<double>(w.squaredNorm() + logdet + static_cast<Real>(q) * log2pi);
    }

    [[nodiscard]] Eigen::Index observed() const { return static_cast<Eigen::Index>(obs_.size()); }

private:
    struct Obs {
        Eigen::Index t, j;
        Real y;
    };

    Moments block_of(Eigen::Index upto, Eigen::Index t) const {
        VecR mean;
        MatR cov;
        condition(upto, mean, cov);
        return {mean.segment(t * m_, m_).cast<double>(), cov.block(t * m_, t * m_, m_, m_).cast<double>()};
    }

    void ensure_full() const {
        if (full_ready_) return;
        condition(n_, full_mean_, full_cov_);
        full_ready_ = true;
    }

    Eigen::Index n_, m_, k_;
    VecR mu_;
    MatR Sx_, A_, Ro_;
    std::vector<Obs> obs_;
    mutable bool full_ready_ = false;
    mutable VecR full_mean_;
    mutable MatR full_cov_;
};

/// max|a - b| / max|b| (absolute when b is zero).
inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = b.cwiseAbs().maxCoeff();
    const double diff = (a - b).cwiseAbs().maxCoeff();
    return scale > 0.0 ? diff / scale : diff;
}

inline double rel_err(double a, double b) {
    return std::abs(b) > 0.0 ? std::abs(a - b) / std::abs(b) : std::abs(a - b);
}

}  // namespace oracle
