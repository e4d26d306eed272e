#pragma once

#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "parameters.hpp"
#include "timeseries.hpp"

namespace dlm {

// State-space form used throughout the library (time index t is 0-based):
//
//   y_t = H_t x_t + e_t,       e_t ~ N(0, R_t)
//   x_t = M_t x_{t-1} + E_t,   E_t ~ N(0, Q_t)

struct SystemMatrices {
    Eigen::MatrixXd M;  ///< m x m
    Eigen::MatrixXd H;  ///< k x m
    Eigen::MatrixXd Q;  ///< m x m
    Eigen::MatrixXd R;  ///< k x k
};

enum class BlockKind { level, trend, seasonal_harmonic, ar, regression, custom };

inline const char* to_string(BlockKind kind) {
    switch (kind) {
        case BlockKind::level: return "level";
        case BlockKind::trend: return "trend";
        case BlockKind::seasonal_harmonic: return "seasonal_harmonic";
        case BlockKind::ar: return "ar";
        case BlockKind::regression: return "regression";
        case BlockKind::custom: return "custom";
    }
    return "custom";
}

struct LayoutBlock {
    std::string name;
    BlockKind kind;
    Eigen::Index offset;  ///< first state index
    Eigen::Index size;    ///< number of states
};

/// Named contiguous sub-ranges of the state vector, in composition order.
class StateLayout {
public:
    StateLayout() = default;

    void append(std::string name, BlockKind kind, Eigen::Index size) {
        for (const auto& b : blocks_)
            if (b.name == name) throw ConfigError("duplicate block name '" + name + "'");
        blocks_.push_back({std::move(name), kind, dim_, size});
        dim_ += size;
    }

    [[nodiscard]] Eigen::Index dim() const { return dim_; }
    [[nodiscard]] const std::vector<LayoutBlock>& blocks() const { return blocks_; }

    [[nodiscard]] const LayoutBlock* find(const std::string& name) const {
        for (const auto& b : blocks_)
            if (b.name == name) return &b;
        return nullptr;
    }

    [[nodiscard]] const LayoutBlock* first_of(BlockKind kind) const {
        for (const auto& b : blocks_)
            if (b.kind == kind) return &b;
        return nullptr;
    }

    [[nodiscard]] std::vector<const LayoutBlock*> all_of(BlockKind kind) const {
        std::vector<const LayoutBlock*> out;
        for (const auto& b : blocks_)
            if (b.kind == kind) out.push_back(&b);
        return out;
    }

private:
    std::vector<LayoutBlock> blocks_;
    Eigen::Index dim_ = 0;
};

/// Prior N(mean, covariance) of x_0.
struct InitialState {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    double kappa = 1e7;

    /// Zero mean, kappa * I covariance.
    static InitialState diffuse(Eigen::Index m, double kappa = 1e7) {
        if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("kappa must be positive and finite");
        return {Eigen::VectorXd::Zero(m), kappa * Eigen::MatrixXd::Identity(m, m), kappa};
    }

    /// Pin the sub-range [offset, offset + size) to a known mean/covariance,
    /// leaving the other entries diffuse.
    InitialState& set_block(Eigen::Index offset, const Eigen::VectorXd& block_mean,
                            const Eigen::MatrixXd& block_cov) {
        const Eigen::Index s = block_mean.size();
        if (offset + s > mean.size() || block_cov.rows() != s || block_cov.cols() != s)
            throw DimensionError("initial-state block does not fit the state vector");
        mean.segment(offset, s) = block_mean;
        covariance.block(offset, 0, s, covariance.cols()).setZero();
        covariance.block(0, offset, covariance.rows(), s).setZero();
        covariance.block(offset, offset, s, s) = block_cov;
        return *this;
    }
};

/// Default diffuse variance: 1e7 times the sample variance of the observed
/// data (or 1e7 when it cannot be computed).
inline double default_kappa(const TimeSeries& data) {
    double sum = 0.0, sum2 = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index t = 0; t < data.size(); ++t)
        for (Eigen::Index j = 0; j < data.dim(); ++j)
            if (!data.missing(t, j)) {
                double v = data.values()(t, j);
                sum += v;
                sum2 += v * v;
                ++count;
            }
    double scale = 1.0;
    if (count > 1) {
        double mean = sum / static_cast<double>(count);
        double var = (sum2 - static_cast<double>(count) * mean * mean) / static_cast<double>(count - 1);
        if (var > 0.0 && std::isfinite(var)) scale = var;
    }
    return 1e7 * scale;
}

using MatrixFn = std::function<Eigen::MatrixXd(Eigen::Index t, const ParameterVector& theta)>;
using SupportFn = std::function<bool(const ParameterVector& theta)>;

/// One additive model component: its own evolution M, observation map H and
/// state noise Q. Observation noise is not part of a block.
struct ComponentBlock {
    std::string name;
    BlockKind kind = BlockKind::custom;
    Eigen::Index state_dim = 0;
    Eigen::Index obs_dim = 1;
    MatrixFn m_fn;
    MatrixFn h_fn;
    MatrixFn q_fn;
    std::vector<std::string> parameter_slots;
    bool time_varying = false;
    SupportFn support;  ///< optional extra admissibility check on θ (e.g. AR stationarity)
};

/// Observation noise covariance R, shared by the whole model.
class ObservationNoise {
public:
    /// R = sigma^2 I_k with sigma read from `slot`.
    static ObservationNoise isotropic(std::string slot) {
        ObservationNoise n;
        n.slots_ = {std::move(slot)};
        return n;
    }

    /// R = diag(sigma_1^2, ..., sigma_k^2).
    static ObservationNoise diagonal(std::vector<std::string> slots) {
        ObservationNoise n;
        n.slots_ = std::move(slots);
        n.diagonal_ = true;
        return n;
    }

    /// Known, parameter-free R.
    static ObservationNoise fixed(Eigen::MatrixXd R) {
        ObservationNoise n;
        n.fixed_ = std::move(R);
        return n;
    }

    [[nodiscard]] const std::vector<std::string>& slots() const { return slots_; }

    [[nodiscard]] Eigen::MatrixXd covariance(Eigen::Index k, const ParameterVector& theta) const {
        if (slots_.empty()) {
            if (fixed_.rows() != k || fixed_.cols() != k)
                throw DimensionError("fixed observation covariance is not k x k");
            return fixed_;
        }
        if (diagonal_) {
            if (static_cast<Eigen::Index>(slots_.size()) != k)
                throw DimensionError("diagonal observation noise needs one slot per component");
            Eigen::MatrixXd R = Eigen::MatrixXd::Zero(k, k);
            for (Eigen::Index j = 0; j < k; ++j) {
                double s = theta[slots_[static_cast<std::size_t>(j)]];
                R(j, j) = s * s;
            }
            return R;
        }
        double s = theta[slots_.front()];
        return s * s * Eigen::MatrixXd::Identity(k, k);
    }

private:
    std::vector<std::string> slots_;
    bool diagonal_ = false;
    Eigen::MatrixXd fixed_;
};

class BoundModel;

/// A composed dynamic linear model. Immutable after construction; system
/// matrices are produced on demand for a given (t, θ).
class StateSpaceModel {
public:
    StateSpaceModel(std::vector<ComponentBlock> blocks, ObservationNoise noise, InitialState init)
        : blocks_(std::move(blocks)), noise_(std::move(noise)), init_(std::move(init)) {
        if (blocks_.empty()) throw ConfigError("a model needs at least one component");
        k_ = blocks_.front().obs_dim;
        for (const auto& b : blocks_) {
            if (b.obs_dim != k_)
                throw DimensionError("component '" + b.name + "' has observation dimension " +
                                     std::to_string(b.obs_dim) + ", expected " + std::to_string(k_));
            if (b.state_dim < 1) throw DimensionError("component '" + b.name + "' has no states");
            layout_.append(b.name, b.kind, b.state_dim);
        }
        m_ = layout_.dim();
        if (init_.mean.size() != m_ || init_.covariance.rows() != m_ || init_.covariance.cols() != m_)
            throw DimensionError("initial state does not match the state dimension " + std::to_string(m_));
    }

    [[nodiscard]] Eigen::Index state_dim() const { return m_; }
    [[nodiscard]] Eigen::Index obs_dim() const { return k_; }
    [[nodiscard]] const StateLayout& layout() const { return layout_; }
    [[nodiscard]] const std::vector<ComponentBlock>& blocks() const { return blocks_; }
    [[nodiscard]] const ObservationNoise& noise() const { return noise_; }
    [[nodiscard]] const InitialState& init() const { return init_; }

    [[nodiscard]] StateSpaceModel with_init(InitialState init) const {
        return StateSpaceModel(blocks_, noise_, std::move(init));
    }

    [[nodiscard]] bool time_varying() const {
        for (const auto& b : blocks_)
            if (b.time_varying) return true;
        return false;
    }

    /// Every θ entry the model reads, in block order, observation noise last.
    [[nodiscard]] std::vector<std::string> parameter_slots() const {
        std::vector<std::string> out;
        for (const auto& b : blocks_) out.insert(out.end(), b.parameter_slots.begin(), b.parameter_slots.end());
        out.insert(out.end(), noise_.slots().begin(), noise_.slots().end());
        return out;
    }

    /// Checks that θ binds every slot and lies in its domain and in every
    /// block's support.
    void check_parameters(const ParameterVector& theta) const {
        for (const auto& s : parameter_slots())
            if (!theta.contains(s)) throw ConfigError("parameter vector has no entry for slot '" + s + "'");
        for (const auto& s : parameter_slots()) {
            const auto& p = theta.entry(theta.index(s));
            if (!ParameterVector::in_domain(p.domain, p.value))
                throw DomainError("parameter '" + p.name + "' = " + std::to_string(p.value) +
                                  " is outside its domain");
        }
    }

    [[nodiscard]] bool in_support(const ParameterVector& theta) const {
        if (!theta.valid()) return false;
        for (const auto& b : blocks_)
            if (b.support && !b.support(theta)) return false;
        return true;
    }

    /// System matrices at time index t (0-based).
    [[nodiscard]] SystemMatrices materialize(Eigen::Index t, const ParameterVector& theta) const {
        check_parameters(theta);
        SystemMatrices s{Eigen::MatrixXd::Zero(m_, m_), Eigen::MatrixXd::Zero(k_, m_),
                         Eigen::MatrixXd::Zero(m_, m_), noise_.covariance(k_, theta)};
        Eigen::Index off = 0;
        for (const auto& b : blocks_) {
            fill_block(b, off, t, theta, s);
            off += b.state_dim;
        }
        return s;
    }

    /// Fills the rows/columns of block `b` (starting at state offset `off`).
    void fill_block(const ComponentBlock& b, Eigen::Index off, Eigen::Index t, const ParameterVector& theta,
                    SystemMatrices& s) const {
        const Eigen::Index d = b.state_dim;
        Eigen::MatrixXd M = b.m_fn(t, theta), H = b.h_fn(t, theta), Q = b.q_fn(t, theta);
        if (M.rows() != d || M.cols() != d || H.rows() != k_ || H.cols() != d || Q.rows() != d || Q.cols() != d)
            throw DimensionError("component '" + b.name + "' produced matrices of the wrong shape");
        s.M.block(off, off, d, d) = M;
        s.H.block(0, off, k_, d) = H;
        s.Q.block(off, off, d, d) = Q;
    }

    [[nodiscard]] BoundModel bind(const ParameterVector& theta) const;

private:
    std::vector<ComponentBlock> blocks_;
    ObservationNoise noise_;
    InitialState init_;
    StateLayout layout_;
    Eigen::Index m_ = 0;
    Eigen::Index k_ = 0;
};

/// The model evaluated at a fixed θ. Static blocks are evaluated once; blocks
/// flagged time-varying are refreshed on each call to at(). Not thread-safe;
/// create one per thread.
class BoundModel {
public:
    BoundModel(const StateSpaceModel& model, ParameterVector theta)
        : model_(&model), theta_(std::move(theta)) {
        system_ = model.materialize(0, theta_);
        Eigen::Index off = 0;
        for (std::size_t i = 0; i < model.blocks().size(); ++i) {
            if (model.blocks()[i].time_varying) varying_.push_back({i, off});
            off += model.blocks()[i].state_dim;
        }
    }

    [[nodiscard]] const SystemMatrices& at(Eigen::Index t) {
        if (t != current_ && !varying_.empty()) {
            for (const auto& [i, off] : varying_) model_->fill_block(model_->blocks()[i], off, t, theta_, system_);
        }
        current_ = t;
        return system_;
    }

    [[nodiscard]] const StateSpaceModel& model() const { return *model_; }
    [[nodiscard]] const ParameterVector& theta() const { return theta_; }
    [[nodiscard]] const InitialState& init() const { return model_->init(); }
    [[nodiscard]] Eigen::Index state_dim() const { return model_->state_dim(); }
    [[nodiscard]] Eigen::Index obs_dim() const { return model_->obs_dim(); }

private:
    const StateSpaceModel* model_;
    ParameterVector theta_;
    SystemMatrices system_;
    std::vector<std::pair<std::size_t, Eigen::Index>> varying_;
    Eigen::Index current_ = 0;
};

inline BoundModel StateSpaceModel::bind(const ParameterVector& theta) const { return BoundModel(*this, theta); }

/// Block-diagonal composition of components. The initial state defaults to
/// diffuse with the given kappa.
inline StateSpaceModel compose(std::vector<ComponentBlock> components, ObservationNoise noise,
                               double kappa = 1e7) {
    if (components.empty()) throw ConfigError("compose needs at least one component");
    Eigen::Index m = 0;
    for (const auto& c : components) m += c.state_dim;
    return StateSpaceModel(std::move(components), std::move(noise), InitialState::diffuse(m, kappa));
}

inline StateSpaceModel compose(std::vector<ComponentBlock> components, ObservationNoise noise,
                               InitialState init) {
    return StateSpaceModel(std::move(components), std::move(noise), std::move(init));
}

/// Wraps a composed model's state equations as a single block, so models
/// can be nested inside larger compositions.
inline ComponentBlock as_block(const StateSpaceModel& model, std::string name) {
    ComponentBlock b;
    b.name = std::move(name);
    b.kind = BlockKind::custom;
    b.state_dim = model.state_dim();
    b.obs_dim = model.obs_dim();
    b.time_varying = model.time_varying();
    b.parameter_slots.clear();
    for (const auto& blk : model.blocks())
        b.parameter_slots.insert(b.parameter_slots.end(), blk.parameter_slots.begin(), blk.parameter_slots.end());
    auto blocks = model.blocks();
    auto eval = [blocks, m = model.state_dim(), k = model.obs_dim()](Eigen::Index t, const ParameterVector& th,
                                                                   int which) {
        Eigen::MatrixXd out = which == 1 ? Eigen::MatrixXd::Zero(k, m) : Eigen::MatrixXd::Zero(m, m);
        Eigen::Index off = 0;
        for (const auto& blk : blocks) {
            const Eigen::Index d = blk.state_dim;
            if (which == 0) out.block(off, off, d, d) = blk.m_fn(t, th);
            if (which == 1) out.block(0, off, k, d) = blk.h_fn(t, th);
            if (which == 2) out.block(off, off, d, d) = blk.q_fn(t, th);
            off += d;
        }
        return out;
    };
    b.m_fn = [eval](Eigen::Index t, const ParameterVector& th) { return eval(t, th, 0); };
    b.h_fn = [eval](Eigen::Index t, const ParameterVector& th) { return eval(t, th, 1); };
    b.q_fn = [eval](Eigen::Index t, const ParameterVector& th) { return eval(t, th, 2); };
    b.support = [blocks](const ParameterVector& th) {
        for (const auto& blk : blocks)
            if (blk.support && !blk.support(th)) return false;
        return true;
    };
    return b;
}

/// Result of an explicit validation pass.
struct ValidationReport {
    bool ok = true;
    std::vector<std::string> problems;
};

/// Checks Q_t and R_t for symmetry (1e-12) and positive semi-definiteness
/// (eigenvalues >= -1e-10) at t = 0..n-1.
inline ValidationReport validate(const StateSpaceModel& model, const ParameterVector& theta, Eigen::Index n) {
    ValidationReport report;
    auto check = [&](const Eigen::MatrixXd& A, const char* what, Eigen::Index t) {
        if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
            report.ok = false;
            report.problems.push_back(std::string(what) + " not symmetric at t=" + std::to_string(t));
            return;
        }
        if (A.size() == 0) return;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10) {
            report.ok = false;
            report.problems.push_back(std::string(what) + " not positive semidefinite at t=" + std::to_string(t));
        }
    };
    const Eigen::Index steps = model.time_varying() ? n : std::min<Eigen::Index>(n, 1);
    for (Eigen::Index t = 0; t < steps; ++t) {
        auto s = model.materialize(t, theta);
        check(s.Q, "Q", t);
        check(s.R, "R", t);
    }
    return report;
}

}  // namespace dlm
