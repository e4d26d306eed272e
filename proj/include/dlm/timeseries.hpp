#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace dlm {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Uniformly sampled observations y_1..y_n of dimension k with an explicit
/// missing mask. Time indices are implicit (1..n); the original time stamps,
/// if any, are kept for output only.
class TimeSeries {
public:
    TimeSeries() = default;

    /// NaN entries in `values` are treated as missing.
    explicit TimeSeries(Eigen::MatrixXd values) : values_(std::move(values)) {
        missing_ = values_.unaryExpr([](double v) { return std::isnan(v); });
        finish();
    }

    TimeSeries(Eigen::MatrixXd values, BoolMatrix missing)
        : values_(std::move(values)), missing_(std::move(missing)) {
        finish();
    }

    [[nodiscard]] Eigen::Index size() const { return values_.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return values_.cols(); }

    /// Row t (0-based) of the data.
    [[nodiscard]] auto row(Eigen::Index t) const { return values_.row(t); }
    [[nodiscard]] bool missing(Eigen::Index t, Eigen::Index j) const { return missing_(t, j); }
    [[nodiscard]] bool all_missing(Eigen::Index t) const { return missing_.row(t).all(); }
    [[nodiscard]] bool any_missing(Eigen::Index t) const { return missing_.row(t).any(); }

    [[nodiscard]] const Eigen::MatrixXd& values() const { return values_; }
    [[nodiscard]] const BoolMatrix& missing_mask() const { return missing_; }

    [[nodiscard]] Eigen::Index observed_count() const {
        return static_cast<Eigen::Index>(missing_.size() - missing_.count());
    }

    [[nodiscard]] const std::vector<double>& times() const { return times_; }
    void set_times(std::vector<double> times) {
        if (static_cast<Eigen::Index>(times.size()) != size())
            throw DimensionError("time stamp count does not match series length");
        times_ = std::move(times);
    }

    /// Original time stamp of row t, or t + 1 when none were supplied.
    [[nodiscard]] double time(Eigen::Index t) const {
        return times_.empty() ? static_cast<double>(t + 1) : times_[static_cast<std::size_t>(t)];
    }

    /// Copy of this series with the given missing pattern applied.
    [[nodiscard]] TimeSeries with_mask(const BoolMatrix& mask) const {
        TimeSeries out(values_, mask);
        out.times_ = times_;
        return out;
    }

private:
    void finish() {
        if (values_.rows() < 1 || values_.cols() < 1)
            throw DataError("time series needs n >= 1 rows and k >= 1 columns");
        if (missing_.rows() != values_.rows() || missing_.cols() != values_.cols())
            throw DimensionError("missing mask shape does not match values");
        for (Eigen::Index t = 0; t < values_.rows(); ++t) {
            for (Eigen::Index j = 0; j < values_.cols(); ++j) {
                if (missing_(t, j)) {
                    values_(t, j) = std::numeric_limits<double>::quiet_NaN();
                } else if (!std::isfinite(values_(t, j))) {
                    throw DataError("non-finite observation at time index " + std::to_string(t + 1) +
                                    ", component " + std::to_string(j));
                }
            }
        }
    }

    Eigen::MatrixXd values_;
    BoolMatrix missing_;
    std::vector<double> times_;
};

}  // namespace dlm
