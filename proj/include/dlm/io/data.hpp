#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "../components.hpp"
#include "../errors.hpp"
#include "../timeseries.hpp"
#include "csv.hpp"

namespace dlm::io {

struct DataSpec {
    std::string path;
    std::string time_column;                   ///< empty: rows are numbered 1..n
    std::vector<std::string> value_columns;
    std::vector<std::string> covariate_columns;
    std::string missing_token = "NaN";         ///< empty cells are always missing
};

struct LoadedData {
    TimeSeries series;
    std::optional<CovariateMatrix> covariates;
    double time_step = 1.0;  ///< spacing of the original time stamps
};

/// Reads a CSV with a header row into a uniformly sampled series. Empty
/// cells and `missing_token` mark missing values. Time stamps must be
/// strictly increasing and equally spaced (relative tolerance 1e-6).
inline LoadedData load_timeseries(const DataSpec& spec) {
    const CsvTable table = read_csv(spec.path);
    if (spec.value_columns.empty()) throw ConfigError("data.value_columns is empty");
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    if (n < 1) throw DataError(spec.path + ": no data rows");

    auto col = [&](const std::string& name, const char* key) {
        auto c = table.column(name);
        if (c < 0) throw ConfigError(std::string(key) + ": column '" + name + "' not found in " + spec.path);
        return static_cast<std::size_t>(c);
    };
    auto is_missing = [&](const std::string& cell) {
        return cell.empty() || cell == spec.missing_token || cell == "NaN" || cell == "nan";
    };
    auto number = [&](const std::string& cell, Eigen::Index row, const std::string& column) {
        double v;
        if (!parse_double(cell, v) || !std::isfinite(v))
            throw DataError(spec.path + ": cannot parse '" + cell + "' at data row " + std::to_string(row + 1) +
                            ", column '" + column + "'");
        return v;
    };

    const auto k = static_cast<Eigen::Index>(spec.value_columns.size());
    Eigen::MatrixXd values(n, k);
    BoolMatrix mask(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto& name = spec.value_columns[static_cast<std::size_t>(j)];
        const auto c = col(name, "data.value_columns");
        for (Eigen::Index t = 0; t < n; ++t) {
            const auto& cell = table.rows[static_cast<std::size_t>(t)][c];
            mask(t, j) = is_missing(cell);
            values(t, j) = mask(t, j) ? std::numeric_limits<double>::quiet_NaN() : number(cell, t, name);
        }
    }

    LoadedData out{TimeSeries(values, mask), std::nullopt, 1.0};

    if (!spec.time_column.empty()) {
        const auto c = col(spec.time_column, "data.time_column");
        std::vector<double> times(static_cast<std::size_t>(n));
        for (Eigen::Index t = 0; t < n; ++t)
            times[static_cast<std::size_t>(t)] = number(table.rows[static_cast<std::size_t>(t)][c], t, spec.time_column);
        for (std::size_t t = 1; t < times.size(); ++t) {
            if (times[t] == times[t - 1])
                throw DataError(spec.path + ": duplicate time stamp at data row " + std::to_string(t + 1));
            if (times[t] < times[t - 1])
                throw DataError(spec.path + ": time stamps decrease at data row " + std::to_string(t + 1));
        }
        if (times.size() > 1) {
            const double step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
            for (std::size_t t = 1; t < times.size(); ++t) {
                const double d = times[t] - times[t - 1];
                if (std::abs(d - step) > 1e-6 * std::abs(step))
                    throw DataError(spec.path + ": non-uniform time step at data row " + std::to_string(t + 1) +
                                    " (irregular sampling is not supported; use missing values for gaps)");
            }
            out.time_step = step;
        }
        out.series.set_times(std::move(times));
    }

    if (!spec.covariate_columns.empty()) {
        const auto p = static_cast<Eigen::Index>(spec.covariate_columns.size());
        Eigen::MatrixXd Z(n, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto& name = spec.covariate_columns[static_cast<std::size_t>(j)];
            const auto c = col(name, "regression.columns");
            for (Eigen::Index t = 0; t < n; ++t) {
                const auto& cell = table.rows[static_cast<std::size_t>(t)][c];
                if (is_missing(cell))
                    throw DataError(spec.path + ": covariate '" + name + "' is missing at data row " +
                                    std::to_string(t + 1) + "; covariates must be complete");
                Z(t, j) = number(cell, t, name);
            }
        }
        out.covariates = CovariateMatrix(std::move(Z), spec.covariate_columns);
    }
    return out;
}

}  // namespace dlm::io
