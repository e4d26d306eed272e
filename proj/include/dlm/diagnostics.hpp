#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "errors.hpp"
#include "filter.hpp"

namespace dlm {

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  ///< sample variance (n - 1 denominator)
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

struct LjungBox {
    double statistic = 0.0;
    int lags = 0;
    double p_value = 1.0;
};

struct QQPoint {
    double theoretical;
    double empirical;
};

struct ResidualDiagnostics {
    std::vector<double> times;      ///< time stamps of the residuals that are present
    std::vector<double> residuals;  ///< present residuals in time order
    std::vector<double> acf;        ///< lags 0..L
    double acf_band = 0.0;          ///< 2 / sqrt(n)
    std::vector<QQPoint> qq;
    LjungBox ljung_box;
    Moments moments;
    bool degenerate = false;        ///< zero variance: acf and Ljung-Box are not informative
};

struct DiagnosticsReport {
    std::vector<ResidualDiagnostics> components;  ///< one per observation component
    ResidualDiagnostics pooled;                   ///< all components together
};

inline int default_max_lag(std::size_t n) { return static_cast<int>(std::min<std::size_t>(20, n / 5)); }

inline Moments sample_moments(const std::vector<double>& v) {
    Moments m;
    const auto n = static_cast<double>(v.size());
    if (v.empty()) return m;
    for (double x : v) m.mean += x;
    m.mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = x - m.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m.variance = v.size() > 1 ? m2 / (n - 1.0) : 0.0;
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (m2 > 0.0) {
        m.skewness = m3 / std::pow(m2, 1.5);
        m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return m;
}

/// Biased sample autocorrelation at lags 0..max_lag over one or more
/// equally spaced sequences with gaps (NaN = absent). Lag-h products use
/// only pairs where both ends are present, and never cross sequences. The
/// mean is pooled over all present values.
inline std::vector<double> autocorrelation(const std::vector<std::vector<double>>& sequences, int max_lag) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : sequences)
        for (double x : s)
            if (!std::isnan(x)) {
                sum += x;
                ++count;
            }
    std::vector<double> acf(static_cast<std::size_t>(max_lag + 1), 0.0);
    if (count == 0) return acf;
    const double mean = sum / static_cast<double>(count);
    double c0 = 0.0;
    for (const auto& s : sequences)
        for (double x : s)
            if (!std::isnan(x)) c0 += (x - mean) * (x - mean);
    acf[0] = 1.0;
    if (!(c0 > 0.0)) return acf;
    for (int h = 1; h <= max_lag; ++h) {
        double ch = 0.0;
        for (const auto& s : sequences)
            for (std::size_t t = 0; t + static_cast<std::size_t>(h) < s.size(); ++t) {
                const double a = s[t], b = s[t + static_cast<std::size_t>(h)];
                if (!std::isnan(a) && !std::isnan(b)) ch += (a - mean) * (b - mean);
            }
        acf[static_cast<std::size_t>(h)] = ch / c0;
    }
    return acf;
}

inline std::vector<double> autocorrelation(const std::vector<double>& sequence, int max_lag) {
    return autocorrelation(std::vector<std::vector<double>>{sequence}, max_lag);
}

/// Q = n (n + 2) Σ_{h=1..L} acf_h² / (n - h), referred to χ²(L).
inline LjungBox ljung_box(const std::vector<double>& acf, std::size_t n, int lags) {
    if (lags < 1 || static_cast<std::size_t>(lags) >= acf.size() + 0 || static_cast<std::size_t>(lags) >= n)
        throw DataError("Ljung-Box needs 1 <= lags < n and an acf up to that lag");
    const auto nn = static_cast<double>(n);
    double q = 0.0;
    for (int h = 1; h <= lags; ++h) {
        const double r = acf[static_cast<std::size_t>(h)];
        q += r * r / (nn - h);
    }
    q *= nn * (nn + 2.0);
    boost::math::chi_squared dist(lags);
    const double p = boost::math::cdf(boost::math::complement(dist, q));
    return {q, lags, std::clamp(p, 0.0, 1.0)};
}

/// Sorted residuals against standard normal quantiles at (i - 0.5) / n.
inline std::vector<QQPoint> qq_points(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const boost::math::normal_distribution<double> norm;
    std::vector<QQPoint> out;
    out.reserve(values.size());
    const auto n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double p = (static_cast<double>(i) + 0.5) / n;
        out.push_back({boost::math::quantile(norm, p), values[i]});
    }
    return out;
}

namespace detail {

inline ResidualDiagnostics diagnose(const std::vector<std::vector<double>>& sequences,
                                    const std::vector<double>& times, int max_lag) {
    ResidualDiagnostics d;
    for (const auto& s : sequences)
        for (std::size_t t = 0; t < s.size(); ++t)
            if (!std::isnan(s[t])) {
                d.residuals.push_back(s[t]);
                d.times.push_back(times[t]);
            }
    const std::size_t n = d.residuals.size();
    int lags = max_lag > 0 ? max_lag : default_max_lag(n);
    if (lags < 1 || n < static_cast<std::size_t>(lags) + 1)
        throw DataError("too few residuals (" + std::to_string(n) + ") for " + std::to_string(std::max(lags, 1)) +
                        " autocorrelation lags");
    d.moments = sample_moments(d.residuals);
    d.acf = autocorrelation(sequences, lags);
    d.acf_band = 2.0 / std::sqrt(static_cast<double>(n));
    d.qq = qq_points(d.residuals);
    d.degenerate = !(d.moments.variance > 0.0);
    if (d.degenerate)
        d.ljung_box = {0.0, lags, 1.0};
    else
        d.ljung_box = ljung_box(d.acf, n, lags);
    return d;
}

}  // namespace detail

/// Diagnostics of a single residual sequence (NaN = missing).
inline ResidualDiagnostics diagnose_sequence(const std::vector<double>& residuals, int max_lag = 0) {
    std::vector<double> times(residuals.size());
    for (std::size_t t = 0; t < times.size(); ++t) times[t] = static_cast<double>(t + 1);
    return detail::diagnose({residuals}, times, max_lag);
}

/// Per-component and pooled diagnostics of aligned residual sequences.
inline DiagnosticsReport diagnostics_report(const std::vector<std::vector<double>>& seqs,
                                            const std::vector<double>& times, int max_lag = 0) {
    DiagnosticsReport rep;
    for (const auto& s : seqs) rep.components.push_back(detail::diagnose({s}, times, max_lag));
    if (seqs.size() == 1) {
        rep.pooled = rep.components.front();
    } else {
        int lags = max_lag;
        if (lags <= 0) {
            std::size_t total = 0;
            for (const auto& c : rep.components) total += c.residuals.size();
            lags = default_max_lag(total);
        }
        rep.pooled = detail::diagnose(seqs, times, lags);
    }
    return rep;
}

/// Diagnostics of the scaled one-step residuals of a filter run, per
/// observation component and pooled. The first `skip` time steps are
/// ignored. max_lag = 0 selects min(20, n / 5).
inline DiagnosticsReport residual_diagnostics(const FilterResult& fr, int max_lag = 0, Eigen::Index skip = 0,
                                              const std::vector<double>& time_stamps = {}) {
    const auto scaled = scaled_residuals(fr);
    const Eigen::Index n = fr.size();
    const Eigen::Index k = n > 0 ? fr.residual.front().size() : 0;
    std::vector<double> times(static_cast<std::size_t>(std::max<Eigen::Index>(n - skip, 0)));
    for (std::size_t i = 0; i < times.size(); ++i)
        times[i] = time_stamps.empty() ? static_cast<double>(static_cast<Eigen::Index>(i) + skip + 1)
                                       : time_stamps[i + static_cast<std::size_t>(skip)];
    std::vector<std::vector<double>> seqs(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index t = skip; t < n; ++t) seqs[static_cast<std::size_t>(j)].push_back(scaled[static_cast<std::size_t>(t)](j));
    return diagnostics_report(seqs, times, max_lag);
}

}  // namespace dlm
