#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "filter.hpp"
#include "inference.hpp"
#include "random.hpp"
#include "smoother.hpp"
#include "statespace.hpp"

namespace dlm {

/// Mean slope of the trend block's slope state, converted to units per year.
inline double linear_trend_stat(const StateDraw& draw, const StateLayout& layout, double samples_per_year) {
    const LayoutBlock* b = layout.first_of(BlockKind::trend);
    if (!b) throw ConfigError("model has no level+trend block to read a slope from");
    return draw.trajectory.col(b->offset + 1).mean() * samples_per_year;
}

/// Per-time amplitude sqrt(Σ_j s_{j,1}² + s_{j,2}²) over the harmonic pairs
/// of a seasonal block (the first one, or the one named).
inline Eigen::VectorXd seasonal_amplitude_stat(const StateDraw& draw, const StateLayout& layout,
                                               const std::string& block = {}) {
    const LayoutBlock* b = block.empty() ? layout.first_of(BlockKind::seasonal_harmonic) : layout.find(block);
    if (!b || b->kind != BlockKind::seasonal_harmonic) throw ConfigError("model has no seasonal block");
    return draw.trajectory.middleCols(b->offset, b->size).rowwise().norm();
}

/// Change of the level state between time indices t0 and t1 (0-based).
inline double level_change_stat(const StateDraw& draw, const StateLayout& layout, Eigen::Index t0, Eigen::Index t1) {
    const LayoutBlock* b = layout.first_of(BlockKind::trend);
    if (!b) b = layout.first_of(BlockKind::level);
    if (!b) throw ConfigError("model has no level block");
    const Eigen::Index n = draw.trajectory.rows();
    if (t0 < 0 || t1 < 0 || t0 >= n || t1 >= n) throw DimensionError("level change time index out of range");
    return draw.trajectory(t1, b->offset) - draw.trajectory(t0, b->offset);
}

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Per-time summary of one plot-ready series over the state draws.
struct SeriesSummary {
    std::string name;
    Eigen::VectorXd mean, median, q025, q25, q75, q975;
};

/// Posterior sample of a scalar functional of the states.
struct DerivedStat {
    std::string name;
    std::vector<double> samples;
    double mean = 0.0;
    double sd = 0.0;
};

struct TrendOptions {
    double samples_per_year = 1.0;
    int threads = 1;
    bool keep_draws = true;
    FilterOptions filter;
};

struct TrendAnalysis {
    McmcChain chain;
    std::vector<Eigen::Index> theta_indices;  ///< chain row paired with each state draw
    std::vector<StateDraw> state_draws;       ///< empty unless keep_draws
    std::vector<SeriesSummary> summaries;
    std::vector<DerivedStat> derived;
};

/// A chain that repeats θ, for plug-in (fixed or maximum likelihood) runs.
inline McmcChain constant_chain(const ParameterVector& theta, Eigen::Index length, double neg2_log_post = 0.0) {
    McmcChain c;
    c.names = theta.free_names();
    c.theta0 = theta;
    c.draws = theta.free_values().transpose().replicate(length, 1);
    c.log_posts = Eigen::VectorXd::Constant(length, neg2_log_post);
    c.acceptance_rate = 1.0;
    return c;
}

/// Names of the summarized series: one observation-scale signal per block
/// and observation component, plus the slope state of every trend block.
inline std::vector<std::string> summary_series_names(const StateSpaceModel& model) {
    std::vector<std::string> names;
    const Eigen::Index k = model.obs_dim();
    for (const auto& b : model.layout().blocks()) {
        for (Eigen::Index j = 0; j < k; ++j)
            names.push_back(k == 1 ? b.name : b.name + "[" + std::to_string(j) + "]");
        if (b.kind == BlockKind::trend) names.push_back(b.name + ".slope");
    }
    return names;
}

namespace detail {

inline DerivedStat summarize_samples(std::string name, std::vector<double> samples) {
    DerivedStat s{std::move(name), std::move(samples), 0.0, 0.0};
    const auto n = static_cast<double>(s.samples.size());
    for (double v : s.samples) s.mean += v;
    s.mean /= n;
    double ss = 0.0;
    for (double v : s.samples) ss += (v - s.mean) * (v - s.mean);
    s.sd = s.samples.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return s;
}

}  // namespace detail

/// One simulation-smoother draw per θ selected (by even thinning) from the
/// chain, plus the per-draw trend functionals.
/// Draw i uses random stream i of `seed`, so results do not depend on the
/// thread count.
inline TrendAnalysis draw_states(const StateSpaceModel& model, const TimeSeries& data, McmcChain chain,
                                 Eigen::Index n_state_draws, std::uint64_t seed, const TrendOptions& opts = {}) {
    TrendAnalysis out;
    out.theta_indices = thinning_indices(chain.size(), n_state_draws);
    const Eigen::Index n = data.size(), k = model.obs_dim();
    const auto N = static_cast<std::size_t>(n_state_draws);
    const auto names = summary_series_names(model);
    const StateLayout& layout = model.layout();
    const bool has_trend = layout.first_of(BlockKind::trend) != nullptr;
    const bool has_seasonal = layout.first_of(BlockKind::seasonal_harmonic) != nullptr;

    std::vector<Eigen::MatrixXd> series(names.size(), Eigen::MatrixXd(n, n_state_draws));
    std::vector<double> slopes(has_trend ? N : 0), amplitudes(has_seasonal ? N : 0);
    if (opts.keep_draws) out.state_draws.resize(N);

    auto work = [&](std::size_t begin, std::size_t end) {
        const Rng base(seed);
        Eigen::Index cached = -1;
        ParameterVector cached_theta;
        SmootherResult smoothed;
        for (std::size_t i = begin; i < end; ++i) {
            const Eigen::Index row = out.theta_indices[i];
            ParameterVector theta = chain.theta(row);
            if (cached < 0 || chain.draws.row(row) != chain.draws.row(cached)) {
                FilterResult fr = kalman_filter(model, data, theta, opts.filter);
                smoothed = rts_smoother(fr, model, theta);
                cached = row;
            }
            Rng rng = base.stream(i);
            StateDraw draw = simulation_smoother(model, data, theta, smoothed, rng, opts.filter);
            draw.stream = i + 1;

            auto sys = model.bind(theta);
            const auto di = static_cast<Eigen::Index>(i);
            for (Eigen::Index t = 0; t < n; ++t) {
                const Eigen::MatrixXd& H = sys.at(t).H;
                std::size_t s = 0;
                for (const auto& b : layout.blocks()) {
                    const Eigen::VectorXd sig =
                        H.middleCols(b.offset, b.size) * draw.trajectory.row(t).segment(b.offset, b.size).transpose();
                    for (Eigen::Index j = 0; j < k; ++j) series[s++](t, di) = sig(j);
                    if (b.kind == BlockKind::trend) series[s++](t, di) = draw.trajectory(t, b.offset + 1);
                }
            }
            if (has_trend) slopes[i] = linear_trend_stat(draw, layout, opts.samples_per_year);
            if (has_seasonal) amplitudes[i] = seasonal_amplitude_stat(draw, layout).mean();
            if (opts.keep_draws) out.state_draws[i] = std::move(draw);
        }
    };

    const auto threads = static_cast<std::size_t>(std::max(1, opts.threads));
    if (threads == 1 || N < 2) {
        work(0, N);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        const std::size_t chunk = (N + threads - 1) / threads;
        for (std::size_t w = 0; w < threads; ++w) {
            const std::size_t b = w * chunk, e = std::min(N, b + chunk);
            if (b >= e) break;
            pool.emplace_back([&, w, b, e] {
                try {
                    work(b, e);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);
    }

    std::vector<double> buf(N);
    for (std::size_t s = 0; s < names.size(); ++s) {
        SeriesSummary sum{names[s], Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n),
                          Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
        for (Eigen::Index t = 0; t < n; ++t) {
            for (std::size_t i = 0; i < N; ++i) buf[i] = series[s](t, static_cast<Eigen::Index>(i));
            std::sort(buf.begin(), buf.end());
            double mean = 0.0;
            for (double v : buf) mean += v;
            sum.mean(t) = mean / static_cast<double>(N);
            sum.median(t) = quantile_sorted(buf, 0.5);
            sum.q025(t) = quantile_sorted(buf, 0.025);
            sum.q25(t) = quantile_sorted(buf, 0.25);
            sum.q75(t) = quantile_sorted(buf, 0.75);
            sum.q975(t) = quantile_sorted(buf, 0.975);
        }
        out.summaries.push_back(std::move(sum));
    }
    if (has_trend) out.derived.push_back(detail::summarize_samples("trend_per_year", std::move(slopes)));
    if (has_seasonal) out.derived.push_back(detail::summarize_samples("seasonal_amplitude", std::move(amplitudes)));
    out.chain = std::move(chain);
    return out;
}

/// The full procedure: Kalman-filter likelihood, MCMC over θ, one
/// simulation-smoother draw per thinned θ, and trend functionals per draw.
/// The chain consumes `rng`; the state draws use sub-streams of a seed
/// derived from it.
inline TrendAnalysis run_trend_analysis(const StateSpaceModel& model, const TimeSeries& data, const Priors& priors,
                                        const ParameterVector& theta0, int n_samples, const McmcOptions& mcmc_options,
                                        Eigen::Index n_state_draws, Rng& rng, const TrendOptions& opts = {}) {
    McmcChain chain = mcmc_sample(model, data, priors, theta0, n_samples, mcmc_options, rng);
    return draw_states(model, data, std::move(chain), n_state_draws, rng.seed() ^ 0x9e3779b97f4a7c15ULL, opts);
}

}  // namespace dlm
