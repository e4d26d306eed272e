#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "../diagnostics.hpp"
#include "../filter.hpp"
#include "../inference.hpp"
#include "../smoother.hpp"
#include "../trend.hpp"
#include "../version.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "data.hpp"

namespace dlm::io {

namespace fs = std::filesystem;

/// Exit codes of the command-line front end.
enum ExitCode : int {
    exit_ok = 0,
    exit_config = 2,
    exit_data = 3,
    exit_numerical = 4,
    exit_not_converged = 5,
};

struct RunOptions {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

struct RunResult {
    int exit_code = exit_ok;
    fs::path directory;
    std::vector<std::string> files;
};

/// Output directory: --out, else output.directory (relative to
/// $DLM_OUTPUT_ROOT when set), else $DLM_OUTPUT_ROOT/<fallback>, else ./<fallback>.
inline fs::path resolve_output_dir(const RunConfig& cfg, const RunOptions& opts, const std::string& fallback) {
    if (opts.out_dir) return fs::path(*opts.out_dir);
    const char* root = std::getenv("DLM_OUTPUT_ROOT");
    fs::path dir = cfg.output.directory.empty() ? fs::path(fallback) : fs::path(cfg.output.directory);
    if (dir.is_relative() && root && *root) dir = fs::path(root) / dir;
    return dir;
}

namespace detail {

inline void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

inline nlohmann::json to_json(const ResidualDiagnostics& d) {
    return {{"n", d.residuals.size()},
            {"degenerate", d.degenerate},
            {"ljung_box", {{"statistic", d.ljung_box.statistic}, {"lags", d.ljung_box.lags}, {"p_value", d.ljung_box.p_value}}},
            {"moments",
             {{"mean", d.moments.mean},
              {"variance", d.moments.variance},
              {"skewness", d.moments.skewness},
              {"excess_kurtosis", d.moments.excess_kurtosis}}},
            {"acf_band", d.acf_band}};
}

inline nlohmann::json to_json(const DiagnosticsReport& rep, const std::vector<std::string>& names) {
    nlohmann::json j;
    for (std::size_t i = 0; i < rep.components.size(); ++i) j["components"][names[i]] = to_json(rep.components[i]);
    j["pooled"] = to_json(rep.pooled);
    return j;
}

/// acf.csv and qq.csv for a diagnostics report.
inline void write_diagnostic_tables(const fs::path& dir, const DiagnosticsReport& rep,
                                    const std::vector<std::string>& names) {
    CsvWriter acf((dir / "acf.csv").string());
    std::vector<std::string> header{"lag"};
    for (const auto& n : names) header.push_back(n);
    if (names.size() > 1) header.push_back("pooled");
    header.push_back("band");
    acf.header(header);
    const std::size_t lags = rep.pooled.acf.size();
    for (std::size_t h = 0; h < lags; ++h) {
        std::vector<double> row{static_cast<double>(h)};
        for (const auto& c : rep.components) row.push_back(h < c.acf.size() ? c.acf[h] : std::nan(""));
        if (names.size() > 1) row.push_back(rep.pooled.acf[h]);
        row.push_back(rep.pooled.acf_band);
        acf.row(row);
    }
    CsvWriter qq((dir / "qq.csv").string());
    qq.header({"theoretical", "empirical"});
    for (const auto& p : rep.pooled.qq) qq.row({p.theoretical, p.empirical});
}

inline std::uint64_t require_seed(const std::optional<std::uint64_t>& override_seed,
                                  const std::optional<std::uint64_t>& config_seed, const char* key) {
    if (override_seed) return *override_seed;
    if (config_seed) return *config_seed;
    throw ConfigError(std::string(key) + ": a seed is required for stochastic runs (or pass --seed)");
}

inline std::optional<CovariateMatrix> load_covariates_only(const RunConfig& cfg) {
    auto cols = covariate_columns(cfg);
    if (cols.empty()) return std::nullopt;
    const std::string path = cfg.simulate.covariates;
    if (path.empty()) throw ConfigError("simulate.covariates: regression components need a covariate file");
    const CsvTable table = read_csv(path);
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Eigen::MatrixXd Z(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto idx = table.column(cols[c]);
        if (idx < 0) throw ConfigError("regression.columns: column '" + cols[c] + "' not found in " + path);
        for (Eigen::Index t = 0; t < n; ++t) {
            double v;
            if (!parse_double(table.rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(idx)], v) ||
                !std::isfinite(v))
                throw DataError(path + ": covariate '" + cols[c] + "' is missing or invalid at data row " +
                                std::to_string(t + 1));
            Z(t, static_cast<Eigen::Index>(c)) = v;
        }
    }
    return CovariateMatrix(std::move(Z), cols);
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

/// Fits the configured model and writes every run artifact to the output
/// directory. Returns exit_not_converged (after writing) when maximum
/// likelihood did not converge.
inline RunResult run_fit(const RunConfig& cfg, const RunOptions& opts = {}) {
    using nlohmann::json;
    const auto t_start = std::chrono::steady_clock::now();
    RunResult result;
    if (cfg.data.path.empty()) throw ConfigError("data.path: required for fit");
    const std::uint64_t seed = detail::require_seed(opts.seed, cfg.inference.seed, "inference.seed");

    DataSpec spec = cfg.data;
    spec.covariate_columns = covariate_columns(cfg);
    LoadedData loaded = load_timeseries(spec);
    const TimeSeries& data = loaded.series;
    const double scale = robust_scale(data);
    BuiltModel built = build_model(cfg, loaded.covariates, scale, data.dim(), false, default_kappa(data));
    const StateSpaceModel& model = built.model;

    FilterOptions fopts;
    fopts.joseph = cfg.joseph;
    fopts.likelihood_burn_in = cfg.likelihood_burn_in ? model.state_dim() : 0;
    const double samples_per_year = cfg.output.samples_per_year.value_or(1.0 / loaded.time_step);
    const std::string& mode = cfg.inference.mode;
    const auto draws = static_cast<Eigen::Index>(cfg.inference.n_state_draws);

    fs::path dir = resolve_output_dir(cfg, opts, cfg.name);
    fs::create_directories(dir);
    result.directory = dir;

    json summary;
    summary["mode"] = mode;
    ParameterVector theta = built.theta;
    McmcChain chain;
    bool not_converged = false;
    const auto t_infer = std::chrono::steady_clock::now();

    if (mode == "fixed") {
        chain = constant_chain(theta, draws, neg2_log_likelihood(model, data, theta, fopts));
    } else if (mode == "mle") {
        MleOptions mo;
        mo.filter = fopts;
        mo.seed = seed;
        mo.max_restarts = cfg.inference.max_restarts;
        MleResult fit = fit_mle(model, data, theta, mo);
        theta = fit.theta_hat;
        not_converged = !fit.converged;
        summary["mle"] = {{"converged", fit.converged}, {"iterations", fit.iterations}, {"restarts", fit.restarts},
                          {"neg2_loglik", fit.neg2_loglik}};
        chain = constant_chain(theta, draws, fit.neg2_loglik);
    } else {
        McmcOptions mo;
        mo.warmup = cfg.inference.warmup;
        mo.adapt_interval = cfg.inference.adapt_interval;
        mo.initial_scale = cfg.inference.initial_scale;
        mo.target_scale = cfg.inference.target_scale;
        mo.filter = fopts;
        Rng rng(seed);
        chain = mcmc_sample(model, data, built.priors, theta, cfg.inference.n_samples, mo, rng);
        theta = theta.with_free_values(chain.draws.colwise().mean().transpose());
        summary["acceptance_rate"] = chain.acceptance_rate;
    }
    const double infer_seconds = detail::seconds_since(t_infer);

    const auto t_draws = std::chrono::steady_clock::now();
    TrendOptions topts;
    topts.samples_per_year = samples_per_year;
    topts.threads = std::max(1, opts.threads);
    topts.keep_draws = false;
    topts.filter = fopts;
    TrendAnalysis trend = draw_states(model, data, chain, draws, seed + 1, topts);
    const double draw_seconds = detail::seconds_since(t_draws);

    // Residual diagnostics at the point estimate (posterior mean for MCMC).
    FilterResult fr = kalman_filter(model, data, theta, fopts);
    const auto scaled = scaled_residuals(fr);
    const Eigen::Index skip = fopts.likelihood_burn_in;
    DiagnosticsReport diag = residual_diagnostics(fr, cfg.output.max_lag, skip, data.times());

    // --- artifacts
    json files;
    const Eigen::Index n = data.size(), k = data.dim();
    {
        CsvWriter w((dir / "states.csv").string());
        std::vector<std::string> header{"time"};
        for (const auto& s : trend.summaries)
            for (const char* suffix : {"_mean", "_median", "_q025", "_q25", "_q75", "_q975"})
                header.push_back(s.name + suffix);
        w.header(header);
        for (Eigen::Index t = 0; t < n; ++t) {
            std::vector<double> row{data.time(t)};
            for (const auto& s : trend.summaries)
                for (const auto* v : {&s.mean, &s.median, &s.q025, &s.q25, &s.q75, &s.q975}) row.push_back((*v)(t));
            w.row(row);
        }
        files["states.csv"] = w.rows();
    }
    {
        CsvWriter w((dir / "residuals.csv").string());
        std::vector<std::string> header{"time"};
        for (const auto& c : cfg.data.value_columns) {
            header.push_back(c + "_raw");
            header.push_back(c + "_scaled");
        }
        w.header(header);
        for (Eigen::Index t = 0; t < n; ++t) {
            std::vector<double> row{data.time(t)};
            for (Eigen::Index j = 0; j < k; ++j) {
                row.push_back(fr.residual[static_cast<std::size_t>(t)](j));
                row.push_back(scaled[static_cast<std::size_t>(t)](j));
            }
            w.row(row);
        }
        files["residuals.csv"] = w.rows();
    }
    detail::write_diagnostic_tables(dir, diag, cfg.data.value_columns);
    files["acf.csv"] = diag.pooled.acf.size();
    files["qq.csv"] = diag.pooled.qq.size();
    if (mode == "mcmc") {
        CsvWriter w((dir / "chain.csv").string());
        std::vector<std::string> header{"iteration"};
        for (const auto& name : chain.names) header.push_back(name);
        header.push_back("neg2_log_post");
        w.header(header);
        for (Eigen::Index i = 0; i < chain.size(); ++i) {
            std::vector<double> row{static_cast<double>(i)};
            for (Eigen::Index c = 0; c < chain.draws.cols(); ++c) row.push_back(chain.draws(i, c));
            row.push_back(chain.log_posts(i));
            w.row(row);
        }
        files["chain.csv"] = w.rows();
    }
    {
        CsvWriter w((dir / "derived.csv").string());
        std::vector<std::string> header{"draw", "chain_index"};
        for (const auto& d : trend.derived) header.push_back(d.name);
        w.header(header);
        for (std::size_t i = 0; i < trend.theta_indices.size(); ++i) {
            std::vector<double> row{static_cast<double>(i), static_cast<double>(trend.theta_indices[i])};
            for (const auto& d : trend.derived) row.push_back(d.samples[i]);
            w.row(row);
        }
        files["derived.csv"] = w.rows();
    }

    json params;
    const auto free = theta.free_indices();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const auto& p = theta.entry(i);
        json e;
        e["fixed"] = p.fixed;
        if (p.fixed) {
            e["value"] = p.value;
        } else if (mode == "mcmc") {
            const auto c = static_cast<Eigen::Index>(std::find(free.begin(), free.end(), i) - free.begin());
            std::vector<double> col(chain.draws.col(c).data(), chain.draws.col(c).data() + chain.size());
            auto s = dlm::detail::summarize_samples(p.name, col);
            std::sort(col.begin(), col.end());
            e["mean"] = s.mean;
            e["sd"] = s.sd;
            e["q025"] = quantile_sorted(col, 0.025);
            e["q975"] = quantile_sorted(col, 0.975);
        } else {
            e["estimate"] = p.value;
        }
        params[p.name] = e;
    }
    summary["parameters"] = params;
    for (const auto& d : trend.derived) summary[d.name] = {{"mean", d.mean}, {"sd", d.sd}};
    summary["samples_per_year"] = samples_per_year;
    summary["neg2_loglik"] = fr.neg2_loglik;
    summary["n"] = n;
    summary["n_obs_used"] = fr.n_obs_used;
    summary["n_state_draws"] = draws;
    summary["diagnostics"] = detail::to_json(diag, cfg.data.value_columns);
    detail::write_json(dir / "summary.json", summary);
    files["summary.json"] = 1;

    json manifest;
    manifest["tool"] = "dlm";
    manifest["version"] = version_string;
    manifest["command"] = "fit";
    manifest["seed"] = seed;
    manifest["config"] = cfg.raw;
    manifest["value_columns"] = cfg.data.value_columns;
    manifest["diagnostics"] = {{"max_lag", cfg.output.max_lag}, {"skip", skip}};
    manifest["files"] = files;
    manifest["timings_seconds"] = {{"inference", infer_seconds},
                                   {"state_draws", draw_seconds},
                                   {"total", detail::seconds_since(t_start)}};
    detail::write_json(dir / "manifest.json", manifest);

    for (auto it = files.begin(); it != files.end(); ++it) result.files.push_back(it.key());
    result.files.push_back("manifest.json");
    result.exit_code = not_converged ? exit_not_converged : exit_ok;
    return result;
}

/// Simulates data from the configured model with the parameter values as
/// truth. Writes the observations CSV and a `<stem>.truth.csv` sidecar with
/// the true states. The initial state is taken from simulate.initial_state
/// (zero where not given), not drawn. The target is simulate.file (default:
/// data.path), placed in --out when given.
inline RunResult run_simulate(const RunConfig& cfg, const RunOptions& opts = {}) {
    if (!cfg.simulate.present) throw ConfigError("simulate: section missing");
    const std::uint64_t seed = detail::require_seed(opts.seed, cfg.simulate.seed, "simulate.seed");
    auto covariates = detail::load_covariates_only(cfg);
    long n = cfg.simulate.n;
    if (n == 0 && covariates) n = static_cast<long>(covariates->size());
    if (n < 1) throw ConfigError("simulate.n: must be at least 1");
    if (covariates && covariates->size() < n)
        throw ConfigError("simulate.n: exceeds the number of covariate rows (" + std::to_string(covariates->size()) + ")");
    const auto k = static_cast<Eigen::Index>(cfg.data.value_columns.size());
    BuiltModel built = build_model(cfg, covariates, 1.0, k, true);

    const Eigen::Index m = built.model.state_dim();
    InitialState init{Eigen::VectorXd::Zero(m), Eigen::MatrixXd::Zero(m, m), 1.0};
    for (const auto& [name, values] : cfg.simulate.initial_state) {
        const LayoutBlock* b = built.model.layout().find(name);
        if (!b) throw ConfigError("simulate.initial_state: unknown component '" + name + "'");
        if (static_cast<Eigen::Index>(values.size()) != b->size)
            throw ConfigError("simulate.initial_state." + name + ": expected " + std::to_string(b->size) + " values");
        for (Eigen::Index i = 0; i < b->size; ++i) init.mean(b->offset + i) = values[static_cast<std::size_t>(i)];
    }
    StateSpaceModel model = built.model.with_init(init);
    Rng base(seed);
    Rng path_rng = base.stream(0), mask_rng = base.stream(1);
    SimulatedPath sim = simulate_forward(model, built.theta, n, path_rng, false);

    const fs::path file =
        opts.out_dir ? fs::path(*opts.out_dir) / fs::path(cfg.simulate.file).filename() : fs::path(cfg.simulate.file);
    const fs::path dir = file.parent_path().empty() ? fs::path(".") : file.parent_path();
    fs::create_directories(dir);
    const fs::path truth = dir / (fs::path(cfg.simulate.file).stem().string() + ".truth.csv");
    const std::string time_col = cfg.data.time_column.empty() ? "time" : cfg.data.time_column;
    const auto cov_cols = covariate_columns(cfg);
    {
        CsvWriter w(file.string());
        std::vector<std::string> header{time_col};
        header.insert(header.end(), cfg.data.value_columns.begin(), cfg.data.value_columns.end());
        header.insert(header.end(), cov_cols.begin(), cov_cols.end());
        w.header(header);
        for (Eigen::Index t = 0; t < n; ++t) {
            std::vector<double> row{cfg.simulate.time_start + static_cast<double>(t) * cfg.simulate.time_step};
            for (Eigen::Index j = 0; j < k; ++j) {
                const bool drop = cfg.simulate.missing_fraction > 0.0 && mask_rng.uniform() < cfg.simulate.missing_fraction;
                row.push_back(drop ? std::nan("") : sim.observations(t, j));
            }
            for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(cov_cols.size()); ++c) row.push_back(covariates->values(t, c));
            w.row(row);
        }
    }
    {
        CsvWriter w(truth.string());
        std::vector<std::string> header{time_col};
        for (const auto& b : model.layout().blocks())
            for (Eigen::Index i = 0; i < b.size; ++i) header.push_back(b.name + "[" + std::to_string(i) + "]");
        w.header(header);
        for (Eigen::Index t = 0; t < n; ++t) {
            std::vector<double> row{cfg.simulate.time_start + static_cast<double>(t) * cfg.simulate.time_step};
            for (Eigen::Index i = 0; i < m; ++i) row.push_back(sim.states(t, i));
            w.row(row);
        }
    }
    RunResult r;
    r.directory = dir;
    r.files = {file.filename().string(), truth.filename().string()};
    return r;
}

/// Recomputes residual diagnostics from a saved fit directory
/// (residuals.csv + manifest.json) and rewrites acf.csv, qq.csv and
/// diagnostics.json there.
inline RunResult run_diagnose(const fs::path& dir, int max_lag_override = 0) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ConfigError("no manifest.json in '" + dir.string() + "'");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest.json is not valid JSON: ") + e.what());
    }
    const auto names = manifest.at("value_columns").get<std::vector<std::string>>();
    int max_lag = max_lag_override > 0 ? max_lag_override : manifest.at("diagnostics").at("max_lag").get<int>();
    const auto skip = manifest.at("diagnostics").at("skip").get<long>();

    const CsvTable table = read_csv((dir / "residuals.csv").string());
    std::vector<std::vector<double>> seqs(names.size());
    std::vector<double> times;
    for (std::size_t r = static_cast<std::size_t>(skip); r < table.rows.size(); ++r) {
        double tv = 0.0;
        parse_double(table.rows[r][0], tv);
        times.push_back(tv);
        for (std::size_t j = 0; j < names.size(); ++j) {
            const auto c = table.column(names[j] + "_scaled");
            if (c < 0) throw DataError("residuals.csv: column '" + names[j] + "_scaled' missing");
            const std::string& cell = table.rows[r][static_cast<std::size_t>(c)];
            double v;
            if (cell == "NaN" || cell.empty()) {
                v = std::nan("");
            } else if (!parse_double(cell, v)) {
                throw DataError("residuals.csv: cannot parse '" + cell + "' at data row " + std::to_string(r + 1));
            }
            seqs[j].push_back(v);
        }
    }
    const DiagnosticsReport rep = diagnostics_report(seqs, times, max_lag);
    detail::write_diagnostic_tables(dir, rep, names);
    detail::write_json(dir / "diagnostics.json", detail::to_json(rep, names));
    RunResult r;
    r.directory = dir;
    r.files = {"acf.csv", "qq.csv", "diagnostics.json"};
    return r;
}

}  // namespace dlm::io
