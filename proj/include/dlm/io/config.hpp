#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "../components.hpp"
#include "../errors.hpp"
#include "../inference.hpp"
#include "../statespace.hpp"
#include "data.hpp"

namespace dlm::io {

using nlohmann::json;

/// A parameter setting: `3.0` (fixed), or {"value": v, "estimate": bool}.
struct ParamSpec {
    std::optional<double> value;
    bool estimate = false;
};

struct ComponentSpec {
    std::string kind;
    std::string name;
    std::map<std::string, ParamSpec> params;  ///< scalar settings, keyed by parameter name
    std::vector<ParamSpec> rho;               ///< AR coefficients
    std::vector<ParamSpec> sigma_proxy;       ///< regression coefficient sds
    double period = 0.0;
    int harmonics = 1;
    int order = 0;
    std::vector<std::string> columns;
};

struct InferenceSpec {
    std::string mode = "fixed";  ///< fixed | mle | mcmc
    int n_samples = 5000;
    int warmup = 1000;
    int adapt_interval = 100;
    double initial_scale = 0.1;
    double target_scale = 0.0;
    int n_state_draws = 1000;
    int max_restarts = 4;
    std::optional<std::uint64_t> seed;
};

struct OutputSpec {
    std::string directory;
    std::optional<double> samples_per_year;
    int max_lag = 0;
};

struct SimulateSpec {
    bool present = false;
    long n = 0;
    std::optional<std::uint64_t> seed;
    double time_start = 1.0;
    double time_step = 1.0;
    std::string file;        ///< defaults to data.path, else simulated.csv
    std::string covariates;  ///< CSV holding regression columns (defaults to data.path)
    double missing_fraction = 0.0;
    std::map<std::string, std::vector<double>> initial_state;
};

/// Declarative run description, read from a JSON file.
struct RunConfig {
    json raw;
    std::filesystem::path base_dir;  ///< relative paths resolve against this
    std::string name = "run";        ///< config file stem
    DataSpec data;
    std::vector<ComponentSpec> model;
    ParamSpec obs_noise;
    Priors priors;
    InferenceSpec inference;
    OutputSpec output;
    std::optional<double> kappa;
    bool likelihood_burn_in = false;
    bool joseph = false;
    SimulateSpec simulate;
};

namespace detail {

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

template <class T>
T require(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    return get<T>(j, key, where, T{});
}

inline ParamSpec param(const json& j, const std::string& where) {
    ParamSpec p;
    if (j.is_number()) {
        p.value = j.get<double>();
    } else if (j.is_object()) {
        check_keys(j, where, {"value", "estimate"});
        if (j.contains("value")) {
            if (!j.at("value").is_number()) throw ConfigError(where + ".value: expected a number");
            p.value = j.at("value").get<double>();
        }
        p.estimate = get<bool>(j, "estimate", where, false);
    } else {
        throw ConfigError(where + ": expected a number or {\"value\", \"estimate\"}");
    }
    if (!p.estimate && !p.value) throw ConfigError(where + ": fixed parameter needs a value");
    return p;
}

inline ParamSpec param_or(const json& j, const std::string& key, const std::string& where, double fallback) {
    if (!j.contains(key)) return ParamSpec{fallback, false};
    return param(j.at(key), where + "." + key);
}

inline Prior parse_prior(const json& j, const std::string& where) {
    const auto dist = require<std::string>(j, "dist", where);
    if (dist == "half_normal") {
        check_keys(j, where, {"dist", "scale"});
        return Prior::half_normal(require<double>(j, "scale", where));
    }
    if (dist == "uniform") {
        check_keys(j, where, {"dist", "lower", "upper"});
        return Prior::uniform(require<double>(j, "lower", where), require<double>(j, "upper", where));
    }
    if (dist == "normal") {
        check_keys(j, where, {"dist", "mean", "sd"});
        return Prior::normal(require<double>(j, "mean", where), require<double>(j, "sd", where));
    }
    throw ConfigError(where + ": unknown prior distribution '" + dist + "'");
}

inline std::optional<std::uint64_t> seed_of(const json& j, const std::string& where) {
    if (!j.contains("seed")) return std::nullopt;
    if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0)
        throw ConfigError(where + ".seed: expected a nonnegative integer");
    return j.at("seed").get<std::uint64_t>();
}

}  // namespace detail

inline RunConfig parse_config(const json& j, std::filesystem::path base_dir = {}) {
    using namespace detail;
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    check_keys(j, "config", {"data", "model", "obs_noise", "priors", "inference", "output", "kappa",
                             "likelihood_burn_in", "joseph", "simulate"});
    RunConfig c;
    c.raw = j;
    c.base_dir = std::move(base_dir);

    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, "data", {"path", "time_column", "value_columns", "missing_token"});
        c.data.path = get<std::string>(d, "path", "data", "");
        c.data.time_column = get<std::string>(d, "time_column", "data", "");
        c.data.value_columns = get<std::vector<std::string>>(d, "value_columns", "data", {"y"});
        c.data.missing_token = get<std::string>(d, "missing_token", "data", "NaN");
        if (!c.data.path.empty() && std::filesystem::path(c.data.path).is_relative() && !c.base_dir.empty())
            c.data.path = (c.base_dir / c.data.path).string();
    } else {
        c.data.value_columns = {"y"};
    }

    if (!j.contains("model") || !j.at("model").is_array() || j.at("model").empty())
        throw ConfigError("model: expected a non-empty list of components");
    std::set<std::string> names;
    for (std::size_t i = 0; i < j.at("model").size(); ++i) {
        const json& m = j.at("model")[i];
        const std::string where = "model[" + std::to_string(i) + "]";
        ComponentSpec s;
        s.kind = require<std::string>(m, "kind", where);
        s.name = get<std::string>(m, "name", where, s.kind);
        if (!names.insert(s.name).second) throw ConfigError(where + ": duplicate component name '" + s.name + "'");
        if (s.kind == "level_trend") {
            check_keys(m, where, {"kind", "name", "sigma_level", "sigma_trend"});
            s.params["sigma_level"] = param_or(m, "sigma_level", where, 0.0);
            s.params["sigma_trend"] = param_or(m, "sigma_trend", where, 0.0);
        } else if (s.kind == "level") {
            check_keys(m, where, {"kind", "name", "sigma_level"});
            s.params["sigma_level"] = param_or(m, "sigma_level", where, 0.0);
        } else if (s.kind == "seasonal") {
            check_keys(m, where, {"kind", "name", "period", "harmonics", "sigma_seas"});
            s.period = require<double>(m, "period", where);
            s.harmonics = get<int>(m, "harmonics", where, 1);
            s.params["sigma_seas"] = param_or(m, "sigma_seas", where, 0.0);
        } else if (s.kind == "ar") {
            check_keys(m, where, {"kind", "name", "order", "rho", "sigma_ar"});
            s.order = require<int>(m, "order", where);
            if (s.order < 1) throw ConfigError(where + ".order: must be at least 1");
            if (!m.contains("sigma_ar")) throw ConfigError(where + ": missing key 'sigma_ar'");
            s.params["sigma_ar"] = param(m.at("sigma_ar"), where + ".sigma_ar");
            if (!m.contains("rho") || !m.at("rho").is_array() || m.at("rho").size() != static_cast<std::size_t>(s.order))
                throw ConfigError(where + ".rho: expected a list of " + std::to_string(s.order) + " coefficients");
            for (std::size_t r = 0; r < m.at("rho").size(); ++r)
                s.rho.push_back(param(m.at("rho")[r], where + ".rho[" + std::to_string(r) + "]"));
        } else if (s.kind == "regression") {
            check_keys(m, where, {"kind", "name", "columns", "sigma"});
            s.columns = require<std::vector<std::string>>(m, "columns", where);
            if (s.columns.empty()) throw ConfigError(where + ".columns: empty");
            if (m.contains("sigma")) {
                if (!m.at("sigma").is_array() || m.at("sigma").size() != s.columns.size())
                    throw ConfigError(where + ".sigma: expected one entry per column");
                for (std::size_t r = 0; r < s.columns.size(); ++r)
                    s.sigma_proxy.push_back(param(m.at("sigma")[r], where + ".sigma[" + std::to_string(r) + "]"));
            } else {
                s.sigma_proxy.assign(s.columns.size(), ParamSpec{0.0, false});
            }
        } else {
            throw ConfigError(where + ": unknown component kind '" + s.kind + "'");
        }
        c.model.push_back(std::move(s));
    }

    if (!j.contains("obs_noise")) throw ConfigError("config: missing key 'obs_noise'");
    c.obs_noise = param(j.at("obs_noise"), "obs_noise");

    if (j.contains("priors")) {
        if (!j.at("priors").is_object()) throw ConfigError("priors: expected an object");
        for (auto it = j.at("priors").begin(); it != j.at("priors").end(); ++it)
            c.priors[it.key()] = parse_prior(it.value(), "priors." + it.key());
    }

    if (j.contains("inference")) {
        const json& s = j.at("inference");
        check_keys(s, "inference", {"mode", "n_samples", "warmup", "adapt_interval", "initial_scale", "target_scale",
                                    "n_state_draws", "max_restarts", "seed"});
        auto& inf = c.inference;
        inf.mode = get<std::string>(s, "mode", "inference", "fixed");
        if (inf.mode != "fixed" && inf.mode != "mle" && inf.mode != "mcmc")
            throw ConfigError("inference.mode: expected fixed, mle or mcmc, got '" + inf.mode + "'");
        inf.n_samples = get<int>(s, "n_samples", "inference", inf.n_samples);
        inf.warmup = get<int>(s, "warmup", "inference", inf.warmup);
        inf.adapt_interval = get<int>(s, "adapt_interval", "inference", inf.adapt_interval);
        inf.initial_scale = get<double>(s, "initial_scale", "inference", inf.initial_scale);
        inf.target_scale = get<double>(s, "target_scale", "inference", inf.target_scale);
        inf.n_state_draws = get<int>(s, "n_state_draws", "inference", inf.n_state_draws);
        inf.max_restarts = get<int>(s, "max_restarts", "inference", inf.max_restarts);
        inf.seed = seed_of(s, "inference");
        if (inf.n_samples < 1) throw ConfigError("inference.n_samples: must be at least 1");
        if (inf.n_state_draws < 1) throw ConfigError("inference.n_state_draws: must be at least 1");
        if (inf.warmup < 0) throw ConfigError("inference.warmup: must be nonnegative");
    }

    if (j.contains("output")) {
        const json& o = j.at("output");
        check_keys(o, "output", {"directory", "samples_per_year", "max_lag"});
        c.output.directory = get<std::string>(o, "directory", "output", "");
        if (o.contains("samples_per_year")) c.output.samples_per_year = get<double>(o, "samples_per_year", "output", 1.0);
        c.output.max_lag = get<int>(o, "max_lag", "output", 0);
    }

    if (j.contains("kappa")) {
        c.kappa = get<double>(j, "kappa", "config", 0.0);
        if (!(*c.kappa > 0.0)) throw ConfigError("kappa: must be positive");
    }
    c.likelihood_burn_in = get<bool>(j, "likelihood_burn_in", "config", false);
    c.joseph = get<bool>(j, "joseph", "config", false);

    if (j.contains("simulate")) {
        const json& s = j.at("simulate");
        check_keys(s, "simulate", {"n", "seed", "time_start", "time_step", "file", "covariates", "missing_fraction",
                               "initial_state"});
        auto& sim = c.simulate;
        sim.present = true;
        sim.n = get<long>(s, "n", "simulate", 0);
        sim.seed = seed_of(s, "simulate");
        sim.time_start = get<double>(s, "time_start", "simulate", 1.0);
        sim.time_step = get<double>(s, "time_step", "simulate", 1.0);
        sim.file = get<std::string>(s, "file", "simulate", c.data.path.empty() ? "simulated.csv" : c.data.path);
        sim.covariates = get<std::string>(s, "covariates", "simulate", c.data.path);
        for (auto* p : {&sim.file, &sim.covariates})
            if (!p->empty() && std::filesystem::path(*p).is_relative() && !c.base_dir.empty())
                *p = (c.base_dir / *p).string();
        sim.missing_fraction = get<double>(s, "missing_fraction", "simulate", 0.0);
        if (sim.missing_fraction < 0.0 || sim.missing_fraction >= 1.0)
            throw ConfigError("simulate.missing_fraction: must be in [0, 1)");
        if (s.contains("initial_state")) {
            for (auto it = s.at("initial_state").begin(); it != s.at("initial_state").end(); ++it)
                sim.initial_state[it.key()] =
                    get<std::vector<double>>(s.at("initial_state"), it.key(), "simulate.initial_state", {});
        }
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    RunConfig cfg = parse_config(j, std::filesystem::absolute(path).parent_path());
    cfg.name = std::filesystem::path(path).stem().string();
    return cfg;
}

/// Robust noise scale of the first value column: 1.4826 * MAD of first
/// differences / sqrt(2), falling back to the MAD of the values, then 1.
inline double robust_scale(const TimeSeries& data) {
    auto mad = [](std::vector<double> v) {
        if (v.size() < 2) return 0.0;
        auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
        std::nth_element(v.begin(), mid, v.end());
        const double med = *mid;
        for (double& x : v) x = std::abs(x - med);
        std::nth_element(v.begin(), mid, v.end());
        return 1.4826 * *mid;
    };
    std::vector<double> diffs, vals;
    for (Eigen::Index t = 0; t < data.size(); ++t) {
        if (data.missing(t, 0)) continue;
        vals.push_back(data.values()(t, 0));
        if (t > 0 && !data.missing(t - 1, 0)) diffs.push_back(data.values()(t, 0) - data.values()(t - 1, 0));
    }
    double s = mad(diffs) / std::sqrt(2.0);
    if (!(s > 0.0)) s = mad(vals);
    if (!(s > 0.0) || !std::isfinite(s)) s = 1.0;
    return s;
}

/// The model, starting θ and priors described by a config.
struct BuiltModel {
    StateSpaceModel model;
    ParameterVector theta;
    Priors priors;
};

/// Builds the model. With `require_values` every parameter must carry an
/// explicit value (simulation truth); otherwise estimated parameters
/// without a value start from defaults derived from `data_scale`.
inline BuiltModel build_model(const RunConfig& cfg, const std::optional<CovariateMatrix>& covariates,
                              double data_scale, Eigen::Index k, bool require_values,
                              double kappa_default = 1e7) {
    ParameterVector theta;
    Priors priors;
    auto add = [&](const std::string& name, const ParamSpec& p, Domain domain) {
        double v;
        if (p.value) {
            v = *p.value;
        } else if (require_values) {
            throw ConfigError("parameter '" + name + "' needs a value");
        } else {
            v = domain == Domain::nonnegative ? 0.1 * data_scale : 0.0;
        }
        if (!ParameterVector::in_domain(domain, v))
            throw ConfigError("parameter '" + name + "' = " + std::to_string(v) + " is outside its domain");
        theta.add(name, v, domain, !p.estimate);
        if (p.estimate) {
            if (auto it = cfg.priors.find(name); it != cfg.priors.end())
                priors[name] = it->second;
            else
                priors[name] = domain == Domain::nonnegative ? Prior::half_normal(5.0 * data_scale)
                                                             : Prior::uniform(-1.0, 1.0);
        } else if (auto it = cfg.priors.find(name); it != cfg.priors.end()) {
            priors[name] = it->second;
        }
        return name;
    };

    std::vector<ComponentBlock> blocks;
    for (const auto& s : cfg.model) {
        const std::string pre = s.name + ".";
        if (s.kind == "level_trend") {
            auto lv = add(pre + "sigma_level", s.params.at("sigma_level"), Domain::nonnegative);
            auto tr = add(pre + "sigma_trend", s.params.at("sigma_trend"), Domain::nonnegative);
            blocks.push_back(local_level_trend(s.name, lv, tr));
        } else if (s.kind == "level") {
            blocks.push_back(local_level(s.name, add(pre + "sigma_level", s.params.at("sigma_level"), Domain::nonnegative)));
        } else if (s.kind == "seasonal") {
            auto sd = add(pre + "sigma_seas", s.params.at("sigma_seas"), Domain::nonnegative);
            try {
                blocks.push_back(seasonal_harmonics(s.name, s.period, s.harmonics, sd));
            } catch (const DomainError& e) {
                throw ConfigError("component '" + s.name + "': " + e.what());
            }
        } else if (s.kind == "ar") {
            std::vector<std::string> coeffs;
            const Domain d = s.order == 1 ? Domain::unit_interval : Domain::real;
            for (std::size_t r = 0; r < s.rho.size(); ++r)
                coeffs.push_back(add(pre + "rho" + std::to_string(r + 1), s.rho[r], d));
            blocks.push_back(ar_block(s.name, coeffs, add(pre + "sigma_ar", s.params.at("sigma_ar"), Domain::nonnegative)));
        } else if (s.kind == "regression") {
            if (!covariates) throw ConfigError("component '" + s.name + "': regression needs covariate columns");
            std::vector<std::string> slots;
            std::vector<Eigen::Index> cols;
            for (std::size_t r = 0; r < s.columns.size(); ++r) {
                slots.push_back(add(pre + "sigma_" + s.columns[r], s.sigma_proxy[r], Domain::nonnegative));
                for (std::size_t c = 0; c < covariates->column_names.size(); ++c)
                    if (covariates->column_names[c] == s.columns[r]) cols.push_back(static_cast<Eigen::Index>(c));
            }
            Eigen::MatrixXd Z(covariates->size(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t c = 0; c < cols.size(); ++c) Z.col(static_cast<Eigen::Index>(c)) = covariates->values.col(cols[c]);
            blocks.push_back(regression_block(s.name, CovariateMatrix(std::move(Z), s.columns), slots));
        }
    }
    if (k != 1)
        for (auto& b : blocks) {
            // Univariate builders applied to each observation component alike.
            auto h = b.h_fn;
            b.h_fn = [h, k](Eigen::Index t, const ParameterVector& th) {
                return Eigen::MatrixXd(h(t, th).replicate(k, 1));
            };
            b.obs_dim = k;
        }
    auto obs = add("obs.sigma", cfg.obs_noise, Domain::nonnegative);
    for (const auto& [name, prior] : cfg.priors)
        if (!theta.contains(name)) throw ConfigError("priors: unknown parameter '" + name + "'");
    StateSpaceModel model = compose(std::move(blocks), ObservationNoise::isotropic(obs), cfg.kappa.value_or(kappa_default));
    return {std::move(model), std::move(theta), std::move(priors)};
}

/// Covariate column names referenced by regression components.
inline std::vector<std::string> covariate_columns(const RunConfig& cfg) {
    std::vector<std::string> cols;
    for (const auto& s : cfg.model)
        if (s.kind == "regression")
            for (const auto& c : s.columns)
                if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    return cols;
}

}  // namespace dlm::io
