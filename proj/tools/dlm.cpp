// dlm: fit, simulate and diagnose dynamic linear models from a JSON config.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dlm/dlm.hpp"
#include "dlm/io/pipeline.hpp"

namespace {

int report(const char* kind, const std::exception& e, int code) {
    std::cerr << "dlm: " << kind << ": " << e.what() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic linear model fitting and trend analysis"};
    app.set_version_flag("--version", std::string(dlm::version_string));
    app.require_subcommand(1);

    std::string config, out, run_dir;
    std::optional<std::uint64_t> seed;
    int threads = 1, max_lag = 0;

    auto* fit = app.add_subcommand("fit", "Estimate parameters and states, write run artifacts");
    auto* sim = app.add_subcommand("simulate", "Simulate a data set from the configured model");
    auto* diag = app.add_subcommand("diagnose", "Recompute residual diagnostics for a finished run");
    for (auto* sub : {fit, sim}) {
        sub->add_option("--config", config, "JSON run configuration")->required();
        sub->add_option("--out", out, "Output directory");
        sub->add_option("--seed", seed, "Random seed (overrides the config)");
    }
    fit->add_option("--threads", threads, "Worker threads for state draws")->check(CLI::PositiveNumber);
    diag->add_option("run", run_dir, "Directory written by 'dlm fit'")->required();
    diag->add_option("--max-lag", max_lag, "Autocorrelation lags (default: as in the run)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : dlm::io::exit_config;
    }

    try {
        if (diag->parsed()) {
            dlm::io::run_diagnose(run_dir, max_lag);
            return dlm::io::exit_ok;
        }
        dlm::io::RunOptions opts;
        if (!out.empty()) opts.out_dir = out;
        opts.seed = seed;
        opts.threads = threads;
        const dlm::io::RunConfig cfg = dlm::io::load_config(config);
        if (sim->parsed()) {
            dlm::io::run_simulate(cfg, opts);
            return dlm::io::exit_ok;
        }
        const auto result = dlm::io::run_fit(cfg, opts);
        if (result.exit_code == dlm::io::exit_not_converged)
            std::cerr << "dlm: warning: maximum likelihood did not converge; results written to "
                      << result.directory.string() << '\n';
        return result.exit_code;
    } catch (const dlm::ConfigError& e) {
        return report("config error", e, dlm::io::exit_config);
    } catch (const dlm::DimensionError& e) {
        return report("config error", e, dlm::io::exit_config);
    } catch (const dlm::DomainError& e) {
        return report("config error", e, dlm::io::exit_config);
    } catch (const dlm::DataError& e) {
        return report("data error", e, dlm::io::exit_data);
    } catch (const dlm::NumericalError& e) {
        return report("numerical error", e, dlm::io::exit_numerical);
    } catch (const std::exception& e) {
        return report("error", e, 1);
    }
}
