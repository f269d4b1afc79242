// calib: command-line front end for calibration runs, stored-chain diagnostics, prior sweeps and
// plot-data export. Exit codes: 0 success, 1 runtime failure, 2 configuration/input error,
// 3 convergence gate failed.

#include "calib/chain_io.h"
#include "calib/config.h"
#include "calib/error.h"
#include "calib/models.h"
#include "calib/plot_export.h"
#include "calib/workflow.h"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace
{

enum ExitCode : int
{
    kOk          = 0,
    kRuntime     = 1,
    kConfig      = 2,
    kNotConverged = 3,
};

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw calib::IoError("cannot read '" + path.string() + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void print_rhat_table(const calib::NonIdentifiabilityReport& report)
{
    std::printf("%-24s %10s %10s %12s %12s  %s\n", "parameter", "rhat", "upper_ci", "post_mean", "post_sd", "flags");
    for (const auto& v : report.parameters) {
        std::string flags;
        flags += v.rhat_flag ? "rhat " : "";
        flags += v.correlation_flag ? "correlation " : "";
        flags += v.flat_flag ? "flat " : "";
        std::printf("%-24s %10.4f %10.4f %12.6g %12.6g  %s\n", v.name.c_str(), v.rhat.point_estimate,
                    v.rhat.upper_ci, v.posterior_mean, v.posterior_sd, flags.empty() ? "-" : flags.c_str());
    }
    for (const auto& p : report.correlated_pairs) {
        std::printf("correlated: %s ~ %s  r = %.4f\n", p.first.c_str(), p.second.c_str(), p.correlation);
    }
    std::printf("converged: %s  identified: %s\n", report.converged ? "yes" : "no",
                report.identified ? "yes" : "no");
}

int cmd_calibrate(const std::string& config_path)
{
    const auto config = calib::load_run_configuration(config_path);
    const auto result = calib::run_calibration(config.run);
    for (const auto& chain : result.chains.chains) {
        std::printf("chain %zu: acceptance rate %.4f, %zu recorded states, %zu failed evaluations\n",
                    chain.metadata.chain_id, chain.metadata.acceptance_rate, chain.size(),
                    chain.metadata.failed_evaluations);
    }
    print_rhat_table(result.report);
    std::printf("output: %s\n", config.run.output_dir.string().c_str());
    return kOk;
}

int cmd_diagnose(const std::filesystem::path& dir, const std::string& config_path)
{
    const auto chains = calib::read_chain_set(dir);
    if (chains.size() < 2) {
        throw calib::InsufficientChainsError("'" + dir.string() + "' holds " + std::to_string(chains.size()) +
                                             " chain file(s); diagnostics need at least 2");
    }
    const auto& names = chains.parameter_names();

    calib::DiagnosticThresholds thresholds;
    std::optional<calib::JointPrior> prior;
    const std::filesystem::path stored = config_path.empty() ? dir / "run_config.json" : std::filesystem::path(config_path);
    if (std::filesystem::exists(stored)) {
        const std::string text = read_text(stored);
        prior                  = calib::priors_from_config_json(text, names);
        const auto doc         = nlohmann::json::parse(text);
        if (doc.contains("diagnostics")) {
            const auto& d          = doc.at("diagnostics");
            thresholds.rhat        = d.value("rhat", thresholds.rhat);
            thresholds.correlation = d.value("correlation", thresholds.correlation);
            thresholds.flat_ratio  = d.value("flat_ratio", thresholds.flat_ratio);
        }
    }
    else if (!config_path.empty()) {
        throw calib::ConfigError("configuration '" + config_path + "' not found");
    }

    const auto derived = calib::derived_quantities_for(chains[0].metadata.model_id, names);
    calib::NonIdentifiabilityReport report;
    try {
        report = calib::detect_nonidentifiability(chains, prior ? &*prior : nullptr, thresholds, derived);
    }
    catch (const calib::DegenerateChainError& e) {
        std::fprintf(stderr, "convergence gate: %s\n", e.what());
        return kNotConverged;
    }
    calib::write_file_atomic(dir / "diagnostics_report.json", calib::report_to_json(report) + "\n");
    print_rhat_table(report);
    return report.converged ? kOk : kNotConverged;
}

int cmd_sensitivity(const std::string& config_path)
{
    const auto config = calib::load_run_configuration(config_path);
    if (!config.sweep) {
        throw calib::ConfigError(config_path + ": no sensitivity section");
    }
    const auto rows = calib::run_sensitivity(*config.sweep);
    calib::write_sensitivity_rows(std::cout, rows);
    const bool failed = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return !r.error.empty(); });
    return failed ? kRuntime : kOk;
}

int cmd_export(const std::filesystem::path& dir, const std::string& kind_text, std::filesystem::path out,
               std::size_t bins, const std::string& config_path)
{
    const auto kind   = calib::export_kind_from_string(kind_text);
    const auto chains = calib::read_chain_set(dir);
    if (out.empty()) {
        out = dir / "plots";
    }
    std::vector<std::filesystem::path> written;
    switch (kind) {
    case calib::ExportKind::Trace:
        written = calib::export_trace(chains, out);
        break;
    case calib::ExportKind::Density:
        written = calib::export_density(chains, out, bins);
        break;
    case calib::ExportKind::PriorPosterior: {
        const std::filesystem::path stored = config_path.empty() ? dir / "run_config.json" : std::filesystem::path(config_path);
        if (!std::filesystem::exists(stored)) {
            throw calib::ConfigError("prior-posterior export needs priors: '" + stored.string() + "' not found");
        }
        const auto prior = calib::priors_from_config_json(read_text(stored), chains.parameter_names());
        written          = calib::export_prior_posterior(chains, prior, out, bins);
        break;
    }
    }
    for (const auto& path : written) {
        std::printf("%s\n", path.string().c_str());
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bayesian calibration of simulation models by Metropolis-Hastings"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

    std::string config_path;
    auto* calibrate = app.add_subcommand("calibrate", "Run the chains of a configuration and persist them");
    calibrate->add_option("config", config_path, "Configuration file")->required();

    std::string chain_dir;
    std::string diagnose_config;
    auto* diagnose = app.add_subcommand("diagnose", "Convergence gate and identifiability report for stored chains");
    diagnose->add_option("chains", chain_dir, "Directory holding chain_<k>.csv files")->required();
    diagnose->add_option("--config", diagnose_config, "Priors/thresholds (defaults to the stored run_config.json)");

    auto* sensitivity = app.add_subcommand("sensitivity", "Run the prior sweep of a configuration");
    sensitivity->add_option("config", config_path, "Configuration file with a sensitivity section")->required();

    std::string kind;
    std::string out_dir;
    std::size_t bins = 50;
    std::string export_config;
    auto* exporter = app.add_subcommand("export", "Write CSV plot data for stored chains");
    exporter->add_option("chains", chain_dir, "Directory holding chain_<k>.csv files")->required();
    exporter->add_option("--kind", kind, "trace, density or prior-posterior")->required();
    exporter->add_option("--out", out_dir, "Destination directory (defaults to <chains>/plots)");
    exporter->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);
    exporter->add_option("--config", export_config, "Priors for prior-posterior (defaults to run_config.json)");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

    try {
        if (*calibrate) {
            return cmd_calibrate(config_path);
        }
        if (*diagnose) {
            return cmd_diagnose(chain_dir, diagnose_config);
        }
        if (*sensitivity) {
            return cmd_sensitivity(config_path);
        }
        return cmd_export(chain_dir, kind, out_dir, bins, export_config);
    }
    catch (const calib::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kConfig;
    }
    catch (const calib::ParseError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kConfig;
    }
    catch (const calib::InsufficientChainsError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kConfig;
    }
    catch (const calib::InsufficientDataError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kConfig;
    }
    catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kConfig;
    }
    catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
}
