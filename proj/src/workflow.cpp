#include "calib/workflow.h"
#include "calib/chain_io.h"
#include "calib/config.h"
#include "calib/csv.h"
#include "calib/error.h"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace calib
{

namespace
{

/// Exclusive `<dir>.lock` marker held for the lifetime of the object.
class DirectoryLock
{
public:
    explicit DirectoryLock(const std::filesystem::path& dir)
        : m_path(dir.string() + ".lock")
    {
        const int fd = ::open(m_path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw IoError("output directory '" + dir.string() + "' is locked by another run (remove '" +
                          m_path.string() + "' if it is stale)");
        }
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
        ::close(fd);
    }
    ~DirectoryLock()
    {
        std::error_code ec;
        std::filesystem::remove(m_path, ec);
    }
    DirectoryLock(const DirectoryLock&)            = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::filesystem::path m_path;
};

void persist(const std::filesystem::path& dir, const CalibrationRunSpec& spec, const CalibrationResult& result)
{
    namespace fs = std::filesystem;
    auto staging = dir;
    staging += ".staging";
    auto previous = dir;
    previous += ".previous";
    std::error_code ec;
    fs::remove_all(staging, ec);
    try {
        fs::create_directories(staging);
        write_chain_set(staging, result.chains);
        write_file_atomic(staging / "diagnostics_report.json", report_to_json(result.report) + "\n");
        std::ostringstream trace;
        write_gof_trace(trace, result.chains);
        write_file_atomic(staging / "gof_trace.csv", trace.str());
        write_file_atomic(staging / "run_config.json", spec.config_json);

        fs::remove_all(previous, ec);
        if (fs::exists(dir)) {
            fs::rename(dir, previous);
        }
        fs::rename(staging, dir);
        fs::remove_all(previous, ec);
    }
    catch (const fs::filesystem_error& e) {
        fs::remove_all(staging, ec);
        throw IoError("persisting run to '" + dir.string() + "' failed: " + e.what());
    }
    catch (const Error&) {
        fs::remove_all(staging, ec);
        throw;
    }
}

double median(std::vector<double> x)
{
    if (x.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const auto mid = x.begin() + static_cast<std::ptrdiff_t>(x.size() / 2);
    std::nth_element(x.begin(), mid, x.end());
    if (x.size() % 2 == 1) {
        return *mid;
    }
    return 0.5 * (*mid + *std::max_element(x.begin(), mid));
}

} // namespace

CalibrationResult run_calibration(const CalibrationRunSpec& spec)
{
    const std::size_t dim = spec.model.parameters.size();
    if (spec.prior.size() != dim) {
        throw ConfigError("run '" + spec.name + "': " + std::to_string(spec.prior.size()) + " priors for " +
                          std::to_string(dim) + " parameters");
    }
    if (!spec.model.output_names.empty() && spec.targets.size() != spec.model.output_names.size()) {
        throw ConfigError("run '" + spec.name + "': targets do not match the model outputs");
    }
    if (spec.seeds.empty()) {
        throw ConfigError("run '" + spec.name + "': no seeds");
    }
    spec.proposal.validate(dim);
    spec.sampler.validate();

    std::optional<DirectoryLock> lock;
    if (!spec.output_dir.empty()) {
        std::filesystem::create_directories(spec.output_dir.parent_path());
        lock.emplace(spec.output_dir);
    }

    const auto names    = spec.model.parameters.names();
    const auto density  = make_log_posterior(spec.model, spec.prior, spec.targets);
    const auto inits    = dispersed_inits(density, spec.prior, spec.seeds);
    spdlog::info("run '{}': {} chains of {} iterations on model '{}'", spec.name, spec.seeds.size(),
                 spec.sampler.iterations, spec.model.id);

    CalibrationResult result;
    result.chains = run_chains(density, names, spec.proposal, spec.sampler, inits, spec.seeds, spec.model.id);
    if (result.chains.size() >= 2) {
        result.report = detect_nonidentifiability(result.chains, &spec.prior, spec.thresholds, spec.model.derived);
    }
    if (!spec.output_dir.empty()) {
        persist(spec.output_dir, spec, result);
    }
    return result;
}

CalibrationRunSpec apply_prior_set(const CalibrationRunSpec& base, const PriorSet& set)
{
    if (set.parameters.size() != set.priors.size()) {
        throw ConfigError("prior set '" + set.id + "': parameters and priors differ in length");
    }
    CalibrationRunSpec run = base;
    run.name               = set.id;
    const auto names       = base.model.parameters.names();
    std::vector<PriorSpec> specs(base.prior.specs());
    for (std::size_t k = 0; k < set.parameters.size(); ++k) {
        specs[base.model.parameters.index_of(set.parameters[k])] = set.priors[k];
    }
    run.prior = JointPrior(names, std::move(specs));
    if (!base.output_dir.empty()) {
        run.output_dir = base.output_dir / set.id;
    }
    if (!base.config_json.empty()) {
        auto doc    = nlohmann::json::parse(base.config_json);
        doc["name"] = set.id;
        doc.erase("sensitivity");
        if (!run.output_dir.empty()) {
            doc["output"] = run.output_dir.string();
        }
        doc["priors"] = nlohmann::json::array();
        for (std::size_t i = 0; i < names.size(); ++i) {
            doc["priors"].push_back(nlohmann::json::parse(prior_json_text(names[i], run.prior[i])));
        }
        run.config_json = doc.dump(2) + "\n";
    }
    return run;
}

std::vector<SensitivityRow> run_sensitivity(const SensitivitySweepSpec& spec)
{
    if (spec.prior_sets.size() < 2) {
        throw ConfigError("a sensitivity sweep needs at least 2 prior sets, got " +
                          std::to_string(spec.prior_sets.size()));
    }
    const auto all_names = spec.base.model.parameters.names();
    const auto& summarise = spec.summarise.empty() ? all_names : spec.summarise;
    for (const auto& name : summarise) {
        spec.base.model.parameters.index_of(name);
    }
    std::vector<CalibrationRunSpec> runs;
    for (const auto& set : spec.prior_sets) {
        runs.push_back(apply_prior_set(spec.base, set));
    }

    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<SensitivityRow> rows;
    for (const auto& run : runs) {
        try {
            const auto result = run_calibration(run);
            std::vector<double> gofs;
            for (const auto& chain : result.chains.chains) {
                std::copy_if(chain.gof.begin(), chain.gof.end(), std::back_inserter(gofs),
                             [](double g) { return std::isfinite(g); });
            }
            const double gof_min = gofs.empty() ? nan : *std::min_element(gofs.begin(), gofs.end());
            const double gof_med = median(gofs);
            for (const auto& name : summarise) {
                const std::size_t i = run.model.parameters.index_of(name);
                const auto& v       = result.report.parameters.at(i);
                rows.push_back({run.name, name, v.posterior_mean, v.posterior_sd, v.rhat.point_estimate,
                                v.rhat.upper_ci, gof_med, gof_min, ""});
            }
        }
        catch (const Error& e) {
            spdlog::error("prior set '{}' failed: {}", run.name, e.what());
            for (const auto& name : summarise) {
                rows.push_back({run.name, name, nan, nan, nan, nan, nan, nan, e.what()});
            }
        }
    }
    if (!spec.base.output_dir.empty()) {
        std::ostringstream table;
        write_sensitivity_rows(table, rows);
        std::filesystem::create_directories(spec.base.output_dir);
        write_file_atomic(spec.base.output_dir / "sensitivity_summary.csv", table.str());
    }
    return rows;
}

void write_sensitivity_rows(std::ostream& out, const std::vector<SensitivityRow>& rows)
{
    out << "prior_set,parameter,posterior_mean,posterior_sd,rhat,rhat_upper_ci,gof_median,gof_min,error\n";
    for (const auto& r : rows) {
        out << csv::quote(r.prior_set) << ',' << csv::quote(r.parameter) << ',' << csv::format_double(r.posterior_mean)
            << ',' << csv::format_double(r.posterior_sd) << ',' << csv::format_double(r.rhat) << ','
            << csv::format_double(r.rhat_upper_ci) << ',' << csv::format_double(r.gof_median) << ','
            << csv::format_double(r.gof_min) << ',' << csv::quote(r.error) << '\n';
    }
}

} // namespace calib
