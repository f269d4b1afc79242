#pragma once

#include "calib/diagnostics.h"
#include "calib/priors.h"
#include "calib/sampler.h"
#include "calib/targets.h"

#include <filesystem>
#include <string>
#include <vector>

namespace calib
{

/// A fully resolved calibration: every referenced model, prior and target already loaded.
struct CalibrationRunSpec {
    std::string name; ///< prior-set id, used for sweep rows and log lines
    Model model;
    JointPrior prior;
    TargetSet targets;
    ProposalSpec proposal;
    SamplerOptions sampler;
    std::vector<std::uint64_t> seeds; ///< one chain per seed
    DiagnosticThresholds thresholds;
    std::filesystem::path output_dir; ///< empty: nothing is persisted
    std::string config_json;          ///< normalised configuration, persisted as run_config.json
};

struct CalibrationResult {
    ChainSet chains;
    NonIdentifiabilityReport report;
};

/// Dispersed prior inits, one chain per seed, then detect_nonidentifiability. When output_dir is set,
/// chains, sidecars, report, GOF trace and run_config.json are written into a staging directory
/// that replaces output_dir only once complete. A `<output_dir>.lock` file guards against concurrent
/// runs on the same directory.
CalibrationResult run_calibration(const CalibrationRunSpec& spec);

/// Replacement priors for some parameters; the others keep the base prior.
struct PriorSet {
    std::string id;
    std::vector<std::string> parameters;
    std::vector<PriorSpec> priors;
};

struct SensitivitySweepSpec {
    CalibrationRunSpec base;
    std::vector<PriorSet> prior_sets;   ///< at least 2, unique ids
    std::vector<std::string> summarise; ///< parameters reported per prior set; empty means all
};

struct SensitivityRow {
    std::string prior_set;
    std::string parameter;
    double posterior_mean = 0.0;
    double posterior_sd   = 0.0;
    double rhat           = 0.0;
    double rhat_upper_ci  = 0.0;
    double gof_median     = 0.0;
    double gof_min        = 0.0;
    std::string error; ///< non-empty when the sub-run failed; numbers are then NaN
};

/// base with the prior set applied: priors replaced and config_json patched, output into
/// base.output_dir / id. Throws ConfigError for parameters the model does not have.
CalibrationRunSpec apply_prior_set(const CalibrationRunSpec& base, const PriorSet& set);

/// One calibration per prior set with the base seeds and proposal, so rows do not depend on the
/// order of the sets. A failing sub-run yields rows carrying its error. The summary table is
/// persisted as sensitivity_summary.csv in base.output_dir when set.
std::vector<SensitivityRow> run_sensitivity(const SensitivitySweepSpec& spec);

void write_sensitivity_rows(std::ostream& out, const std::vector<SensitivityRow>& rows);

} // namespace calib
