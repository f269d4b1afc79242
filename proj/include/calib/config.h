#pragma once

#include "calib/workflow.h"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace calib
{

/// Environment variable that, when set, replaces the directory relative output paths resolve against.
inline constexpr const char* kOutputRootVariable = "CALIB_OUTPUT_ROOT";

/// A validated top-level configuration file. Schema and examples are documented in README.md.
struct RunConfiguration {
    std::filesystem::path source;
    CalibrationRunSpec run;
    std::optional<SensitivitySweepSpec> sweep;
};

/// Parses and validates everything (including loading the targets and the model definition and
/// checking that their dimensions agree) before returning. Throws ConfigError naming the first
/// offending field.
RunConfiguration load_run_configuration(const std::filesystem::path& path);
RunConfiguration parse_run_configuration(std::string_view json_text, const std::filesystem::path& base_dir,
                                         const std::string& source_name = "<string>");

/// Priors for `parameter_names` from the "priors" array (and optional "default_prior") of a
/// configuration or run_config.json text.
JointPrior priors_from_config_json(std::string_view json_text, const std::vector<std::string>& parameter_names);

/// One "priors" array entry, in the schema load_run_configuration accepts.
std::string prior_json_text(const std::string& parameter, const PriorSpec& spec);

} // namespace calib
