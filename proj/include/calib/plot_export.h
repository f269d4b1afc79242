#pragma once

#include "calib/priors.h"
#include "calib/sampler.h"

#include <filesystem>
#include <string>
#include <vector>

namespace calib
{

enum class ExportKind
{
    Trace,
    Density,
    PriorPosterior,
};

/// "trace", "density" or "prior-posterior"; throws ConfigError otherwise.
ExportKind export_kind_from_string(const std::string& text);

/// trace_<parameter>.csv: `iteration,chain_1,...,chain_K`, rows aligned by recorded index.
std::vector<std::filesystem::path> export_trace(const ChainSet& chains, const std::filesystem::path& dir);

/// density_<parameter>.csv: `bin_center,bin_width,chain_1,...,chain_K` on one grid spanning the pooled
/// sample; each chain's heights integrate to 1.
std::vector<std::filesystem::path> export_density(const ChainSet& chains, const std::filesystem::path& dir,
                                                  std::size_t bins = 50);

/// prior_posterior_<parameter>.csv: `bin_center,bin_width,prior_height,posterior_height` from the
/// pooled chains and prior_posterior_summary. Prior heights are empty for unnormalisable priors.
std::vector<std::filesystem::path> export_prior_posterior(const ChainSet& chains, const JointPrior& prior,
                                                          const std::filesystem::path& dir, std::size_t bins = 50);

} // namespace calib
