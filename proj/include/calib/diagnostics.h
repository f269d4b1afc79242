#pragma once

#include "calib/priors.h"
#include "calib/sampler.h"
#include "calib/targets.h"

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace calib
{

/// Potential scale reduction factor and its upper confidence bound (97.5% quantile).
struct GelmanRubinResult {
    double point_estimate = 0.0;
    double upper_ci       = 0.0;
};

/// Gelman & Rubin (1992) two-variance diagnostic with the degrees-of-freedom correction.
/// Needs >= 2 chains of equal length >= 10.
GelmanRubinResult gelman_rubin(const std::vector<std::vector<double>>& chains);
GelmanRubinResult gelman_rubin(const ChainSet& chains, std::size_t parameter);

/// Normalised sample autocorrelation at lags 0..max_lag.
std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag);
std::vector<double> autocorrelation(const Chain& chain, std::size_t parameter, std::size_t max_lag);

/// Symmetric Pearson correlation matrix. A constant column is marked degenerate and its
/// off-diagonal entries are NaN; the diagonal is always exactly 1.
struct CorrelationMatrix {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<bool> degenerate;

    std::size_t size() const
    {
        return names.size();
    }
    double operator()(std::size_t i, std::size_t j) const
    {
        return values[i * names.size() + j];
    }
};

CorrelationMatrix correlation_matrix(const std::vector<std::vector<double>>& columns, std::vector<std::string> names);
CorrelationMatrix cross_correlation(const Chain& chain);
/// Pooled over every chain, optionally with derived quantities appended as extra columns.
CorrelationMatrix cross_correlation(const ChainSet& chains, const std::vector<DerivedQuantity>& derived = {});

/// Nuisance coordinates held at the given values (the profiled coordinate is overwritten).
struct FixedNuisance {
    ParameterVector values;
};

/// Best of `draws` random nuisance vectors drawn from `sampler` (prior draws, init bounds for improper
/// factors) per grid point. Each grid point uses its own stream derived from (seed, grid index).
struct BestOfDraws {
    std::size_t draws = 200;
    JointPrior sampler;
    std::uint64_t seed = 1;
};

using NuisanceStrategy = std::variant<FixedNuisance, BestOfDraws>;

struct ProfilePoint {
    double value    = 0.0;
    double best_gof = kInf;
    ParameterVector best_theta;
};

std::vector<ProfilePoint> profile_likelihood(const Model& model, const TargetSet& targets, std::size_t parameter,
                                             std::span<const double> grid, const NuisanceStrategy& nuisance);

/// max - min of best_gof over the curve; a flat profile signals non-identifiability along the axis.
double profile_range(const std::vector<ProfilePoint>& profile);

struct DiagnosticThresholds {
    double rhat        = 1.1; ///< point estimate above this fails convergence
    double correlation = 0.9; ///< |r| above this flags a ridge
    double flat_ratio  = 0.9; ///< posterior sd / prior sd above this flags "data uninformative"
};

struct CorrelatedPair {
    std::string first;
    std::string second;
    double correlation = 0.0;
};

struct ParameterVerdict {
    std::string name;
    GelmanRubinResult rhat;
    double posterior_mean = 0.0;
    double posterior_sd   = 0.0;
    std::optional<double> prior_sd;
    std::optional<double> sd_ratio;
    bool rhat_flag        = false;
    bool flat_flag        = false;
    bool correlation_flag = false;

    bool flagged() const
    {
        return rhat_flag || flat_flag || correlation_flag;
    }
};

struct NonIdentifiabilityReport {
    DiagnosticThresholds thresholds;
    std::vector<ParameterVerdict> parameters;
    std::vector<CorrelatedPair> correlated_pairs;
    bool converged  = true; ///< every R-hat point estimate within threshold
    bool identified = true; ///< no flag of any kind

    std::vector<std::string> flagged_parameters() const;
    std::vector<std::string> rhat_flagged_parameters() const;
};

/// Aggregates R-hat, pooled cross-correlation (including derived quantities) and prior-vs-posterior
/// spread. `prior` may be null, in which case no flat-posterior flags are raised.
NonIdentifiabilityReport detect_nonidentifiability(const ChainSet& chains, const JointPrior* prior,
                                                   const DiagnosticThresholds& thresholds = {},
                                                   const std::vector<DerivedQuantity>& derived = {});

std::string report_to_json(const NonIdentifiabilityReport& report);

struct DensityBin {
    double center           = 0.0;
    double width            = 0.0;
    double prior_height     = 0.0; ///< NaN when the prior has no normalisable density on the grid
    double posterior_height = 0.0;
};

struct PriorPosteriorSummary {
    std::optional<double> prior_mean;
    std::optional<double> prior_sd;
    double posterior_mean = 0.0;
    double posterior_sd   = 0.0;
    std::optional<double> overlap; ///< sum over bins of min(prior mass, posterior mass), in [0,1]
    std::vector<DensityBin> bins;
};

/// Needs at least 100 posterior samples.
PriorPosteriorSummary prior_posterior_summary(const PriorSpec& prior, std::span<const double> samples,
                                              std::size_t bin_count = 50);

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator).
double standard_deviation(std::span<const double> x);

} // namespace calib
