#pragma once

#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace calib
{

using Rng = std::mt19937_64;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Flat, unnormalised density on [lower, upper]; upper may be infinite.
struct ImproperUniform {
    double lower = -kInf;
    double upper = kInf;
};

struct Uniform {
    double a = 0.0;
    double b = 1.0;
};

/// sigma is a standard deviation.
struct Normal {
    double mu    = 0.0;
    double sigma = 1.0;
};

/// Shape/rate parameterisation: density proportional to x^(shape-1) exp(-rate x).
struct Gamma {
    double shape = 1.0;
    double rate  = 1.0;
};

using PriorDistribution = std::variant<ImproperUniform, Uniform, Normal, Gamma>;

/// A validated one-dimensional prior. Invalid parameters are rejected here, never at evaluation.
class PriorSpec
{
public:
    PriorSpec(PriorDistribution distribution, std::optional<double> init_lower = std::nullopt,
              std::optional<double> init_upper = std::nullopt);

    const PriorDistribution& distribution() const
    {
        return m_distribution;
    }
    std::optional<double> init_lower() const
    {
        return m_init_lower;
    }
    std::optional<double> init_upper() const
    {
        return m_init_upper;
    }
    bool is_proper() const
    {
        return !std::holds_alternative<ImproperUniform>(m_distribution);
    }
    /// "improper_uniform", "uniform", "normal" or "gamma".
    std::string kind_name() const;
    std::string describe() const;

private:
    PriorDistribution m_distribution;
    std::optional<double> m_init_lower;
    std::optional<double> m_init_upper;
};

double log_prior_density(const PriorSpec& spec, double x);

/// Draw used for chain initialisation and sweeps. ImproperUniform draws uniformly within its
/// initialisation bounds and throws ConfigError when they are missing or not finite.
double sample_prior(const PriorSpec& spec, Rng& rng);

/// Moments and CDF of the proper distribution. An ImproperUniform is treated as the uniform
/// distribution on its bounds when both are finite; otherwise these return nullopt.
std::optional<double> prior_mean(const PriorSpec& spec);
std::optional<double> prior_sd(const PriorSpec& spec);
std::optional<double> prior_cdf(const PriorSpec& spec, double x);

/// Lower and upper end of the support.
std::pair<double, double> prior_support(const PriorSpec& spec);

/// Product of independent one-dimensional priors, one per calibration parameter.
class JointPrior
{
public:
    JointPrior() = default;
    JointPrior(std::vector<std::string> names, std::vector<PriorSpec> specs);

    std::size_t size() const
    {
        return m_specs.size();
    }
    const PriorSpec& operator[](std::size_t i) const
    {
        return m_specs[i];
    }
    const std::vector<PriorSpec>& specs() const
    {
        return m_specs;
    }
    const std::vector<std::string>& names() const
    {
        return m_names;
    }

private:
    std::vector<std::string> m_names;
    std::vector<PriorSpec> m_specs;
};

double joint_log_prior(const JointPrior& prior, std::span<const double> theta);

/// One draw per coordinate, in order.
std::vector<double> sample_joint_prior(const JointPrior& prior, Rng& rng);

} // namespace calib
