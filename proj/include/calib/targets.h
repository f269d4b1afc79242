#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace calib
{

/// One Gaussian calibration target N(mean, sd) scored against a single model output.
struct Target {
    std::string name;
    double mean = 0.0;
    double sd   = 1.0;
    std::string units;
};

/// Ordered, non-empty collection of targets with unique names and positive sds.
class TargetSet
{
public:
    TargetSet() = default;
    explicit TargetSet(std::vector<Target> targets);

    std::size_t size() const
    {
        return m_targets.size();
    }
    bool empty() const
    {
        return m_targets.empty();
    }
    const Target& operator[](std::size_t k) const
    {
        return m_targets[k];
    }
    const std::vector<Target>& targets() const
    {
        return m_targets;
    }
    auto begin() const
    {
        return m_targets.begin();
    }
    auto end() const
    {
        return m_targets.end();
    }

private:
    std::vector<Target> m_targets;
};

/// Model predictions, aligned index-for-index with a TargetSet.
using ModelOutputs = std::vector<double>;

/// Sum of squared z-scores, i.e. -2 * sum_k ln[f_k(x_k) / f_k(d_k)].
double gof_total(std::span<const double> outputs, const TargetSet& targets);

/// Mode-normalised Gaussian log-likelihood, sum_k [ln f_k(x_k) - ln f_k(d_k)]. Never positive.
double log_likelihood(std::span<const double> outputs, const TargetSet& targets);

/// Upper-tail probability P(chi^2_dof > gof).
double chi_square_p_value(double gof, int dof);

/// Reads the `name,mean,sd,units` table (one header row; quoted names may contain commas).
TargetSet load_target_set(std::istream& in, const std::string& source_name = "<stream>");
TargetSet load_target_set(const std::filesystem::path& path);

void write_target_set(std::ostream& out, const TargetSet& targets);

} // namespace calib
