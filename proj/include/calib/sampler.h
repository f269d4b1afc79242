#pragma once

#include "calib/priors.h"
#include "calib/targets.h"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace calib
{

/// A calibration parameter and the interval on which the model is defined.
struct Parameter {
    std::string name;
    double lower = -kInf;
    double upper = kInf;
};

/// Ordered, uniquely named parameters with support bounds. Dimension is fixed for a run.
class ParameterSpace
{
public:
    ParameterSpace() = default;
    explicit ParameterSpace(std::vector<Parameter> parameters);

    std::size_t size() const
    {
        return m_parameters.size();
    }
    const Parameter& operator[](std::size_t i) const
    {
        return m_parameters[i];
    }
    std::vector<std::string> names() const;
    /// Throws ConfigError for an unknown name.
    std::size_t index_of(const std::string& name) const;
    bool contains(std::span<const double> theta) const;

private:
    std::vector<Parameter> m_parameters;
};

/// Parameter values aligned index-for-index with a ParameterSpace.
using ParameterVector = std::vector<double>;

/// A scalar function of the parameters reported alongside them (e.g. beta = c * p).
struct DerivedQuantity {
    std::string name;
    std::function<double(std::span<const double>)> compute;
};

/// A calibratable simulator: parameters in, outputs aligned with a TargetSet out. Evaluation throws
/// a calib::Error for inputs where the model is undefined.
struct Model {
    std::string id;
    ParameterSpace parameters;
    std::function<ModelOutputs(std::span<const double>)> evaluate;
    std::vector<DerivedQuantity> derived;
    std::vector<std::string> output_names; ///< fixes the output dimension; empty when unknown
};

/// Unnormalised log posterior at a point, plus the GOF of the outputs that produced it
/// (NaN when the model was not run or no targets are involved).
struct PosteriorPoint {
    double log_posterior = -kInf;
    double gof           = std::numeric_limits<double>::quiet_NaN();
    bool model_failed    = false;
};

using LogDensity = std::function<PosteriorPoint(std::span<const double>)>;

/// joint_log_prior + log_likelihood. Returns -inf without running the model when theta is out of
/// bounds or the prior vanishes; a failing model evaluation is reported as -inf with model_failed.
PosteriorPoint log_posterior(const Model& model, const JointPrior& prior, const TargetSet& targets,
                             std::span<const double> theta);

/// Binds the arguments (by reference: they must outlive the returned function).
LogDensity make_log_posterior(const Model& model, const JointPrior& prior, const TargetSet& targets);

/// Gaussian random-walk scales per coordinate and the number of coordinates moved per step.
struct ProposalSpec {
    std::vector<double> scales;
    std::size_t block_size = 1;

    void validate(std::size_t dimension) const;
};

/// Scales of 5% of each prior sd (bound width for uniforms, init range for half-open improper
/// priors). block_size 0 means "all coordinates".
ProposalSpec default_proposal(const JointPrior& prior, std::size_t block_size = 0, double fraction = 0.05);

struct Proposal {
    ParameterVector candidate;
    double log_q_ratio = 0.0; ///< ln q(current | candidate) - ln q(candidate | current)
};

/// Moves a uniformly chosen subset of block_size coordinates by independent N(0, scale^2) steps.
Proposal propose(std::span<const double> current, const ProposalSpec& spec, Rng& rng);

/// min{1, exp(candidate - current + log_q_ratio)}; throws InvalidStateError if current is -inf/NaN.
double acceptance_probability(double log_post_current, double log_post_candidate, double log_q_ratio);

struct SamplerOptions {
    std::size_t iterations = 50000;
    std::size_t burn_in    = 10000;
    std::size_t thinning   = 10;

    void validate() const;
    std::size_t recorded_length() const
    {
        return (iterations - burn_in) / thinning;
    }
    /// burn-in of 20% and thinning of 10.
    static SamplerOptions with_defaults(std::size_t iterations);
};

struct ChainMetadata {
    std::size_t chain_id = 0;
    std::uint64_t seed   = 0;
    SamplerOptions options;
    std::size_t block_size = 0;
    std::string model_id;
    double acceptance_rate        = 0.0;
    std::size_t failed_evaluations = 0;
};

/// Recorded (post burn-in, thinned) states of one chain, row-major.
struct Chain {
    std::vector<std::string> parameter_names;
    std::vector<std::size_t> iteration;
    std::vector<double> values;
    std::vector<double> log_posterior;
    std::vector<double> gof;
    std::vector<std::uint8_t> accepted;
    ChainMetadata metadata;

    std::size_t size() const
    {
        return iteration.size();
    }
    std::size_t dimension() const
    {
        return parameter_names.size();
    }
    double value(std::size_t row, std::size_t col) const
    {
        return values[row * dimension() + col];
    }
    std::span<const double> row(std::size_t r) const
    {
        return {values.data() + r * dimension(), dimension()};
    }
    std::vector<double> column(std::size_t col) const;
    void push_back(std::size_t iter, std::span<const double> theta, const PosteriorPoint& point, bool was_accepted);
};

struct ChainSet {
    std::vector<Chain> chains;

    std::size_t size() const
    {
        return chains.size();
    }
    const Chain& operator[](std::size_t i) const
    {
        return chains[i];
    }
    const std::vector<std::string>& parameter_names() const;
    /// Every recorded value of one parameter, chains concatenated in order.
    std::vector<double> pooled(std::size_t col) const;
};

/// Runs the Metropolis-Hastings recursion for options.iterations steps from init.
Chain run_chain(const LogDensity& density, const std::vector<std::string>& parameter_names,
                const ProposalSpec& proposal, const SamplerOptions& options, ParameterVector init,
                std::uint64_t seed);

Chain run_chain(const Model& model, const JointPrior& prior, const TargetSet& targets, const ProposalSpec& proposal,
                const SamplerOptions& options, ParameterVector init, std::uint64_t seed);

/// Independent chains, one per (init, seed). Seeds must be distinct.
ChainSet run_chains(const LogDensity& density, const std::vector<std::string>& parameter_names,
                    const ProposalSpec& proposal, const SamplerOptions& options,
                    const std::vector<ParameterVector>& inits, const std::vector<std::uint64_t>& seeds,
                    const std::string& model_id = "");

/// One over-dispersed start per seed: a prior draw (init bounds for improper priors), redrawn until it
/// lies inside the parameter space and has a finite log posterior.
std::vector<ParameterVector> dispersed_inits(const LogDensity& density, const JointPrior& prior,
                                             const std::vector<std::uint64_t>& seeds, std::size_t max_attempts = 1000);

} // namespace calib
