#include "calib/sampler.h"
#include "calib/error.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace calib
{

ParameterSpace::ParameterSpace(std::vector<Parameter> parameters)
    : m_parameters(std::move(parameters))
{
    std::set<std::string> names;
    for (const auto& p : m_parameters) {
        if (p.name.empty()) {
            throw ConfigError("parameter names must be non-empty");
        }
        if (!names.insert(p.name).second) {
            throw ConfigError("duplicate parameter name '" + p.name + "'");
        }
        if (std::isnan(p.lower) || std::isnan(p.upper) || !(p.lower < p.upper)) {
            throw ConfigError("parameter '" + p.name + "' needs lower < upper");
        }
    }
}

std::vector<std::string> ParameterSpace::names() const
{
    std::vector<std::string> out;
    for (const auto& p : m_parameters) {
        out.push_back(p.name);
    }
    return out;
}

std::size_t ParameterSpace::index_of(const std::string& name) const
{
    for (std::size_t i = 0; i < m_parameters.size(); ++i) {
        if (m_parameters[i].name == name) {
            return i;
        }
    }
    throw ConfigError("unknown parameter '" + name + "'");
}

bool ParameterSpace::contains(std::span<const double> theta) const
{
    if (theta.size() != m_parameters.size()) {
        return false;
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!(theta[i] >= m_parameters[i].lower && theta[i] <= m_parameters[i].upper)) {
            return false;
        }
    }
    return true;
}

PosteriorPoint log_posterior(const Model& model, const JointPrior& prior, const TargetSet& targets,
                             std::span<const double> theta)
{
    if (theta.size() != model.parameters.size()) {
        throw AlignmentError("parameter vector of dimension " + std::to_string(theta.size()) + " for model '" +
                             model.id + "' with " + std::to_string(model.parameters.size()) + " parameters");
    }
    PosteriorPoint point;
    if (!model.parameters.contains(theta)) {
        return point;
    }
    const double lp = joint_log_prior(prior, theta);
    if (lp == -kInf || std::isnan(lp)) {
        return point;
    }
    try {
        const ModelOutputs outputs = model.evaluate(theta);
        point.gof                  = gof_total(outputs, targets);
        const double ll            = log_likelihood(outputs, targets);
        point.log_posterior        = lp + ll;
    }
    catch (const AlignmentError&) {
        throw;
    }
    catch (const Error& e) {
        spdlog::debug("model '{}' evaluation failed: {}", model.id, e.what());
        point               = PosteriorPoint{};
        point.model_failed  = true;
    }
    return point;
}

LogDensity make_log_posterior(const Model& model, const JointPrior& prior, const TargetSet& targets)
{
    if (prior.size() != model.parameters.size()) {
        throw AlignmentError("model '" + model.id + "' has " + std::to_string(model.parameters.size()) +
                             " parameters but the prior has " + std::to_string(prior.size()) + " factors");
    }
    return [&model, &prior, &targets](std::span<const double> theta) {
        return log_posterior(model, prior, targets, theta);
    };
}

void ProposalSpec::validate(std::size_t dimension) const
{
    if (scales.size() != dimension) {
        throw ConfigError("proposal has " + std::to_string(scales.size()) + " scales for " +
                          std::to_string(dimension) + " parameters");
    }
    for (double s : scales) {
        if (!(s >= 0.0) || !std::isfinite(s)) {
            throw ConfigError("proposal scales must be finite and non-negative");
        }
    }
    if (block_size < 1 || block_size > dimension) {
        throw ConfigError("block size must lie in [1, " + std::to_string(dimension) + "]");
    }
}

ProposalSpec default_proposal(const JointPrior& prior, std::size_t block_size, double fraction)
{
    ProposalSpec spec;
    spec.block_size = block_size == 0 ? prior.size() : block_size;
    for (std::size_t i = 0; i < prior.size(); ++i) {
        if (auto sd = prior_sd(prior[i])) {
            // Uniform-type priors scale by their bound width rather than the sd.
            const bool uniform_type = !std::holds_alternative<Normal>(prior[i].distribution()) &&
                                      !std::holds_alternative<Gamma>(prior[i].distribution());
            spec.scales.push_back(fraction * (uniform_type ? *sd * std::sqrt(12.0) : *sd));
        }
        else if (prior[i].init_lower() && prior[i].init_upper()) {
            spec.scales.push_back(fraction * (*prior[i].init_upper() - *prior[i].init_lower()));
        }
        else {
            throw ConfigError("prior '" + prior.names()[i] +
                              "' has no finite width; give the proposal scale explicitly");
        }
    }
    return spec;
}

Proposal propose(std::span<const double> current, const ProposalSpec& spec, Rng& rng)
{
    const std::size_t n = current.size();
    spec.validate(n);
    Proposal out{ParameterVector(current.begin(), current.end()), 0.0};

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> chosen;
    chosen.reserve(spec.block_size);
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), spec.block_size, rng);

    std::normal_distribution<double> step(0.0, 1.0);
    for (std::size_t i : chosen) {
        out.candidate[i] += spec.scales[i] * step(rng);
    }
    return out;
}

double acceptance_probability(double log_post_current, double log_post_candidate, double log_q_ratio)
{
    if (std::isnan(log_post_current) || log_post_current == -kInf) {
        throw InvalidStateError("current state has zero posterior density; chains must start inside the support");
    }
    if (std::isnan(log_post_candidate) || log_post_candidate == -kInf || std::isnan(log_q_ratio)) {
        return 0.0;
    }
    const double log_ratio = log_post_candidate - log_post_current + log_q_ratio;
    return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

void SamplerOptions::validate() const
{
    if (iterations == 0) {
        throw ConfigError("iterations must be positive");
    }
    if (burn_in >= iterations) {
        throw ConfigError("burn_in must be smaller than iterations");
    }
    if (thinning < 1) {
        throw ConfigError("thinning must be at least 1");
    }
}

SamplerOptions SamplerOptions::with_defaults(std::size_t iterations)
{
    return SamplerOptions{iterations, iterations / 5, 10};
}

std::vector<double> Chain::column(std::size_t col) const
{
    std::vector<double> out(size());
    for (std::size_t r = 0; r < size(); ++r) {
        out[r] = value(r, col);
    }
    return out;
}

void Chain::push_back(std::size_t iter, std::span<const double> theta, const PosteriorPoint& point, bool was_accepted)
{
    iteration.push_back(iter);
    values.insert(values.end(), theta.begin(), theta.end());
    log_posterior.push_back(point.log_posterior);
    gof.push_back(point.gof);
    accepted.push_back(was_accepted ? 1 : 0);
}

const std::vector<std::string>& ChainSet::parameter_names() const
{
    static const std::vector<std::string> empty;
    return chains.empty() ? empty : chains.front().parameter_names;
}

std::vector<double> ChainSet::pooled(std::size_t col) const
{
    std::vector<double> out;
    for (const auto& c : chains) {
        auto column = c.column(col);
        out.insert(out.end(), column.begin(), column.end());
    }
    return out;
}

Chain run_chain(const LogDensity& density, const std::vector<std::string>& parameter_names,
                const ProposalSpec& proposal, const SamplerOptions& options, ParameterVector init, std::uint64_t seed)
{
    options.validate();
    proposal.validate(init.size());
    if (parameter_names.size() != init.size()) {
        throw AlignmentError("initial state dimension does not match the parameter names");
    }

    PosteriorPoint current_point = density(init);
    if (std::isnan(current_point.log_posterior) || current_point.log_posterior == -kInf) {
        throw InitializationError("initial state has zero posterior density; draw a start point from the prior "
                                  "(or its initialisation bounds) inside the support");
    }

    Chain chain;
    chain.parameter_names = parameter_names;
    chain.metadata.seed       = seed;
    chain.metadata.options    = options;
    chain.metadata.block_size = proposal.block_size;
    const std::size_t recorded = options.recorded_length();
    chain.iteration.reserve(recorded);
    chain.values.reserve(recorded * init.size());

    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ParameterVector current = std::move(init);
    std::size_t accepted_count = 0;
    std::size_t failures       = 0;

    for (std::size_t t = 1; t <= options.iterations; ++t) {
        Proposal prop                 = propose(current, proposal, rng);
        const PosteriorPoint cand     = density(prop.candidate);
        if (cand.model_failed) {
            if (failures == 0) {
                spdlog::warn("model evaluation failed at iteration {} (seed {}); treating as zero density", t, seed);
            }
            ++failures;
        }
        const double alpha = acceptance_probability(current_point.log_posterior, cand.log_posterior, prop.log_q_ratio);
        const bool accept  = unit(rng) < alpha;
        if (accept) {
            current       = std::move(prop.candidate);
            current_point = cand;
            ++accepted_count;
        }
        if (t > options.burn_in && (t - options.burn_in) % options.thinning == 0) {
            chain.push_back(t, current, current_point, accept);
        }
    }
    if (failures > 1) {
        spdlog::warn("{} model evaluations failed in chain with seed {}", failures, seed);
    }
    chain.metadata.acceptance_rate    = static_cast<double>(accepted_count) / static_cast<double>(options.iterations);
    chain.metadata.failed_evaluations = failures;
    return chain;
}

Chain run_chain(const Model& model, const JointPrior& prior, const TargetSet& targets, const ProposalSpec& proposal,
                const SamplerOptions& options, ParameterVector init, std::uint64_t seed)
{
    Chain chain = run_chain(make_log_posterior(model, prior, targets), model.parameters.names(), proposal, options,
                            std::move(init), seed);
    chain.metadata.model_id = model.id;
    return chain;
}

ChainSet run_chains(const LogDensity& density, const std::vector<std::string>& parameter_names,
                    const ProposalSpec& proposal, const SamplerOptions& options,
                    const std::vector<ParameterVector>& inits, const std::vector<std::uint64_t>& seeds,
                    const std::string& model_id)
{
    if (inits.size() != seeds.size() || seeds.empty()) {
        throw ConfigError("need one initial state per seed and at least one chain");
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ConfigError("chain seeds must be distinct");
    }
    ChainSet set;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        Chain chain              = run_chain(density, parameter_names, proposal, options, inits[k], seeds[k]);
        chain.metadata.chain_id  = k + 1;
        chain.metadata.model_id  = model_id;
        set.chains.push_back(std::move(chain));
    }
    return set;
}

std::vector<ParameterVector> dispersed_inits(const LogDensity& density, const JointPrior& prior,
                                             const std::vector<std::uint64_t>& seeds, std::size_t max_attempts)
{
    std::vector<ParameterVector> inits;
    for (std::uint64_t seed : seeds) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x696e6974u};
        Rng rng(seq);
        bool found = false;
        for (std::size_t attempt = 0; attempt < max_attempts && !found; ++attempt) {
            ParameterVector theta = sample_joint_prior(prior, rng);
            const double lp       = density(theta).log_posterior;
            if (std::isfinite(lp)) {
                inits.push_back(std::move(theta));
                found = true;
            }
        }
        if (!found) {
            throw InitializationError("no prior draw with finite posterior density after " +
                                      std::to_string(max_attempts) + " attempts (seed " + std::to_string(seed) + ")");
        }
    }
    return inits;
}

} // namespace calib
