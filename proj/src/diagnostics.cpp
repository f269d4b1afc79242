#include "calib/diagnostics.h"
#include "calib/error.h"

#include <boost/math/distributions/fisher_f.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace calib
{

namespace
{

// Caps the within-chain degrees of freedom when the chain variances agree exactly.
constexpr double kMaxDegreesOfFreedom = 1e7;

double variance(std::span<const double> x)
{
    const double m = mean(x);
    double acc     = 0.0;
    for (double v : x) {
        acc += (v - m) * (v - m);
    }
    return acc / static_cast<double>(x.size() - 1);
}

double covariance(std::span<const double> x, std::span<const double> y)
{
    const double mx = mean(x);
    const double my = mean(y);
    double acc      = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += (x[i] - mx) * (y[i] - my);
    }
    return acc / static_cast<double>(x.size() - 1);
}

std::vector<double> derived_column(const ChainSet& chains, const DerivedQuantity& q)
{
    std::vector<double> out;
    for (const auto& chain : chains.chains) {
        for (std::size_t r = 0; r < chain.size(); ++r) {
            out.push_back(q.compute(chain.row(r)));
        }
    }
    return out;
}

} // namespace

double mean(std::span<const double> x)
{
    if (x.empty()) {
        throw InsufficientDataError("mean of an empty sample");
    }
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double standard_deviation(std::span<const double> x)
{
    if (x.size() < 2) {
        throw InsufficientDataError("standard deviation needs at least 2 values");
    }
    return std::sqrt(variance(x));
}

GelmanRubinResult gelman_rubin(const std::vector<std::vector<double>>& chains)
{
    if (chains.size() < 2) {
        throw InsufficientChainsError("R-hat needs at least 2 chains, got " + std::to_string(chains.size()));
    }
    const std::size_t n = chains.front().size();
    for (const auto& c : chains) {
        if (c.size() != n) {
            throw InsufficientDataError("R-hat needs chains of equal length");
        }
    }
    if (n < 10) {
        throw InsufficientDataError("R-hat needs at least 10 recorded values per chain, got " + std::to_string(n));
    }
    const auto m  = static_cast<double>(chains.size());
    const auto nd = static_cast<double>(n);

    std::vector<double> s2;
    std::vector<double> xbar;
    std::vector<double> xbar2;
    for (const auto& c : chains) {
        s2.push_back(variance(c));
        xbar.push_back(mean(c));
        xbar2.push_back(xbar.back() * xbar.back());
    }
    const double w = mean(s2);
    if (!(w > 0.0)) {
        throw DegenerateChainError("R-hat undefined: zero within-chain variance");
    }
    const double b     = nd * variance(xbar);
    const double muhat = mean(xbar);

    const double var_w  = variance(s2) / m;
    const double var_b  = 2.0 * b * b / (m - 1.0);
    const double cov_wb = (nd / m) * (covariance(s2, xbar2) - 2.0 * muhat * covariance(s2, xbar));

    const double v     = (nd - 1.0) / nd * w + (1.0 + 1.0 / m) * b / nd;
    const double var_v = ((nd - 1.0) * (nd - 1.0) * var_w + (1.0 + 1.0 / m) * (1.0 + 1.0 / m) * var_b +
                          2.0 * (nd - 1.0) * (1.0 + 1.0 / m) * cov_wb) /
                         (nd * nd);
    const double df_v   = var_v > 0.0 ? 2.0 * v * v / var_v : kMaxDegreesOfFreedom;
    const double df_adj = (df_v + 3.0) / (df_v + 1.0);

    const double b_df = m - 1.0;
    const double w_df = var_w > 0.0 ? std::min(2.0 * w * w / var_w, kMaxDegreesOfFreedom) : kMaxDegreesOfFreedom;

    const double r2_fixed  = (nd - 1.0) / nd;
    const double r2_random = (1.0 + 1.0 / m) * (1.0 / nd) * (b / w);
    const boost::math::fisher_f f(b_df, w_df);
    const double q975 = boost::math::quantile(f, 0.975);

    GelmanRubinResult out;
    out.point_estimate = std::sqrt(df_adj * (r2_fixed + r2_random));
    out.upper_ci       = std::sqrt(df_adj * (r2_fixed + q975 * r2_random));
    return out;
}

GelmanRubinResult gelman_rubin(const ChainSet& chains, std::size_t parameter)
{
    if (chains.size() < 2) {
        throw InsufficientChainsError("R-hat needs at least 2 chains, got " + std::to_string(chains.size()));
    }
    if (parameter >= chains[0].dimension()) {
        throw DomainError("parameter index " + std::to_string(parameter) + " out of range");
    }
    std::vector<std::vector<double>> columns;
    for (const auto& c : chains.chains) {
        columns.push_back(c.column(parameter));
    }
    return gelman_rubin(columns);
}

std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag)
{
    if (series.size() <= max_lag) {
        throw InsufficientDataError("autocorrelation up to lag " + std::to_string(max_lag) + " needs more than " +
                                    std::to_string(max_lag) + " values");
    }
    const double m = mean(series);
    double c0      = 0.0;
    for (double v : series) {
        c0 += (v - m) * (v - m);
    }
    if (!(c0 > 0.0)) {
        throw DegenerateChainError("autocorrelation of a constant series");
    }
    std::vector<double> acf(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t t = 0; t + k < series.size(); ++t) {
            ck += (series[t] - m) * (series[t + k] - m);
        }
        acf[k] = ck / c0;
    }
    acf[0] = 1.0;
    return acf;
}

std::vector<double> autocorrelation(const Chain& chain, std::size_t parameter, std::size_t max_lag)
{
    if (parameter >= chain.dimension()) {
        throw DomainError("parameter index " + std::to_string(parameter) + " out of range");
    }
    const auto col = chain.column(parameter);
    return autocorrelation(col, max_lag);
}

CorrelationMatrix correlation_matrix(const std::vector<std::vector<double>>& columns, std::vector<std::string> names)
{
    if (columns.size() != names.size()) {
        throw AlignmentError("correlation matrix: " + std::to_string(columns.size()) + " columns but " +
                             std::to_string(names.size()) + " names");
    }
    const std::size_t k = columns.size();
    const std::size_t n = k ? columns.front().size() : 0;
    if (k && n < 10) {
        throw InsufficientDataError("cross-correlation needs at least 10 rows, got " + std::to_string(n));
    }
    CorrelationMatrix out;
    out.names = std::move(names);
    out.values.assign(k * k, std::numeric_limits<double>::quiet_NaN());
    out.degenerate.assign(k, false);

    std::vector<std::vector<double>> centred(k);
    std::vector<double> norm(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (columns[i].size() != n) {
            throw AlignmentError("correlation matrix columns differ in length");
        }
        const double m = mean(columns[i]);
        centred[i].resize(n);
        double ss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            centred[i][r] = columns[i][r] - m;
            ss += centred[i][r] * centred[i][r];
        }
        norm[i]          = std::sqrt(ss);
        out.degenerate[i] = !(norm[i] > 0.0) || !std::isfinite(norm[i]);
    }
    for (std::size_t i = 0; i < k; ++i) {
        out.values[i * k + i] = 1.0;
        for (std::size_t j = i + 1; j < k; ++j) {
            if (out.degenerate[i] || out.degenerate[j]) {
                continue;
            }
            double dot = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                dot += centred[i][r] * centred[j][r];
            }
            const double r        = std::clamp(dot / (norm[i] * norm[j]), -1.0, 1.0);
            out.values[i * k + j] = r;
            out.values[j * k + i] = r;
        }
    }
    return out;
}

CorrelationMatrix cross_correlation(const Chain& chain)
{
    std::vector<std::vector<double>> columns;
    for (std::size_t i = 0; i < chain.dimension(); ++i) {
        columns.push_back(chain.column(i));
    }
    return correlation_matrix(columns, chain.parameter_names);
}

CorrelationMatrix cross_correlation(const ChainSet& chains, const std::vector<DerivedQuantity>& derived)
{
    if (chains.size() == 0) {
        throw InsufficientChainsError("cross-correlation of an empty chain set");
    }
    std::vector<std::vector<double>> columns;
    std::vector<std::string> names = chains.parameter_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        columns.push_back(chains.pooled(i));
    }
    for (const auto& q : derived) {
        columns.push_back(derived_column(chains, q));
        names.push_back(q.name);
    }
    return correlation_matrix(columns, std::move(names));
}

std::vector<ProfilePoint> profile_likelihood(const Model& model, const TargetSet& targets, std::size_t parameter,
                                             std::span<const double> grid, const NuisanceStrategy& nuisance)
{
    if (grid.empty()) {
        throw DomainError("profile grid is empty");
    }
    const std::size_t dim = model.parameters.size();
    if (parameter >= dim) {
        throw DomainError("profiled parameter index " + std::to_string(parameter) + " out of range");
    }
    const Parameter& axis = model.parameters[parameter];
    for (double g : grid) {
        if (!(g >= axis.lower && g <= axis.upper)) {
            throw DomainError("profile grid value " + std::to_string(g) + " outside the bounds of '" + axis.name +
                              "'");
        }
    }

    auto gof_at = [&](std::span<const double> theta) {
        if (!model.parameters.contains(theta)) {
            return kInf;
        }
        try {
            return gof_total(model.evaluate(theta), targets);
        }
        catch (const AlignmentError&) {
            throw;
        }
        catch (const Error&) {
            return kInf;
        }
    };

    std::vector<ProfilePoint> curve;
    curve.reserve(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        ProfilePoint point;
        point.value = grid[g];
        if (const auto* fixed = std::get_if<FixedNuisance>(&nuisance)) {
            if (fixed->values.size() != dim) {
                throw AlignmentError("fixed nuisance vector has dimension " + std::to_string(fixed->values.size()) +
                                     ", model has " + std::to_string(dim));
            }
            ParameterVector theta = fixed->values;
            theta[parameter]      = grid[g];
            point.best_gof        = gof_at(theta);
            point.best_theta      = std::move(theta);
        }
        else {
            const auto& draws = std::get<BestOfDraws>(nuisance);
            if (draws.draws == 0) {
                throw DomainError("best-of-draws nuisance strategy needs at least one draw");
            }
            if (draws.sampler.size() != dim) {
                throw AlignmentError("nuisance sampler has dimension " + std::to_string(draws.sampler.size()) +
                                     ", model has " + std::to_string(dim));
            }
            std::seed_seq seq{static_cast<std::uint32_t>(draws.seed), static_cast<std::uint32_t>(draws.seed >> 32),
                              static_cast<std::uint32_t>(g)};
            Rng rng(seq);
            for (std::size_t k = 0; k < draws.draws; ++k) {
                ParameterVector theta = sample_joint_prior(draws.sampler, rng);
                theta[parameter]      = grid[g];
                const double gof      = gof_at(theta);
                if (gof < point.best_gof || point.best_theta.empty()) {
                    point.best_gof   = gof;
                    point.best_theta = std::move(theta);
                }
            }
        }
        curve.push_back(std::move(point));
    }
    return curve;
}

double profile_range(const std::vector<ProfilePoint>& profile)
{
    if (profile.empty()) {
        throw DomainError("range of an empty profile");
    }
    const auto [lo, hi] = std::minmax_element(profile.begin(), profile.end(), [](const auto& a, const auto& b) {
        return a.best_gof < b.best_gof;
    });
    return hi->best_gof - lo->best_gof;
}

std::vector<std::string> NonIdentifiabilityReport::flagged_parameters() const
{
    std::vector<std::string> out;
    for (const auto& p : parameters) {
        if (p.flagged()) {
            out.push_back(p.name);
        }
    }
    return out;
}

std::vector<std::string> NonIdentifiabilityReport::rhat_flagged_parameters() const
{
    std::vector<std::string> out;
    for (const auto& p : parameters) {
        if (p.rhat_flag) {
            out.push_back(p.name);
        }
    }
    return out;
}

NonIdentifiabilityReport detect_nonidentifiability(const ChainSet& chains, const JointPrior* prior,
                                                   const DiagnosticThresholds& thresholds,
                                                   const std::vector<DerivedQuantity>& derived)
{
    if (chains.size() < 2) {
        throw InsufficientChainsError("non-identifiability report needs at least 2 chains, got " +
                                      std::to_string(chains.size()));
    }
    const auto& names = chains.parameter_names();
    if (prior && prior->size() != names.size()) {
        throw AlignmentError("prior has " + std::to_string(prior->size()) + " factors, chains have " +
                             std::to_string(names.size()) + " parameters");
    }

    NonIdentifiabilityReport report;
    report.thresholds = thresholds;
    for (std::size_t i = 0; i < names.size(); ++i) {
        ParameterVerdict v;
        v.name                = names[i];
        v.rhat                = gelman_rubin(chains, i);
        const auto pooled     = chains.pooled(i);
        v.posterior_mean      = mean(pooled);
        v.posterior_sd        = standard_deviation(pooled);
        v.rhat_flag           = !(v.rhat.point_estimate <= thresholds.rhat);
        if (prior) {
            v.prior_sd = prior_sd((*prior)[i]);
            if (v.prior_sd && *v.prior_sd > 0.0) {
                v.sd_ratio  = v.posterior_sd / *v.prior_sd;
                v.flat_flag = *v.sd_ratio > thresholds.flat_ratio;
            }
        }
        report.parameters.push_back(std::move(v));
    }

    const CorrelationMatrix corr = cross_correlation(chains, derived);
    for (std::size_t i = 0; i < corr.size(); ++i) {
        for (std::size_t j = i + 1; j < corr.size(); ++j) {
            const double r = corr(i, j);
            if (std::isfinite(r) && std::abs(r) > thresholds.correlation) {
                report.correlated_pairs.push_back({corr.names[i], corr.names[j], r});
                if (i < names.size()) {
                    report.parameters[i].correlation_flag = true;
                }
                if (j < names.size()) {
                    report.parameters[j].correlation_flag = true;
                }
            }
        }
    }

    for (const auto& v : report.parameters) {
        report.converged  = report.converged && !v.rhat_flag;
        report.identified = report.identified && !v.flagged();
    }
    report.identified = report.identified && report.correlated_pairs.empty();
    return report;
}

std::string report_to_json(const NonIdentifiabilityReport& report)
{
    using nlohmann::json;
    auto optional_number = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };

    json params = json::array();
    for (const auto& v : report.parameters) {
        params.push_back({{"name", v.name},
                          {"rhat", v.rhat.point_estimate},
                          {"rhat_upper_ci", v.rhat.upper_ci},
                          {"posterior_mean", v.posterior_mean},
                          {"posterior_sd", v.posterior_sd},
                          {"prior_sd", optional_number(v.prior_sd)},
                          {"sd_ratio", optional_number(v.sd_ratio)},
                          {"flags",
                           {{"rhat", v.rhat_flag}, {"flat_posterior", v.flat_flag}, {"correlation", v.correlation_flag}}},
                          {"verdict", v.flagged() ? "flagged" : "ok"}});
    }
    json pairs = json::array();
    for (const auto& p : report.correlated_pairs) {
        pairs.push_back({{"first", p.first}, {"second", p.second}, {"correlation", p.correlation}});
    }
    const json doc = {{"thresholds",
                       {{"rhat", report.thresholds.rhat},
                        {"correlation", report.thresholds.correlation},
                        {"flat_ratio", report.thresholds.flat_ratio}}},
                      {"parameters", params},
                      {"correlated_pairs", pairs},
                      {"converged", report.converged},
                      {"identified", report.identified},
                      {"verdict", report.identified ? "identified" : (report.converged ? "weakly identified"
                                                                                        : "not converged")}};
    return doc.dump(2);
}

PriorPosteriorSummary prior_posterior_summary(const PriorSpec& prior, std::span<const double> samples,
                                              std::size_t bin_count)
{
    if (samples.size() < 100) {
        throw InsufficientDataError("prior/posterior summary needs at least 100 samples, got " +
                                    std::to_string(samples.size()));
    }
    if (bin_count == 0) {
        throw DomainError("prior/posterior summary needs at least one bin");
    }
    PriorPosteriorSummary out;
    out.prior_mean     = prior_mean(prior);
    out.prior_sd       = prior_sd(prior);
    out.posterior_mean = mean(samples);
    out.posterior_sd   = standard_deviation(samples);

    const auto [smin, smax] = std::minmax_element(samples.begin(), samples.end());
    double lo               = *smin;
    double hi               = *smax;
    const bool has_cdf      = prior_cdf(prior, out.posterior_mean).has_value();
    if (has_cdf && out.prior_mean && out.prior_sd) {
        const auto [support_lo, support_hi] = prior_support(prior);
        lo = std::min(lo, std::max(support_lo, *out.prior_mean - 4.0 * *out.prior_sd));
        hi = std::max(hi, std::min(support_hi, *out.prior_mean + 4.0 * *out.prior_sd));
    }
    if (!(hi > lo)) {
        const double pad = std::max(std::abs(lo) * 1e-6, 1e-12);
        lo -= pad;
        hi += pad;
    }
    const double width = (hi - lo) / static_cast<double>(bin_count);

    std::vector<double> counts(bin_count, 0.0);
    for (double x : samples) {
        auto k = static_cast<std::size_t>((x - lo) / width);
        counts[std::min(k, bin_count - 1)] += 1.0;
    }
    const auto n = static_cast<double>(samples.size());

    double overlap = 0.0;
    for (std::size_t k = 0; k < bin_count; ++k) {
        const double a = lo + width * static_cast<double>(k);
        const double b = (k + 1 == bin_count) ? hi : a + width;
        DensityBin bin;
        bin.center           = 0.5 * (a + b);
        bin.width            = b - a;
        bin.posterior_height = counts[k] / (n * bin.width);
        bin.prior_height     = std::numeric_limits<double>::quiet_NaN();
        if (has_cdf) {
            const double mass = std::max(0.0, *prior_cdf(prior, b) - *prior_cdf(prior, a));
            bin.prior_height  = mass / bin.width;
            overlap += std::min(mass, counts[k] / n);
        }
        out.bins.push_back(bin);
    }
    if (has_cdf) {
        out.overlap = std::clamp(overlap, 0.0, 1.0);
    }
    return out;
}

} // namespace calib
