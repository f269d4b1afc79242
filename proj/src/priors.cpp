#include "calib/priors.h"
#include "calib/error.h"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <sstream>

namespace calib
{

namespace
{

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate(const PriorDistribution& d)
{
    std::visit(Overloaded{
                   [](const ImproperUniform& u) {
                       if (std::isnan(u.lower) || std::isnan(u.upper) || !(u.lower < u.upper)) {
                           throw DomainError("improper uniform prior needs lower < upper");
                       }
                   },
                   [](const Uniform& u) {
                       if (!std::isfinite(u.a) || !std::isfinite(u.b) || !(u.a < u.b)) {
                           throw DomainError("uniform prior needs finite a < b");
                       }
                   },
                   [](const Normal& n) {
                       if (!std::isfinite(n.mu) || !std::isfinite(n.sigma) || !(n.sigma > 0.0)) {
                           throw DomainError("normal prior needs finite mu and sigma > 0");
                       }
                   },
                   [](const Gamma& g) {
                       if (!std::isfinite(g.shape) || !std::isfinite(g.rate) || !(g.shape > 0.0) ||
                           !(g.rate > 0.0)) {
                           throw DomainError("gamma prior needs shape > 0 and rate > 0");
                       }
                   },
               },
               d);
}

std::optional<std::pair<double, double>> finite_bounds(const ImproperUniform& u)
{
    if (std::isfinite(u.lower) && std::isfinite(u.upper)) {
        return std::pair{u.lower, u.upper};
    }
    return std::nullopt;
}

} // namespace

PriorSpec::PriorSpec(PriorDistribution distribution, std::optional<double> init_lower,
                     std::optional<double> init_upper)
    : m_distribution(distribution)
    , m_init_lower(init_lower)
    , m_init_upper(init_upper)
{
    validate(m_distribution);
    if (m_init_lower && m_init_upper && !(*m_init_lower < *m_init_upper)) {
        throw DomainError("initialisation bounds need init_lower < init_upper");
    }
}

std::string PriorSpec::kind_name() const
{
    return std::visit(Overloaded{
                          [](const ImproperUniform&) { return std::string("improper_uniform"); },
                          [](const Uniform&) { return std::string("uniform"); },
                          [](const Normal&) { return std::string("normal"); },
                          [](const Gamma&) { return std::string("gamma"); },
                      },
                      m_distribution);
}

std::string PriorSpec::describe() const
{
    std::ostringstream os;
    os.precision(6);
    std::visit(Overloaded{
                   [&](const ImproperUniform& u) { os << "ImproperUniform[" << u.lower << ", " << u.upper << "]"; },
                   [&](const Uniform& u) { os << "Uniform(" << u.a << ", " << u.b << ")"; },
                   [&](const Normal& n) { os << "Normal(mu=" << n.mu << ", sd=" << n.sigma << ")"; },
                   [&](const Gamma& g) { os << "Gamma(shape=" << g.shape << ", rate=" << g.rate << ")"; },
               },
               m_distribution);
    return os.str();
}

double log_prior_density(const PriorSpec& spec, double x)
{
    constexpr double neg_inf = -kInf;
    if (std::isnan(x)) {
        return neg_inf;
    }
    return std::visit(Overloaded{
                          [&](const ImproperUniform& u) { return (x >= u.lower && x <= u.upper) ? 0.0 : neg_inf; },
                          [&](const Uniform& u) { return (x >= u.a && x < u.b) ? -std::log(u.b - u.a) : neg_inf; },
                          [&](const Normal& n) {
                              const double z = (x - n.mu) / n.sigma;
                              return -0.5 * z * z - std::log(n.sigma) - 0.5 * std::log(2.0 * M_PI);
                          },
                          [&](const Gamma& g) {
                              if (x < 0.0 || std::isinf(x)) {
                                  return neg_inf;
                              }
                              if (x == 0.0) {
                                  if (g.shape < 1.0) {
                                      return kInf;
                                  }
                                  if (g.shape > 1.0) {
                                      return neg_inf;
                                  }
                                  return std::log(g.rate);
                              }
                              return g.shape * std::log(g.rate) - std::lgamma(g.shape) + (g.shape - 1.0) * std::log(x) -
                                     g.rate * x;
                          },
                      },
                      spec.distribution());
}

double sample_prior(const PriorSpec& spec, Rng& rng)
{
    return std::visit(Overloaded{
                          [&](const ImproperUniform&) {
                              auto lo = spec.init_lower();
                              auto hi = spec.init_upper();
                              if (!lo || !hi || !std::isfinite(*lo) || !std::isfinite(*hi)) {
                                  throw ConfigError("an improper uniform prior needs finite init_lower and "
                                                    "init_upper to draw a starting value");
                              }
                              return std::uniform_real_distribution<double>(*lo, *hi)(rng);
                          },
                          [&](const Uniform& u) { return std::uniform_real_distribution<double>(u.a, u.b)(rng); },
                          [&](const Normal& n) { return std::normal_distribution<double>(n.mu, n.sigma)(rng); },
                          [&](const Gamma& g) {
                              return std::gamma_distribution<double>(g.shape, 1.0 / g.rate)(rng);
                          },
                      },
                      spec.distribution());
}

std::optional<double> prior_mean(const PriorSpec& spec)
{
    return std::visit(Overloaded{
                          [](const ImproperUniform& u) -> std::optional<double> {
                              if (auto b = finite_bounds(u)) {
                                  return 0.5 * (b->first + b->second);
                              }
                              return std::nullopt;
                          },
                          [](const Uniform& u) -> std::optional<double> { return 0.5 * (u.a + u.b); },
                          [](const Normal& n) -> std::optional<double> { return n.mu; },
                          [](const Gamma& g) -> std::optional<double> { return g.shape / g.rate; },
                      },
                      spec.distribution());
}

std::optional<double> prior_sd(const PriorSpec& spec)
{
    return std::visit(Overloaded{
                          [](const ImproperUniform& u) -> std::optional<double> {
                              if (auto b = finite_bounds(u)) {
                                  return (b->second - b->first) / std::sqrt(12.0);
                              }
                              return std::nullopt;
                          },
                          [](const Uniform& u) -> std::optional<double> { return (u.b - u.a) / std::sqrt(12.0); },
                          [](const Normal& n) -> std::optional<double> { return n.sigma; },
                          [](const Gamma& g) -> std::optional<double> { return std::sqrt(g.shape) / g.rate; },
                      },
                      spec.distribution());
}

std::optional<double> prior_cdf(const PriorSpec& spec, double x)
{
    auto uniform_cdf = [x](double a, double b) { return x <= a ? 0.0 : (x >= b ? 1.0 : (x - a) / (b - a)); };
    return std::visit(Overloaded{
                          [&](const ImproperUniform& u) -> std::optional<double> {
                              if (auto b = finite_bounds(u)) {
                                  return uniform_cdf(b->first, b->second);
                              }
                              return std::nullopt;
                          },
                          [&](const Uniform& u) -> std::optional<double> { return uniform_cdf(u.a, u.b); },
                          [&](const Normal& n) -> std::optional<double> {
                              if (std::isinf(x)) {
                                  return x > 0 ? 1.0 : 0.0;
                              }
                              return boost::math::cdf(boost::math::normal_distribution<double>(n.mu, n.sigma), x);
                          },
                          [&](const Gamma& g) -> std::optional<double> {
                              if (x <= 0.0) {
                                  return 0.0;
                              }
                              if (std::isinf(x)) {
                                  return 1.0;
                              }
                              return boost::math::cdf(boost::math::gamma_distribution<double>(g.shape, 1.0 / g.rate),
                                                      x);
                          },
                      },
                      spec.distribution());
}

std::pair<double, double> prior_support(const PriorSpec& spec)
{
    return std::visit(Overloaded{
                          [](const ImproperUniform& u) { return std::pair{u.lower, u.upper}; },
                          [](const Uniform& u) { return std::pair{u.a, u.b}; },
                          [](const Normal&) { return std::pair{-kInf, kInf}; },
                          [](const Gamma&) { return std::pair{0.0, kInf}; },
                      },
                      spec.distribution());
}

JointPrior::JointPrior(std::vector<std::string> names, std::vector<PriorSpec> specs)
    : m_names(std::move(names))
    , m_specs(std::move(specs))
{
    if (m_names.size() != m_specs.size()) {
        throw AlignmentError("joint prior has " + std::to_string(m_names.size()) + " names for " +
                             std::to_string(m_specs.size()) + " priors");
    }
}

double joint_log_prior(const JointPrior& prior, std::span<const double> theta)
{
    if (theta.size() != prior.size()) {
        throw AlignmentError("parameter vector of dimension " + std::to_string(theta.size()) +
                             " against a joint prior of dimension " + std::to_string(prior.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double lp = log_prior_density(prior[i], theta[i]);
        if (lp == -kInf) {
            return -kInf;
        }
        sum += lp;
    }
    return sum;
}

std::vector<double> sample_joint_prior(const JointPrior& prior, Rng& rng)
{
    std::vector<double> theta;
    theta.reserve(prior.size());
    for (const auto& spec : prior.specs()) {
        theta.push_back(sample_prior(spec, rng));
    }
    return theta;
}

} // namespace calib
