#include "calib/sis_model.h"
#include "calib/error.h"

#include <cmath>

namespace calib::sis
{

void validate(const SisParameters& params)
{
    if (!(params.c > 0.0) || !std::isfinite(params.c)) {
        throw DomainError("contact rate c must be positive and finite");
    }
    if (!(params.p > 0.0) || !(params.p <= 1.0)) {
        throw DomainError("transmission probability p must lie in (0, 1]");
    }
    if (!(params.d > 0.0) || !std::isfinite(params.d)) {
        throw DomainError("infectious period d must be positive and finite");
    }
}

void validate(const SisSimConfig& config)
{
    if (!(config.s0 >= 0.0) || !(config.i0 >= 0.0) || std::abs(config.s0 + config.i0 - 1.0) > 1e-12) {
        throw DomainError("initial fractions must be non-negative with s0 + i0 = 1");
    }
    if (!(config.dt > 0.0) || !(config.horizon > 0.0) || !std::isfinite(config.horizon)) {
        throw DomainError("dt and horizon must be positive");
    }
    if (!(config.equilibrium_tol >= 0.0)) {
        throw DomainError("equilibrium tolerance must be non-negative");
    }
}

ModelOutputs simulate_sis(const SisParameters& params, const SisSimConfig& config, SisTrajectory* trajectory)
{
    validate(params);
    validate(config);

    const double beta  = params.beta();
    const double gamma = params.gamma();

    // Both derivatives are the same flow with opposite sign, so S + I is conserved stage by stage.
    auto flow = [beta, gamma](double s, double i) {
        return beta * s * i - gamma * i;
    };

    double s = config.s0;
    double i = config.i0;
    double t = 0.0;
    if (trajectory) {
        *trajectory = {};
        trajectory->time.push_back(t);
        trajectory->susceptible.push_back(s);
        trajectory->infected.push_back(i);
    }

    const auto steps = static_cast<long long>(std::ceil(config.horizon / config.dt - 1e-9));
    for (long long step = 1; step <= steps; ++step) {
        const double h = std::min(config.dt, config.horizon - t);

        const double k1 = flow(s, i);
        const double k2 = flow(s - 0.5 * h * k1, i + 0.5 * h * k1);
        const double k3 = flow(s - 0.5 * h * k2, i + 0.5 * h * k2);
        const double k4 = flow(s - h * k3, i + h * k3);
        const double d_i = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        i += d_i;
        s -= d_i;
        t = (step == steps) ? config.horizon : static_cast<double>(step) * config.dt;

        if (!std::isfinite(i) || !std::isfinite(s)) {
            throw NumericalError("non-finite SIS state at integration step " + std::to_string(step));
        }
        if (trajectory) {
            trajectory->time.push_back(t);
            trajectory->susceptible.push_back(s);
            trajectory->infected.push_back(i);
        }
        if (std::abs(d_i) < config.equilibrium_tol) {
            break;
        }
    }
    ModelOutputs out(2);
    out[Infected]    = i;
    out[Susceptible] = s;
    return out;
}

double sis_equilibrium_analytic(double beta, double gamma)
{
    if (!(beta > 0.0) || !(gamma > 0.0)) {
        throw DomainError("beta and gamma must be positive");
    }
    return std::max(0.0, 1.0 - gamma / beta);
}

TargetSet sis_case_study_targets()
{
    return TargetSet({
        {"P(infected)", 0.6, 0.01, "proportion"},
        {"P(susceptible)", 0.4, 0.01, "proportion"},
    });
}

} // namespace calib::sis
