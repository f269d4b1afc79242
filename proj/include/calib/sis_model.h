#pragma once

#include "calib/targets.h"

#include <vector>

namespace calib::sis
{

/// Contact rate c, per-contact transmission probability p and infectious period d.
struct SisParameters {
    double c = 9.0;
    double p = 0.06;
    double d = 1.0 / 0.216;

    double beta() const
    {
        return c * p;
    }
    double gamma() const
    {
        return 1.0 / d;
    }
};

struct SisSimConfig {
    double s0              = 0.99;
    double i0              = 0.01;
    double dt              = 0.01;
    double horizon         = 500.0;
    double equilibrium_tol = 1e-10; ///< stop once |dI| over one step falls below this
};

/// Recorded states, one entry per integrator step (plus the initial state).
struct SisTrajectory {
    std::vector<double> time;
    std::vector<double> susceptible;
    std::vector<double> infected;
};

/// Index of each quantity within the simulate_sis outputs.
enum SisOutput : std::size_t
{
    Infected    = 0,
    Susceptible = 1,
};

/// Integrates dS = -beta S I + gamma I, dI = beta S I - gamma I with classical RK4 and returns
/// (I, S) at termination. Throws DomainError on invalid inputs and NumericalError on blow-up.
ModelOutputs simulate_sis(const SisParameters& params, const SisSimConfig& config = {},
                          SisTrajectory* trajectory = nullptr);

/// Endemic equilibrium max(0, 1 - gamma/beta).
double sis_equilibrium_analytic(double beta, double gamma);

/// P(infected) ~ N(0.6, 0.01) and P(susceptible) ~ N(0.4, 0.01), in simulate_sis output order.
TargetSet sis_case_study_targets();

void validate(const SisParameters& params);
void validate(const SisSimConfig& config);

} // namespace calib::sis
