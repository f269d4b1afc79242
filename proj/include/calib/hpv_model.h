#pragma once

#include "calib/targets.h"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace calib::hpv
{

enum class Strain : std::uint8_t
{
    LowRisk,
    HighRisk16,
    HighRisk18,
    HighRiskOther,
};
inline constexpr std::size_t kStrainCount = 4;
inline constexpr std::array<Strain, kStrainCount> kAllStrains{Strain::LowRisk, Strain::HighRisk16,
                                                              Strain::HighRisk18, Strain::HighRiskOther};

/// Short config key: "LR", "HR16", "HR18", "HRother".
std::string_view strain_key(Strain s);
Strain strain_from_key(std::string_view key);

enum class StateKind : std::uint8_t
{
    Well,
    HpvInfected,
    Cin1,
    Cin23,
    CancerLocal,
    CancerRegional,
    CancerDistant,
    Dead,
};

/// A health state; `strain` only matters for HpvInfected, Cin1 and Cin23.
struct HealthState {
    StateKind kind = StateKind::Well;
    Strain strain  = Strain::LowRisk;

    friend bool operator==(const HealthState&, const HealthState&) = default;
};

/// Flattened layout: Well, HPV x4, CIN1 x4, CIN23 x4, cancer local/regional/distant, Dead.
inline constexpr std::size_t kStateCount = 17;
std::size_t state_index(HealthState state);
HealthState state_from_index(std::size_t index);
std::string state_name(std::size_t index);

/// Strain-specific edges of the natural-history graph. ImmuneDegree is not an edge of a row: it is
/// the fractional reduction of susceptibility to a strain after clearing it.
enum class Transition : std::uint8_t
{
    Infection,       ///< Well -> HPV(s)
    HpvToCin1,       ///< HPV(s) -> CIN1(s)
    HpvClearance,    ///< HPV(s) -> Well
    Cin1ToCin23,     ///< CIN1(s) -> CIN23(s)
    Cin1Regression,  ///< CIN1(s) -> Well
    Cin23Regression, ///< CIN23(s) -> CIN1(s)
    Cin23ToCancer,   ///< CIN23(s) -> local cancer
    ImmuneDegree,
};
inline constexpr std::size_t kTransitionCount = 8;
std::string_view transition_key(Transition t);
Transition transition_from_key(std::string_view key);

/// Per-cycle cancer stage progression and cancer-specific death probabilities (not calibrated).
struct CancerTransitions {
    double local_to_regional   = 0.0;
    double regional_to_distant = 0.0;
    double local_death         = 0.0;
    double regional_death      = 0.0;
    double distant_death       = 0.0;
};

/// Baseline per-cycle transition probabilities by (transition, strain, age band), cancer stage
/// rates, and background mortality.
struct BaselineTransitionTable {
    std::vector<double> age_band_lower; ///< years, strictly increasing
    std::array<std::array<std::vector<double>, kStrainCount>, kTransitionCount> values;
    CancerTransitions cancer;
    std::vector<double> mortality_band_lower; ///< years, strictly increasing
    std::vector<double> mortality_annual;     ///< annual death probability per mortality band

    double value(Transition t, Strain s, std::size_t band) const
    {
        return values[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)][band];
    }
    double& value(Transition t, Strain s, std::size_t band)
    {
        return values[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)][band];
    }
    std::size_t band_count() const
    {
        return age_band_lower.size();
    }
    /// Throws ConfigError on malformed shapes, probabilities outside [0,1], or rows summing above 1.
    void validate() const;
};

struct MultiplierEdge {
    Transition transition;
    Strain strain;
    friend bool operator==(const MultiplierEdge&, const MultiplierEdge&) = default;
};

struct Multiplier {
    std::string name;
    std::vector<MultiplierEdge> edges;
};

/// The ordered calibration parameters: each named multiplier scales a set of edges. The values
/// themselves travel separately as the sampler's parameter vector.
class MultiplierMap
{
public:
    MultiplierMap() = default;
    explicit MultiplierMap(std::vector<Multiplier> entries);

    std::size_t size() const
    {
        return m_entries.size();
    }
    const Multiplier& operator[](std::size_t i) const
    {
        return m_entries[i];
    }
    const std::vector<Multiplier>& entries() const
    {
        return m_entries;
    }
    std::vector<std::string> names() const;

    /// Progression edges feed the cancer pathway (infection, HPV->CIN1, CIN1->CIN23, CIN23->cancer).
    bool is_progression(std::size_t i) const;

private:
    std::vector<Multiplier> m_entries;
};

/// The 26-entry default used by the shipped study.
MultiplierMap default_multiplier_map();

/// Baseline table with every edge scaled by its multiplier and clamped to [0,1].
struct EffectiveTransitionTable {
    BaselineTransitionTable table;
};

/// Throws DomainError for negative or non-finite multipliers and InfeasibleParameterError when a
/// row's outgoing probabilities exceed 1 after clamping.
EffectiveTransitionTable apply_multipliers(const BaselineTransitionTable& baseline, const MultiplierMap& map,
                                           std::span<const double> multipliers);

struct CohortConfig {
    std::size_t cohort_size = 20000;
    double start_age        = 15.0;
    double end_age          = 80.0;
    int cycle_months        = 1;
    std::uint64_t seed      = 20240501;

    std::size_t cycle_count() const;
    void validate() const;
};

using StateCounts = std::array<std::uint32_t, kStateCount>;

/// Result of one cohort run: the 31 calibration outputs and the per-cycle state census.
struct CohortSimulation {
    ModelOutputs outputs;
    std::vector<StateCounts> census; ///< cycle 0 .. cycle_count inclusive
    std::size_t cohort_size = 0;
    std::uint64_t incident_cancers = 0;
    std::uint64_t clearances       = 0; ///< returns to Well from HPV or CIN1
};

/// Number and order of outputs: 8 durations, 5 prevalences, 2 + 3 + 2 strain shares, 11 incidences.
inline constexpr std::size_t kOutputCount = 31;

/// Monthly-cycle individual microsimulation. Each woman draws from her own stream derived from
/// (seed, index) and consumes exactly two uniforms per cycle alive, so results do not depend on
/// evaluation order and neighbouring parameter values share random numbers.
CohortSimulation simulate_cohort(std::span<const double> multipliers, const MultiplierMap& map,
                                 const CohortConfig& config, const BaselineTransitionTable& baseline);

/// Same, on an already-scaled table.
CohortSimulation simulate_cohort(const EffectiveTransitionTable& table, const CohortConfig& config);

StateCounts state_census(const CohortSimulation& simulation, std::size_t cycle);

/// Names of the 31 outputs, aligned with the shipped target file.
std::vector<std::string> output_names();

/// Complete model definition as read from a configuration file.
struct HpvModelConfig {
    BaselineTransitionTable baseline;
    MultiplierMap multipliers;
    CohortConfig cohort;
};

/// Reads the JSON baseline/multiplier/cohort file (schema documented in README).
HpvModelConfig load_hpv_config(const std::filesystem::path& path);
HpvModelConfig parse_hpv_config(std::string_view json_text, const std::string& source_name = "<string>");

} // namespace calib::hpv
