#include "calib/hpv_model.h"
#include "calib/error.h"

#include <boost/random/taus88.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace calib::hpv
{

namespace
{

constexpr std::array<std::string_view, kStrainCount> kStrainKeys{"LR", "HR16", "HR18", "HRother"};
constexpr std::array<std::string_view, kTransitionCount> kTransitionKeys{
    "infection",       "hpv_to_cin1",      "hpv_clearance",   "cin1_to_cin23",
    "cin1_regression", "cin23_regression", "cin23_to_cancer", "immune_degree"};

constexpr std::size_t idx(Strain s)
{
    return static_cast<std::size_t>(s);
}
constexpr std::size_t idx(Transition t)
{
    return static_cast<std::size_t>(t);
}

// Flattened state indices.
constexpr std::uint8_t kWell           = 0;
constexpr std::uint8_t kHpvBase        = 1;
constexpr std::uint8_t kCin1Base       = 5;
constexpr std::uint8_t kCin23Base      = 9;
constexpr std::uint8_t kCancerLocal    = 13;
constexpr std::uint8_t kCancerRegional = 14;
constexpr std::uint8_t kCancerDistant  = 15;
constexpr std::uint8_t kDead           = 16;

// Output layout. Duration rows follow the target table: LR, HR other, HR16, HR18 per age group.
constexpr std::array<Strain, kStrainCount> kDurationOrder{Strain::LowRisk, Strain::HighRiskOther, Strain::HighRisk16,
                                                          Strain::HighRisk18};
constexpr std::array<std::pair<double, double>, 5> kPrevalenceBands{
    {{20.0, 25.0}, {25.0, 35.0}, {35.0, 45.0}, {45.0, 55.0}, {55.0, 65.0}}};
constexpr std::size_t kIncidenceBands     = 11;
constexpr double kIncidenceFirstAge       = 25.0;
constexpr double kIncidenceBandWidthYears = 5.0;
constexpr double kYoungAgeLimit           = 30.0;

constexpr std::size_t kOutDuration   = 0;
constexpr std::size_t kOutPrevalence = 8;
constexpr std::size_t kOutCin1       = 13;
constexpr std::size_t kOutCin23      = 15;
constexpr std::size_t kOutCancer     = 18;
constexpr std::size_t kOutIncidence  = 20;

bool is_progression_transition(Transition t)
{
    return t == Transition::Infection || t == Transition::HpvToCin1 || t == Transition::Cin1ToCin23 ||
           t == Transition::Cin23ToCancer;
}

std::size_t band_of(const std::vector<double>& lower, double age)
{
    auto it = std::upper_bound(lower.begin(), lower.end(), age);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - lower.begin()) - 1));
}

void check_probability(double p, const std::string& what)
{
    if (!(p >= 0.0) || !(p <= 1.0)) {
        throw ConfigError(what + " must be a probability in [0,1]");
    }
}

void check_increasing(const std::vector<double>& v, const std::string& what)
{
    if (v.empty()) {
        throw ConfigError(what + " must not be empty");
    }
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) {
            throw ConfigError(what + " must be strictly increasing");
        }
    }
}

// Row sums that must stay within the probability simplex, per (row kind, strain, band).
template <class Fail>
void check_rows(const BaselineTransitionTable& t, Fail&& fail)
{
    constexpr double slack = 1e-12;
    for (std::size_t b = 0; b < t.band_count(); ++b) {
        double well = 0.0;
        for (auto s : kAllStrains) {
            well += t.value(Transition::Infection, s, b);
            const double hpv   = t.value(Transition::HpvToCin1, s, b) + t.value(Transition::HpvClearance, s, b);
            const double cin1  = t.value(Transition::Cin1ToCin23, s, b) + t.value(Transition::Cin1Regression, s, b);
            const double cin23 = t.value(Transition::Cin23ToCancer, s, b) + t.value(Transition::Cin23Regression, s, b);
            const std::string where = std::string(strain_key(s)) + ", age band " + std::to_string(b);
            if (hpv > 1.0 + slack) {
                fail("HPV row (" + where + ") sums to " + std::to_string(hpv));
            }
            if (cin1 > 1.0 + slack) {
                fail("CIN1 row (" + where + ") sums to " + std::to_string(cin1));
            }
            if (cin23 > 1.0 + slack) {
                fail("CIN23 row (" + where + ") sums to " + std::to_string(cin23));
            }
        }
        if (well > 1.0 + slack) {
            fail("Well row (age band " + std::to_string(b) + ") sums to " + std::to_string(well));
        }
    }
}

} // namespace

std::string_view strain_key(Strain s)
{
    return kStrainKeys[idx(s)];
}

Strain strain_from_key(std::string_view key)
{
    for (std::size_t i = 0; i < kStrainCount; ++i) {
        if (kStrainKeys[i] == key) {
            return static_cast<Strain>(i);
        }
    }
    throw ConfigError("unknown strain '" + std::string(key) + "' (expected LR, HR16, HR18 or HRother)");
}

std::string_view transition_key(Transition t)
{
    return kTransitionKeys[idx(t)];
}

Transition transition_from_key(std::string_view key)
{
    for (std::size_t i = 0; i < kTransitionCount; ++i) {
        if (kTransitionKeys[i] == key) {
            return static_cast<Transition>(i);
        }
    }
    throw ConfigError("unknown transition '" + std::string(key) + "'");
}

std::size_t state_index(HealthState state)
{
    switch (state.kind) {
    case StateKind::Well:
        return kWell;
    case StateKind::HpvInfected:
        return kHpvBase + idx(state.strain);
    case StateKind::Cin1:
        return kCin1Base + idx(state.strain);
    case StateKind::Cin23:
        return kCin23Base + idx(state.strain);
    case StateKind::CancerLocal:
        return kCancerLocal;
    case StateKind::CancerRegional:
        return kCancerRegional;
    case StateKind::CancerDistant:
        return kCancerDistant;
    case StateKind::Dead:
        return kDead;
    }
    throw DomainError("invalid health state");
}

HealthState state_from_index(std::size_t index)
{
    if (index == kWell) {
        return {StateKind::Well, Strain::LowRisk};
    }
    if (index < kCin1Base) {
        return {StateKind::HpvInfected, static_cast<Strain>(index - kHpvBase)};
    }
    if (index < kCin23Base) {
        return {StateKind::Cin1, static_cast<Strain>(index - kCin1Base)};
    }
    if (index < kCancerLocal) {
        return {StateKind::Cin23, static_cast<Strain>(index - kCin23Base)};
    }
    switch (index) {
    case kCancerLocal:
        return {StateKind::CancerLocal, Strain::LowRisk};
    case kCancerRegional:
        return {StateKind::CancerRegional, Strain::LowRisk};
    case kCancerDistant:
        return {StateKind::CancerDistant, Strain::LowRisk};
    case kDead:
        return {StateKind::Dead, Strain::LowRisk};
    default:
        throw DomainError("state index out of range");
    }
}

std::string state_name(std::size_t index)
{
    const auto st = state_from_index(index);
    switch (st.kind) {
    case StateKind::Well:
        return "Well";
    case StateKind::HpvInfected:
        return "HPV(" + std::string(strain_key(st.strain)) + ")";
    case StateKind::Cin1:
        return "CIN1(" + std::string(strain_key(st.strain)) + ")";
    case StateKind::Cin23:
        return "CIN23(" + std::string(strain_key(st.strain)) + ")";
    case StateKind::CancerLocal:
        return "CancerLocal";
    case StateKind::CancerRegional:
        return "CancerRegional";
    case StateKind::CancerDistant:
        return "CancerDistant";
    case StateKind::Dead:
        return "Dead";
    }
    return "?";
}

void BaselineTransitionTable::validate() const
{
    check_increasing(age_band_lower, "age_band_lower");
    for (std::size_t t = 0; t < kTransitionCount; ++t) {
        for (std::size_t s = 0; s < kStrainCount; ++s) {
            const auto& v = values[t][s];
            const std::string what =
                std::string(kTransitionKeys[t]) + " (" + std::string(kStrainKeys[s]) + ")";
            if (v.size() != age_band_lower.size()) {
                throw ConfigError(what + " has " + std::to_string(v.size()) + " age bands, expected " +
                                  std::to_string(age_band_lower.size()));
            }
            for (double p : v) {
                check_probability(p, what);
            }
        }
    }
    check_probability(cancer.local_to_regional, "cancer.local_to_regional");
    check_probability(cancer.regional_to_distant, "cancer.regional_to_distant");
    check_probability(cancer.local_death, "cancer.local_death");
    check_probability(cancer.regional_death, "cancer.regional_death");
    check_probability(cancer.distant_death, "cancer.distant_death");
    check_increasing(mortality_band_lower, "mortality.age_band_lower");
    if (mortality_annual.size() != mortality_band_lower.size()) {
        throw ConfigError("mortality.annual_probability must match mortality.age_band_lower");
    }
    for (double q : mortality_annual) {
        check_probability(q, "mortality.annual_probability");
    }
    check_rows(*this, [](const std::string& msg) { throw ConfigError("baseline " + msg); });
}

MultiplierMap::MultiplierMap(std::vector<Multiplier> entries)
    : m_entries(std::move(entries))
{
    std::set<std::string> names;
    std::vector<MultiplierEdge> seen;
    for (const auto& m : m_entries) {
        if (m.edges.empty()) {
            throw ConfigError("multiplier '" + m.name + "' scales no edge");
        }
        if (!names.insert(m.name).second) {
            throw ConfigError("duplicate multiplier name '" + m.name + "'");
        }
        for (const auto& e : m.edges) {
            if (std::find(seen.begin(), seen.end(), e) != seen.end()) {
                throw ConfigError("edge " + std::string(transition_key(e.transition)) + " (" +
                                  std::string(strain_key(e.strain)) + ") is scaled by two multipliers");
            }
            seen.push_back(e);
        }
    }
}

std::vector<std::string> MultiplierMap::names() const
{
    std::vector<std::string> out;
    out.reserve(m_entries.size());
    for (const auto& m : m_entries) {
        out.push_back(m.name);
    }
    return out;
}

bool MultiplierMap::is_progression(std::size_t i) const
{
    const auto& edges = m_entries.at(i).edges;
    return std::all_of(edges.begin(), edges.end(),
                       [](const MultiplierEdge& e) { return is_progression_transition(e.transition); });
}

MultiplierMap default_multiplier_map()
{
    std::vector<Multiplier> entries;
    auto per_strain = [&](Transition t, const std::string& stem) {
        for (auto s : kAllStrains) {
            std::string key(strain_key(s));
            std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
            entries.push_back({stem + "_" + key, {{t, s}}});
        }
    };
    per_strain(Transition::Infection, "infection");
    per_strain(Transition::HpvToCin1, "hpv_to_cin1");
    per_strain(Transition::HpvClearance, "hpv_clearance");
    per_strain(Transition::Cin1ToCin23, "cin1_to_cin23");
    entries.push_back({"cin1_regression_lr", {{Transition::Cin1Regression, Strain::LowRisk}}});
    entries.push_back({"cin1_regression_hr",
                       {{Transition::Cin1Regression, Strain::HighRisk16},
                        {Transition::Cin1Regression, Strain::HighRisk18},
                        {Transition::Cin1Regression, Strain::HighRiskOther}}});
    entries.push_back({"cin23_regression",
                       {{Transition::Cin23Regression, Strain::LowRisk},
                        {Transition::Cin23Regression, Strain::HighRisk16},
                        {Transition::Cin23Regression, Strain::HighRisk18},
                        {Transition::Cin23Regression, Strain::HighRiskOther}}});
    entries.push_back({"cin23_to_cancer_hr16", {{Transition::Cin23ToCancer, Strain::HighRisk16}}});
    entries.push_back({"cin23_to_cancer_hr18", {{Transition::Cin23ToCancer, Strain::HighRisk18}}});
    entries.push_back({"cin23_to_cancer_hrother", {{Transition::Cin23ToCancer, Strain::HighRiskOther}}});
    per_strain(Transition::ImmuneDegree, "immune_degree");
    return MultiplierMap(std::move(entries));
}

EffectiveTransitionTable apply_multipliers(const BaselineTransitionTable& baseline, const MultiplierMap& map,
                                           std::span<const double> multipliers)
{
    if (multipliers.size() != map.size()) {
        throw AlignmentError("got " + std::to_string(multipliers.size()) + " multipliers for a map of " +
                             std::to_string(map.size()));
    }
    EffectiveTransitionTable out{baseline};
    for (std::size_t i = 0; i < map.size(); ++i) {
        const double m = multipliers[i];
        if (!(m >= 0.0) || !std::isfinite(m)) {
            throw DomainError("multiplier '" + map[i].name + "' must be finite and non-negative");
        }
        for (const auto& e : map[i].edges) {
            for (std::size_t b = 0; b < baseline.band_count(); ++b) {
                out.table.value(e.transition, e.strain, b) =
                    std::clamp(baseline.value(e.transition, e.strain, b) * m, 0.0, 1.0);
            }
        }
    }
    check_rows(out.table, [](const std::string& msg) { throw InfeasibleParameterError("scaled " + msg); });
    return out;
}

std::size_t CohortConfig::cycle_count() const
{
    return static_cast<std::size_t>(std::llround((end_age - start_age) * 12.0 / cycle_months));
}

void CohortConfig::validate() const
{
    if (cohort_size == 0) {
        throw ConfigError("cohort_size must be positive");
    }
    if (!(start_age >= 0.0) || !(start_age < end_age) || !std::isfinite(end_age)) {
        throw ConfigError("cohort ages need 0 <= start_age < end_age");
    }
    if (cycle_months <= 0) {
        throw ConfigError("cycle_months must be positive");
    }
    if (cycle_count() == 0) {
        throw ConfigError("cohort horizon is shorter than one cycle");
    }
}

CohortSimulation simulate_cohort(std::span<const double> multipliers, const MultiplierMap& map,
                                 const CohortConfig& config, const BaselineTransitionTable& baseline)
{
    return simulate_cohort(apply_multipliers(baseline, map, multipliers), config);
}

CohortSimulation simulate_cohort(const EffectiveTransitionTable& effective, const CohortConfig& config)
{
    config.validate();
    const auto& table = effective.table;
    if (table.age_band_lower.empty() || table.age_band_lower.front() > config.start_age) {
        throw ConfigError("transition age bands must cover the cohort start age");
    }
    const std::size_t n_cycles = config.cycle_count();
    const std::size_t n_bands  = table.band_count();
    const double years_per_cycle = config.cycle_months / 12.0;

    // Per-cycle lookups.
    struct CycleInfo {
        std::uint16_t band;
        std::int8_t prevalence_band;
        std::int8_t incidence_band;
        bool young;
        double background_death;
    };
    std::vector<CycleInfo> cycles(n_cycles);
    for (std::size_t m = 0; m < n_cycles; ++m) {
        const double age = config.start_age + static_cast<double>(m) * years_per_cycle;
        CycleInfo& c     = cycles[m];
        c.band           = static_cast<std::uint16_t>(band_of(table.age_band_lower, age));
        c.prevalence_band = -1;
        for (std::size_t b = 0; b < kPrevalenceBands.size(); ++b) {
            if (age >= kPrevalenceBands[b].first && age < kPrevalenceBands[b].second) {
                c.prevalence_band = static_cast<std::int8_t>(b);
            }
        }
        const double inc = std::floor((age - kIncidenceFirstAge) / kIncidenceBandWidthYears);
        c.incidence_band = (inc >= 0.0 && inc < static_cast<double>(kIncidenceBands)) ? static_cast<std::int8_t>(inc)
                                                                                        : std::int8_t{-1};
        c.young = age < kYoungAgeLimit;
        const double annual = table.mortality_band_lower.front() > age
                                  ? table.mortality_annual.front()
                                  : table.mortality_annual[band_of(table.mortality_band_lower, age)];
        c.background_death = 1.0 - std::pow(1.0 - annual, years_per_cycle);
    }

    // Cumulative thresholds per age band. Well rows depend on which strains have been cleared.
    constexpr std::size_t kMasks = 1u << kStrainCount;
    std::vector<std::array<std::array<double, kStrainCount>, kMasks>> well_cum(n_bands);
    std::vector<std::array<std::array<double, 2>, kStrainCount>> hpv_cum(n_bands), cin1_cum(n_bands),
        cin23_cum(n_bands);
    for (std::size_t b = 0; b < n_bands; ++b) {
        for (std::size_t mask = 0; mask < kMasks; ++mask) {
            double acc = 0.0;
            for (auto s : kAllStrains) {
                double p = table.value(Transition::Infection, s, b);
                if (mask & (1u << idx(s))) {
                    p *= 1.0 - table.value(Transition::ImmuneDegree, s, b);
                }
                acc += p;
                well_cum[b][mask][idx(s)] = acc;
            }
        }
        for (auto s : kAllStrains) {
            const double to_cin1 = table.value(Transition::HpvToCin1, s, b);
            hpv_cum[b][idx(s)]   = {to_cin1, to_cin1 + table.value(Transition::HpvClearance, s, b)};
            const double to_cin23 = table.value(Transition::Cin1ToCin23, s, b);
            cin1_cum[b][idx(s)]   = {to_cin23, to_cin23 + table.value(Transition::Cin1Regression, s, b)};
            const double to_cancer = table.value(Transition::Cin23ToCancer, s, b);
            cin23_cum[b][idx(s)]   = {to_cancer, to_cancer + table.value(Transition::Cin23Regression, s, b)};
        }
    }
    const std::array<double, 3> cancer_death{table.cancer.local_death, table.cancer.regional_death,
                                             table.cancer.distant_death};

    // Integer accumulators: totals are exact and independent of the order individuals are processed.
    std::array<std::array<std::uint64_t, 2>, kStrainCount> duration_sum{}, duration_count{};
    std::array<std::uint64_t, kPrevalenceBands.size()> prev_num{}, prev_den{};
    std::array<std::uint64_t, kStrainCount> cin1_time{}, cin23_time{}, cancer_by_strain{};
    std::array<std::uint64_t, kIncidenceBands> cancer_free_time{}, incident{};
    std::vector<std::uint32_t> deaths_at(n_cycles + 1, 0);

    CohortSimulation result;
    result.cohort_size = config.cohort_size;
    result.census.assign(n_cycles + 1, StateCounts{});

    constexpr double kToUnit = 1.0 / 4294967296.0;
    const auto seed_lo = static_cast<std::uint32_t>(config.seed);
    const auto seed_hi = static_cast<std::uint32_t>(config.seed >> 32);

    for (std::size_t person = 0; person < config.cohort_size; ++person) {
        std::seed_seq seq{seed_lo, seed_hi, static_cast<std::uint32_t>(person),
                          static_cast<std::uint32_t>(static_cast<std::uint64_t>(person) >> 32)};
        boost::random::taus88 rng(seq);

        std::uint8_t state   = kWell;
        std::uint8_t cleared = 0;
        std::size_t infected_at = 0;
        bool infected_young     = false;
        bool died               = false;

        for (std::size_t m = 0; m < n_cycles; ++m) {
            const CycleInfo& c = cycles[m];
            ++result.census[m][state];

            const bool in_cancer = state >= kCancerLocal;
            if (c.prevalence_band >= 0) {
                ++prev_den[c.prevalence_band];
                if (state >= kHpvBase && state < kCancerLocal && (state - kHpvBase) % kStrainCount != 0) {
                    ++prev_num[c.prevalence_band];
                }
            }
            if (state >= kCin1Base && state < kCin23Base) {
                ++cin1_time[state - kCin1Base];
            }
            else if (state >= kCin23Base && state < kCancerLocal) {
                ++cin23_time[state - kCin23Base];
            }
            if (c.incidence_band >= 0 && !in_cancer) {
                ++cancer_free_time[c.incidence_band];
            }

            const double u_death = rng() * kToUnit;
            const double u_move  = rng() * kToUnit;

            double q = c.background_death;
            if (in_cancer) {
                q = 1.0 - (1.0 - q) * (1.0 - cancer_death[state - kCancerLocal]);
            }
            if (u_death < q) {
                ++deaths_at[m + 1];
                died = true;
                break;
            }

            if (state == kWell) {
                const auto& cum = well_cum[c.band][cleared];
                for (std::size_t s = 0; s < kStrainCount; ++s) {
                    if (u_move < cum[s]) {
                        state          = static_cast<std::uint8_t>(kHpvBase + s);
                        infected_at    = m;
                        infected_young = c.young;
                        break;
                    }
                }
            }
            else if (state < kCin1Base) {
                const std::size_t s = state - kHpvBase;
                const auto& cum     = hpv_cum[c.band][s];
                if (u_move < cum[1]) {
                    const std::size_t group = infected_young ? 0 : 1;
                    duration_sum[s][group] += (m - infected_at) * static_cast<std::uint64_t>(config.cycle_months);
                    ++duration_count[s][group];
                    if (u_move < cum[0]) {
                        state = static_cast<std::uint8_t>(kCin1Base + s);
                    }
                    else {
                        state = kWell;
                        cleared |= static_cast<std::uint8_t>(1u << s);
                        ++result.clearances;
                    }
                }
            }
            else if (state < kCin23Base) {
                const std::size_t s = state - kCin1Base;
                const auto& cum     = cin1_cum[c.band][s];
                if (u_move < cum[0]) {
                    state = static_cast<std::uint8_t>(kCin23Base + s);
                }
                else if (u_move < cum[1]) {
                    state = kWell;
                    cleared |= static_cast<std::uint8_t>(1u << s);
                    ++result.clearances;
                }
            }
            else if (state < kCancerLocal) {
                const std::size_t s = state - kCin23Base;
                const auto& cum     = cin23_cum[c.band][s];
                if (u_move < cum[0]) {
                    state = kCancerLocal;
                    ++cancer_by_strain[s];
                    ++result.incident_cancers;
                    if (c.incidence_band >= 0) {
                        ++incident[c.incidence_band];
                    }
                }
                else if (u_move < cum[1]) {
                    state = static_cast<std::uint8_t>(kCin1Base + s);
                }
            }
            else if (state == kCancerLocal) {
                if (u_move < table.cancer.local_to_regional) {
                    state = kCancerRegional;
                }
            }
            else if (state == kCancerRegional) {
                if (u_move < table.cancer.regional_to_distant) {
                    state = kCancerDistant;
                }
            }
        }
        if (!died) {
            ++result.census[n_cycles][state];
        }
    }

    std::uint32_t dead = 0;
    for (std::size_t m = 0; m <= n_cycles; ++m) {
        dead += deaths_at[m];
        result.census[m][kDead] = dead;
    }

    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    ModelOutputs& out = result.outputs;
    out.assign(kOutputCount, 0.0);
    for (std::size_t group = 0; group < 2; ++group) {
        for (std::size_t k = 0; k < kStrainCount; ++k) {
            const std::size_t s = idx(kDurationOrder[k]);
            out[kOutDuration + group * kStrainCount + k] =
                ratio(static_cast<double>(duration_sum[s][group]), static_cast<double>(duration_count[s][group]));
        }
    }
    for (std::size_t b = 0; b < kPrevalenceBands.size(); ++b) {
        out[kOutPrevalence + b] = ratio(static_cast<double>(prev_num[b]), static_cast<double>(prev_den[b]));
    }
    double cin1_total = 0.0, cin23_total = 0.0, cancer_total = 0.0;
    for (std::size_t s = 0; s < kStrainCount; ++s) {
        cin1_total += static_cast<double>(cin1_time[s]);
        cin23_total += static_cast<double>(cin23_time[s]);
        cancer_total += static_cast<double>(cancer_by_strain[s]);
    }
    out[kOutCin1 + 0]   = ratio(static_cast<double>(cin1_time[idx(Strain::HighRisk16)]), cin1_total);
    out[kOutCin1 + 1]   = ratio(static_cast<double>(cin1_time[idx(Strain::HighRiskOther)]), cin1_total);
    out[kOutCin23 + 0]  = ratio(static_cast<double>(cin23_time[idx(Strain::HighRisk16)]), cin23_total);
    out[kOutCin23 + 1]  = ratio(static_cast<double>(cin23_time[idx(Strain::HighRisk18)]), cin23_total);
    out[kOutCin23 + 2]  = ratio(static_cast<double>(cin23_time[idx(Strain::HighRiskOther)]), cin23_total);
    out[kOutCancer + 0] = ratio(static_cast<double>(cancer_by_strain[idx(Strain::HighRisk16)]), cancer_total);
    out[kOutCancer + 1] = ratio(static_cast<double>(cancer_by_strain[idx(Strain::HighRisk18)]), cancer_total);
    for (std::size_t b = 0; b < kIncidenceBands; ++b) {
        const double woman_years = static_cast<double>(cancer_free_time[b]) * years_per_cycle;
        out[kOutIncidence + b]   = ratio(static_cast<double>(incident[b]) * 1e5, woman_years);
    }
    return result;
}

StateCounts state_census(const CohortSimulation& simulation, std::size_t cycle)
{
    if (cycle >= simulation.census.size()) {
        throw DomainError("cycle " + std::to_string(cycle) + " outside the simulated range 0.." +
                          std::to_string(simulation.census.size() - 1));
    }
    return simulation.census[cycle];
}

std::vector<std::string> output_names()
{
    std::vector<std::string> names;
    const std::array<std::string_view, kStrainCount> label{"Low risk", "High risk (other)", "High risk 16",
                                                           "High risk 18"};
    for (std::string_view age : {"<30 years", ">30 years"}) {
        for (auto l : label) {
            names.push_back("Duration of HPV infection: " + std::string(l) + ", " + std::string(age));
        }
    }
    for (const auto& [lo, hi] : kPrevalenceBands) {
        names.push_back("Prevalence of high-risk HPV infection: " + std::to_string(static_cast<int>(lo)) + "-" +
                        std::to_string(static_cast<int>(hi) - 1) + " years");
    }
    names.push_back("HPV type among women with CIN1: High risk 16");
    names.push_back("HPV type among women with CIN1: High risk (other)");
    names.push_back("HPV type among women with CIN23: High risk 16");
    names.push_back("HPV type among women with CIN23: High risk 18");
    names.push_back("HPV type among women with CIN23: High risk (other)");
    names.push_back("HPV type among women with cancer: High risk 16");
    names.push_back("HPV type among women with cancer: High risk 18");
    for (std::size_t b = 0; b < kIncidenceBands; ++b) {
        const int lo = static_cast<int>(kIncidenceFirstAge + kIncidenceBandWidthYears * static_cast<double>(b));
        names.push_back("Incidence of invasive cancer: " + std::to_string(lo) + "-" + std::to_string(lo + 4) +
                        " years");
    }
    return names;
}

// ---------------------------------------------------------------------------------------------
// Configuration file

namespace
{

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    if (!obj.is_object()) {
        throw ConfigError(where + " must be an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

double number(const json& v, const std::string& where)
{
    if (!v.is_number()) {
        throw ConfigError(where + " must be a number");
    }
    return v.get<double>();
}

std::vector<double> number_list(const json& v, const std::string& where)
{
    if (!v.is_array()) {
        throw ConfigError(where + " must be an array of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

} // namespace

HpvModelConfig parse_hpv_config(std::string_view json_text, const std::string& source_name)
{
    json root;
    try {
        root = json::parse(json_text);
    }
    catch (const json::parse_error& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    reject_unknown_keys(root, {"description", "age_band_lower", "transitions", "cancer", "mortality", "multipliers",
                               "cohort"},
                        source_name);

    HpvModelConfig cfg;
    auto& base = cfg.baseline;
    if (!root.contains("age_band_lower")) {
        throw ConfigError(source_name + ": missing age_band_lower");
    }
    base.age_band_lower = number_list(root["age_band_lower"], "age_band_lower");
    const std::size_t n_bands = base.age_band_lower.size();
    for (auto& per_strain : base.values) {
        for (auto& v : per_strain) {
            v.assign(n_bands, 0.0);
        }
    }

    if (root.contains("transitions")) {
        const json& tr = root["transitions"];
        if (!tr.is_object()) {
            throw ConfigError(source_name + ": transitions must be an object");
        }
        for (const auto& [tkey, by_strain] : tr.items()) {
            const Transition t = transition_from_key(tkey);
            if (!by_strain.is_object()) {
                throw ConfigError("transitions." + tkey + " must map strains to values");
            }
            for (const auto& [skey, val] : by_strain.items()) {
                const Strain s          = strain_from_key(skey);
                const std::string where = "transitions." + tkey + "." + skey;
                auto& dst               = base.values[idx(t)][idx(s)];
                if (val.is_number()) {
                    dst.assign(n_bands, val.get<double>());
                }
                else {
                    dst = number_list(val, where);
                    if (dst.size() != n_bands) {
                        throw ConfigError(where + " needs " + std::to_string(n_bands) + " age-band values");
                    }
                }
            }
        }
    }

    if (root.contains("cancer")) {
        const json& ca = root["cancer"];
        reject_unknown_keys(ca, {"local_to_regional", "regional_to_distant", "local_death", "regional_death",
                                 "distant_death"},
                            "cancer");
        auto get = [&](const char* key, double& dst) {
            if (ca.contains(key)) {
                dst = number(ca[key], std::string("cancer.") + key);
            }
        };
        get("local_to_regional", base.cancer.local_to_regional);
        get("regional_to_distant", base.cancer.regional_to_distant);
        get("local_death", base.cancer.local_death);
        get("regional_death", base.cancer.regional_death);
        get("distant_death", base.cancer.distant_death);
    }

    if (!root.contains("mortality")) {
        throw ConfigError(source_name + ": missing mortality");
    }
    {
        const json& mo = root["mortality"];
        reject_unknown_keys(mo, {"age_band_lower", "annual_probability"}, "mortality");
        if (!mo.contains("age_band_lower") || !mo.contains("annual_probability")) {
            throw ConfigError("mortality needs age_band_lower and annual_probability");
        }
        base.mortality_band_lower = number_list(mo["age_band_lower"], "mortality.age_band_lower");
        base.mortality_annual     = number_list(mo["annual_probability"], "mortality.annual_probability");
    }
    base.validate();

    if (root.contains("multipliers")) {
        const json& ml = root["multipliers"];
        if (!ml.is_array()) {
            throw ConfigError("multipliers must be an array");
        }
        std::vector<Multiplier> entries;
        for (const auto& m : ml) {
            reject_unknown_keys(m, {"name", "edges"}, "multiplier entry");
            if (!m.contains("name") || !m["name"].is_string() || !m.contains("edges") || !m["edges"].is_array()) {
                throw ConfigError("each multiplier needs a name and an edges array");
            }
            Multiplier entry{m["name"].get<std::string>(), {}};
            for (const auto& e : m["edges"]) {
                reject_unknown_keys(e, {"transition", "strain"}, "multiplier edge");
                if (!e.contains("transition") || !e.contains("strain") || !e["transition"].is_string() ||
                    !e["strain"].is_string()) {
                    throw ConfigError("multiplier '" + entry.name + "' has an edge without transition/strain");
                }
                entry.edges.push_back({transition_from_key(e["transition"].get<std::string>()),
                                       strain_from_key(e["strain"].get<std::string>())});
            }
            entries.push_back(std::move(entry));
        }
        cfg.multipliers = MultiplierMap(std::move(entries));
    }
    else {
        cfg.multipliers = default_multiplier_map();
    }

    if (root.contains("cohort")) {
        const json& co = root["cohort"];
        reject_unknown_keys(co, {"cohort_size", "start_age", "end_age", "cycle_months", "seed"}, "cohort");
        if (co.contains("cohort_size")) {
            if (!co["cohort_size"].is_number_unsigned()) {
                throw ConfigError("cohort.cohort_size must be a non-negative integer");
            }
            cfg.cohort.cohort_size = co["cohort_size"].get<std::size_t>();
        }
        if (co.contains("start_age")) {
            cfg.cohort.start_age = number(co["start_age"], "cohort.start_age");
        }
        if (co.contains("end_age")) {
            cfg.cohort.end_age = number(co["end_age"], "cohort.end_age");
        }
        if (co.contains("cycle_months")) {
            if (!co["cycle_months"].is_number_integer()) {
                throw ConfigError("cohort.cycle_months must be an integer");
            }
            cfg.cohort.cycle_months = co["cycle_months"].get<int>();
        }
        if (co.contains("seed")) {
            if (!co["seed"].is_number_unsigned()) {
                throw ConfigError("cohort.seed must be a non-negative integer");
            }
            cfg.cohort.seed = co["seed"].get<std::uint64_t>();
        }
    }
    cfg.cohort.validate();
    if (base.age_band_lower.front() > cfg.cohort.start_age) {
        throw ConfigError("age_band_lower must start at or below the cohort start age");
    }
    return cfg;
}

HpvModelConfig load_hpv_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open HPV model file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_hpv_config(buffer.str(), path.string());
}

} // namespace calib::hpv
