#include "calib/models.h"
#include "calib/error.h"

#include <algorithm>

namespace calib
{

namespace
{

std::vector<DerivedQuantity> sis_derived(std::size_t c, std::size_t p, std::size_t d)
{
    return {
        {"beta", [c, p](std::span<const double> theta) { return theta[c] * theta[p]; }},
        {"gamma", [d](std::span<const double> theta) { return 1.0 / theta[d]; }},
    };
}

} // namespace

Model make_sis_model(const sis::SisSimConfig& config)
{
    sis::validate(config);
    Model model;
    model.id         = "sis";
    model.parameters = ParameterSpace({{"c", 0.0, kInf}, {"p", 0.0, 1.0}, {"d", 0.0, kInf}});
    model.evaluate   = [config](std::span<const double> theta) {
        return sis::simulate_sis({theta[0], theta[1], theta[2]}, config);
    };
    model.derived      = sis_derived(0, 1, 2);
    model.output_names = {"P(infected)", "P(susceptible)"};
    return model;
}

Model make_hpv_model(std::shared_ptr<const hpv::HpvModelConfig> config)
{
    if (!config) {
        throw ConfigError("HPV model needs a configuration");
    }
    config->baseline.validate();
    config->cohort.validate();
    std::vector<Parameter> parameters;
    for (const auto& name : config->multipliers.names()) {
        parameters.push_back({name, 0.0, kInf});
    }
    Model model;
    model.id         = "hpv";
    model.parameters = ParameterSpace(std::move(parameters));
    model.evaluate   = [config](std::span<const double> theta) {
        return hpv::simulate_cohort(theta, config->multipliers, config->cohort, config->baseline).outputs;
    };
    model.output_names = hpv::output_names();
    return model;
}

std::vector<DerivedQuantity> derived_quantities_for(const std::string& model_id,
                                                    const std::vector<std::string>& parameter_names)
{
    if (model_id != "sis") {
        return {};
    }
    auto find = [&](const char* name) {
        return static_cast<std::size_t>(std::find(parameter_names.begin(), parameter_names.end(), name) -
                                        parameter_names.begin());
    };
    const std::size_t c = find("c");
    const std::size_t p = find("p");
    const std::size_t d = find("d");
    if (std::max({c, p, d}) >= parameter_names.size()) {
        return {};
    }
    return sis_derived(c, p, d);
}

} // namespace calib
