#include "calib/config.h"
#include "calib/error.h"
#include "calib/models.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace calib
{

namespace
{

using nlohmann::json;

void check_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed)
{
    if (!j.is_object()) {
        throw ConfigError(path + " must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError((path.empty() ? key : path + "." + key) + ": unknown key");
        }
    }
}

std::string join(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

double number(const json& j, const std::string& key, const std::string& path)
{
    if (!j.contains(key)) {
        throw ConfigError(join(path, key) + ": required");
    }
    const auto& v = j.at(key);
    if (!v.is_number()) {
        throw ConfigError(join(path, key) + ": must be a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw ConfigError(join(path, key) + ": must be finite");
    }
    return x;
}

std::optional<double> optional_number(const json& j, const std::string& key, const std::string& path)
{
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return number(j, key, path);
}

double positive(const json& j, const std::string& key, const std::string& path)
{
    const double x = number(j, key, path);
    if (!(x > 0.0)) {
        throw ConfigError(join(path, key) + ": must be positive (got " + j.at(key).dump() + ")");
    }
    return x;
}

std::uint64_t count(const json& j, const std::string& key, const std::string& path)
{
    if (!j.contains(key)) {
        throw ConfigError(join(path, key) + ": required");
    }
    const auto& v = j.at(key);
    if (!v.is_number_unsigned()) {
        throw ConfigError(join(path, key) + ": must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::string text(const json& j, const std::string& key, const std::string& path)
{
    if (!j.contains(key)) {
        throw ConfigError(join(path, key) + ": required");
    }
    const auto& v = j.at(key);
    if (!v.is_string() || v.get<std::string>().empty()) {
        throw ConfigError(join(path, key) + ": must be a non-empty string");
    }
    return v.get<std::string>();
}

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p)
{
    const std::filesystem::path path(p);
    return (path.is_absolute() ? path : base_dir / path).lexically_normal();
}

PriorSpec parse_prior(const json& j, const std::string& path, bool with_parameter)
{
    const std::string kind = text(j, "kind", path);
    std::optional<double> init_lower;
    std::optional<double> init_upper;
    auto with_common = [&](std::initializer_list<std::string_view> keys) {
        std::vector<std::string_view> all(keys);
        all.insert(all.end(), {"kind", "init_lower", "init_upper"});
        if (with_parameter) {
            all.push_back("parameter");
        }
        for (const auto& [key, value] : j.items()) {
            if (std::find(all.begin(), all.end(), key) == all.end()) {
                throw ConfigError(join(path, key) + ": unknown key for a " + kind + " prior");
            }
        }
        init_lower = optional_number(j, "init_lower", path);
        init_upper = optional_number(j, "init_upper", path);
        if (init_lower.has_value() != init_upper.has_value()) {
            throw ConfigError(path + ": init_lower and init_upper must be given together");
        }
        if (init_lower && !(*init_lower < *init_upper)) {
            throw ConfigError(join(path, "init_upper") + ": must exceed init_lower");
        }
    };

    if (kind == "improper_uniform") {
        with_common({"lower", "upper"});
        const double lower = optional_number(j, "lower", path).value_or(-kInf);
        const double upper = optional_number(j, "upper", path).value_or(kInf);
        if (!(lower < upper)) {
            throw ConfigError(join(path, "upper") + ": must exceed lower");
        }
        if (!init_lower) {
            if (!std::isfinite(lower) || !std::isfinite(upper)) {
                throw ConfigError(path + ": an improper_uniform prior with an infinite bound needs init_lower and "
                                         "init_upper");
            }
            init_lower = lower;
            init_upper = upper;
        }
        if (*init_lower < lower || *init_upper > upper) {
            throw ConfigError(path + ": initialisation bounds must lie within [lower, upper]");
        }
        return PriorSpec(ImproperUniform{lower, upper}, init_lower, init_upper);
    }
    if (kind == "uniform") {
        with_common({"lower", "upper"});
        const double lower = number(j, "lower", path);
        const double upper = number(j, "upper", path);
        if (!(lower < upper)) {
            throw ConfigError(join(path, "upper") + ": must exceed lower");
        }
        return PriorSpec(Uniform{lower, upper}, init_lower, init_upper);
    }
    if (kind == "normal") {
        with_common({"mean", "sd"});
        return PriorSpec(Normal{number(j, "mean", path), positive(j, "sd", path)}, init_lower, init_upper);
    }
    if (kind == "gamma") {
        with_common({"shape", "rate"});
        return PriorSpec(Gamma{positive(j, "shape", path), positive(j, "rate", path)}, init_lower, init_upper);
    }
    throw ConfigError(join(path, "kind") + ": unknown prior kind '" + kind +
                      "' (expected improper_uniform, uniform, normal or gamma)");
}

json prior_to_json(const std::string& parameter, const PriorSpec& spec)
{
    json j = {{"parameter", parameter}, {"kind", spec.kind_name()}};
    std::visit(
        [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, ImproperUniform>) {
                if (std::isfinite(d.lower)) {
                    j["lower"] = d.lower;
                }
                if (std::isfinite(d.upper)) {
                    j["upper"] = d.upper;
                }
            }
            else if constexpr (std::is_same_v<D, Uniform>) {
                j["lower"] = d.a;
                j["upper"] = d.b;
            }
            else if constexpr (std::is_same_v<D, Normal>) {
                j["mean"] = d.mu;
                j["sd"]   = d.sigma;
            }
            else {
                j["shape"] = d.shape;
                j["rate"]  = d.rate;
            }
        },
        spec.distribution());
    if (spec.init_lower()) {
        j["init_lower"] = *spec.init_lower();
        j["init_upper"] = *spec.init_upper();
    }
    return j;
}

/// Parameter name and spec per entry of a "priors" array.
std::vector<std::pair<std::string, PriorSpec>> parse_prior_list(const json& list, const std::string& path)
{
    if (!list.is_array()) {
        throw ConfigError(path + ": must be an array");
    }
    std::vector<std::pair<std::string, PriorSpec>> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string entry = path + "[" + std::to_string(i) + "]";
        if (!list[i].is_object()) {
            throw ConfigError(entry + ": must be an object");
        }
        const std::string name = text(list[i], "parameter", entry);
        if (!seen.insert(name).second) {
            throw ConfigError(join(entry, "parameter") + ": duplicate prior for '" + name + "'");
        }
        out.emplace_back(name, parse_prior(list[i], entry, true));
    }
    return out;
}

JointPrior assemble_priors(const json& doc, const std::vector<std::string>& names)
{
    if (!doc.contains("priors")) {
        throw ConfigError("priors: required");
    }
    const auto entries = parse_prior_list(doc.at("priors"), "priors");
    std::optional<PriorSpec> fallback;
    if (doc.contains("default_prior")) {
        fallback = parse_prior(doc.at("default_prior"), "default_prior", false);
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (std::find(names.begin(), names.end(), entries[i].first) == names.end()) {
            throw ConfigError("priors[" + std::to_string(i) + "].parameter: the model has no parameter '" +
                              entries[i].first + "'");
        }
    }
    std::vector<PriorSpec> specs;
    for (const auto& name : names) {
        auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.first == name; });
        if (it != entries.end()) {
            specs.push_back(it->second);
        }
        else if (fallback) {
            specs.push_back(*fallback);
        }
        else {
            throw ConfigError("priors: no prior for parameter '" + name + "' and no default_prior");
        }
    }
    return JointPrior(names, std::move(specs));
}

Model build_model(const json& section, const std::filesystem::path& base_dir, json& normalised)
{
    const std::string id = text(section, "id", "model");
    normalised           = {{"id", id}};
    if (id == "sis") {
        check_keys(section, "model", {"id", "options"});
        sis::SisSimConfig sim;
        if (section.contains("options")) {
            const auto& o = section.at("options");
            check_keys(o, "model.options", {"s0", "i0", "dt", "horizon", "equilibrium_tol"});
            sim.s0              = optional_number(o, "s0", "model.options").value_or(sim.s0);
            sim.i0              = optional_number(o, "i0", "model.options").value_or(sim.i0);
            sim.dt              = optional_number(o, "dt", "model.options").value_or(sim.dt);
            sim.horizon         = optional_number(o, "horizon", "model.options").value_or(sim.horizon);
            sim.equilibrium_tol = optional_number(o, "equilibrium_tol", "model.options").value_or(sim.equilibrium_tol);
        }
        try {
            sis::validate(sim);
        }
        catch (const Error& e) {
            throw ConfigError(std::string("model.options: ") + e.what());
        }
        normalised["options"] = {{"s0", sim.s0},
                                 {"i0", sim.i0},
                                 {"dt", sim.dt},
                                 {"horizon", sim.horizon},
                                 {"equilibrium_tol", sim.equilibrium_tol}};
        return make_sis_model(sim);
    }
    if (id == "hpv" || id == "custom-config") {
        check_keys(section, "model", {"id", "definition", "cohort"});
        const auto definition = resolve(base_dir, text(section, "definition", "model"));
        if (!std::filesystem::is_regular_file(definition)) {
            throw ConfigError("model.definition: file not found: " + definition.string());
        }
        auto config = std::make_shared<hpv::HpvModelConfig>();
        try {
            *config = hpv::load_hpv_config(definition);
        }
        catch (const Error& e) {
            throw ConfigError(std::string("model.definition: ") + e.what());
        }
        if (section.contains("cohort")) {
            const auto& c = section.at("cohort");
            check_keys(c, "model.cohort", {"cohort_size", "seed", "start_age", "end_age", "cycle_months"});
            if (c.contains("cohort_size")) {
                config->cohort.cohort_size = count(c, "cohort_size", "model.cohort");
            }
            if (c.contains("seed")) {
                config->cohort.seed = count(c, "seed", "model.cohort");
            }
            if (c.contains("cycle_months")) {
                config->cohort.cycle_months = static_cast<int>(count(c, "cycle_months", "model.cohort"));
            }
            config->cohort.start_age = optional_number(c, "start_age", "model.cohort").value_or(config->cohort.start_age);
            config->cohort.end_age   = optional_number(c, "end_age", "model.cohort").value_or(config->cohort.end_age);
        }
        try {
            config->cohort.validate();
        }
        catch (const Error& e) {
            throw ConfigError(std::string("model.cohort: ") + e.what());
        }
        normalised["definition"] = definition.string();
        normalised["cohort"]     = {{"cohort_size", config->cohort.cohort_size},
                                    {"seed", config->cohort.seed},
                                    {"start_age", config->cohort.start_age},
                                    {"end_age", config->cohort.end_age},
                                    {"cycle_months", config->cohort.cycle_months}};
        Model model = make_hpv_model(config);
        model.id    = id;
        return model;
    }
    throw ConfigError("model.id: unknown model '" + id + "' (expected sis, hpv or custom-config)");
}

std::filesystem::path resolve_output(const std::string& output, const std::filesystem::path& base_dir)
{
    const char* root = std::getenv(kOutputRootVariable);
    const std::filesystem::path p(output);
    if (root && *root) {
        const std::filesystem::path r(root);
        return (p.is_absolute() ? r / p.filename() : r / p).lexically_normal();
    }
    return resolve(base_dir, output);
}

void check_set_id(const std::string& id, const std::string& path)
{
    if (id == "." || id == ".." || id.find_first_of("/\\") != std::string::npos) {
        throw ConfigError(path + ": '" + id + "' is not usable as a directory name");
    }
}

} // namespace

RunConfiguration parse_run_configuration(std::string_view json_text, const std::filesystem::path& base_dir,
                                         const std::string& source_name)
{
    json doc;
    try {
        doc = json::parse(json_text);
    }
    catch (const json::parse_error& e) {
        throw ConfigError(source_name + ": not valid JSON: " + e.what());
    }
    try {
        check_keys(doc, "", {"name", "description", "model", "targets", "priors", "default_prior", "proposal",
                             "sampler", "seeds", "output", "diagnostics", "sensitivity"});
        if (doc.contains("description") && !doc.at("description").is_string()) {
            throw ConfigError("description: must be a string");
        }

        RunConfiguration config;
        CalibrationRunSpec& run = config.run;
        run.name                = doc.contains("name") ? text(doc, "name", "") : "run";
        check_set_id(run.name, "name");

        json model_json;
        if (!doc.contains("model")) {
            throw ConfigError("model: required");
        }
        run.model               = build_model(doc.at("model"), base_dir, model_json);
        const auto names        = run.model.parameters.names();
        const std::size_t dim   = names.size();

        const auto targets_path = resolve(base_dir, text(doc, "targets", ""));
        if (!std::filesystem::is_regular_file(targets_path)) {
            throw ConfigError("targets: file not found: " + targets_path.string());
        }
        try {
            run.targets = load_target_set(targets_path);
        }
        catch (const Error& e) {
            throw ConfigError(std::string("targets: ") + e.what());
        }
        if (!run.model.output_names.empty() && run.targets.size() != run.model.output_names.size()) {
            throw ConfigError("targets: " + std::to_string(run.targets.size()) + " targets for a model with " +
                              std::to_string(run.model.output_names.size()) + " outputs");
        }

        run.prior = assemble_priors(doc, names);

        std::size_t block_size = dim;
        double fraction        = 0.05;
        json scales_json       = json::object();
        if (doc.contains("proposal")) {
            const auto& p = doc.at("proposal");
            check_keys(p, "proposal", {"block_size", "scales", "default_fraction"});
            if (p.contains("block_size")) {
                block_size = count(p, "block_size", "proposal");
                if (block_size < 1 || block_size > dim) {
                    throw ConfigError("proposal.block_size: must lie in [1, " + std::to_string(dim) + "]");
                }
            }
            if (p.contains("default_fraction")) {
                fraction = positive(p, "default_fraction", "proposal");
            }
            if (p.contains("scales")) {
                scales_json = p.at("scales");
                if (!scales_json.is_object()) {
                    throw ConfigError("proposal.scales: must be an object keyed by parameter name");
                }
            }
        }
        try {
            run.proposal = default_proposal(run.prior, block_size, fraction);
        }
        catch (const ConfigError& e) {
            throw ConfigError(std::string("proposal: ") + e.what() + "; give an explicit scale");
        }
        for (const auto& [key, value] : scales_json.items()) {
            const std::string path = "proposal.scales." + key;
            if (std::find(names.begin(), names.end(), key) == names.end()) {
                throw ConfigError(path + ": the model has no parameter '" + key + "'");
            }
            if (!value.is_number() || !(value.get<double>() >= 0.0) || !std::isfinite(value.get<double>())) {
                throw ConfigError(path + ": must be a finite non-negative number");
            }
            run.proposal.scales[run.model.parameters.index_of(key)] = value.get<double>();
        }
        run.proposal.validate(dim);

        if (!doc.contains("sampler")) {
            throw ConfigError("sampler: required");
        }
        const auto& s = doc.at("sampler");
        check_keys(s, "sampler", {"iterations", "burn_in", "thinning"});
        run.sampler = SamplerOptions::with_defaults(count(s, "iterations", "sampler"));
        if (s.contains("burn_in")) {
            run.sampler.burn_in = count(s, "burn_in", "sampler");
        }
        if (s.contains("thinning")) {
            run.sampler.thinning = count(s, "thinning", "sampler");
        }
        try {
            run.sampler.validate();
        }
        catch (const ConfigError& e) {
            throw ConfigError(std::string("sampler: ") + e.what());
        }
        if (run.sampler.recorded_length() < 10) {
            throw ConfigError("sampler: fewer than 10 recorded states per chain; diagnostics need at least 10");
        }

        if (!doc.contains("seeds") || !doc.at("seeds").is_array()) {
            throw ConfigError("seeds: required array of non-negative integers");
        }
        const auto& seeds = doc.at("seeds");
        std::set<std::uint64_t> distinct;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            if (!seeds[i].is_number_unsigned()) {
                throw ConfigError("seeds[" + std::to_string(i) + "]: must be a non-negative integer");
            }
            run.seeds.push_back(seeds[i].get<std::uint64_t>());
            if (!distinct.insert(run.seeds.back()).second) {
                throw ConfigError("seeds[" + std::to_string(i) + "]: duplicate seed");
            }
        }
        if (run.seeds.size() < 2) {
            throw ConfigError("seeds: at least 2 chains are needed for convergence diagnostics");
        }

        run.output_dir = resolve_output(text(doc, "output", ""), base_dir);

        if (doc.contains("diagnostics")) {
            const auto& d = doc.at("diagnostics");
            check_keys(d, "diagnostics", {"rhat", "correlation", "flat_ratio"});
            run.thresholds.rhat        = optional_number(d, "rhat", "diagnostics").value_or(run.thresholds.rhat);
            run.thresholds.correlation =
                optional_number(d, "correlation", "diagnostics").value_or(run.thresholds.correlation);
            run.thresholds.flat_ratio =
                optional_number(d, "flat_ratio", "diagnostics").value_or(run.thresholds.flat_ratio);
            if (!(run.thresholds.rhat > 1.0)) {
                throw ConfigError("diagnostics.rhat: must exceed 1");
            }
            if (!(run.thresholds.correlation > 0.0 && run.thresholds.correlation <= 1.0)) {
                throw ConfigError("diagnostics.correlation: must lie in (0, 1]");
            }
            if (!(run.thresholds.flat_ratio > 0.0)) {
                throw ConfigError("diagnostics.flat_ratio: must be positive");
            }
        }

        json normalised = {{"name", run.name},
                           {"model", model_json},
                           {"targets", targets_path.string()},
                           {"priors", json::array()},
                           {"proposal", {{"block_size", run.proposal.block_size}, {"scales", json::object()}}},
                           {"sampler",
                            {{"iterations", run.sampler.iterations},
                             {"burn_in", run.sampler.burn_in},
                             {"thinning", run.sampler.thinning}}},
                           {"seeds", run.seeds},
                           {"output", run.output_dir.string()},
                           {"diagnostics",
                            {{"rhat", run.thresholds.rhat},
                             {"correlation", run.thresholds.correlation},
                             {"flat_ratio", run.thresholds.flat_ratio}}}};
        for (std::size_t i = 0; i < dim; ++i) {
            normalised["priors"].push_back(prior_to_json(names[i], run.prior[i]));
            normalised["proposal"]["scales"][names[i]] = run.proposal.scales[i];
        }

        if (doc.contains("sensitivity")) {
            const auto& sw = doc.at("sensitivity");
            check_keys(sw, "sensitivity", {"prior_sets", "summarise"});
            if (!sw.contains("prior_sets") || !sw.at("prior_sets").is_array()) {
                throw ConfigError("sensitivity.prior_sets: required array");
            }
            const auto& sets = sw.at("prior_sets");
            if (sets.size() < 2) {
                throw ConfigError("sensitivity.prior_sets: a sweep needs at least 2 prior sets, got " +
                                  std::to_string(sets.size()));
            }
            SensitivitySweepSpec sweep;
            std::set<std::string> ids;
            for (std::size_t i = 0; i < sets.size(); ++i) {
                const std::string path = "sensitivity.prior_sets[" + std::to_string(i) + "]";
                check_keys(sets[i], path, {"id", "priors"});
                PriorSet set;
                set.id = text(sets[i], "id", path);
                check_set_id(set.id, join(path, "id"));
                if (!ids.insert(set.id).second) {
                    throw ConfigError(join(path, "id") + ": duplicate prior set id '" + set.id + "'");
                }
                if (!sets[i].contains("priors")) {
                    throw ConfigError(join(path, "priors") + ": required");
                }
                for (auto& [name, spec] : parse_prior_list(sets[i].at("priors"), join(path, "priors"))) {
                    if (std::find(names.begin(), names.end(), name) == names.end()) {
                        throw ConfigError(join(path, "priors") + ": the model has no parameter '" + name + "'");
                    }
                    set.parameters.push_back(name);
                    set.priors.push_back(spec);
                }
                sweep.prior_sets.push_back(std::move(set));
            }
            if (sw.contains("summarise")) {
                const auto& list = sw.at("summarise");
                if (!list.is_array()) {
                    throw ConfigError("sensitivity.summarise: must be an array of parameter names");
                }
                for (const auto& n : list) {
                    if (!n.is_string() || std::find(names.begin(), names.end(), n.get<std::string>()) == names.end()) {
                        throw ConfigError("sensitivity.summarise: unknown parameter " + n.dump());
                    }
                    sweep.summarise.push_back(n.get<std::string>());
                }
            }
            normalised["sensitivity"] = sw;
            config.sweep              = std::move(sweep);
        }

        run.config_json = normalised.dump(2) + "\n";
        if (config.sweep) {
            config.sweep->base = run;
        }
        return config;
    }
    catch (const ConfigError& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    catch (const json::exception& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    catch (const DomainError& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
}

RunConfiguration load_run_configuration(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read configuration '" + path.string() + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto base         = std::filesystem::absolute(path).parent_path();
    auto config       = parse_run_configuration(buffer.str(), base, path.string());
    config.source     = path;
    return config;
}

JointPrior priors_from_config_json(std::string_view json_text, const std::vector<std::string>& parameter_names)
{
    try {
        return assemble_priors(json::parse(json_text), parameter_names);
    }
    catch (const json::exception& e) {
        throw ConfigError(std::string("priors: ") + e.what());
    }
}

std::string prior_json_text(const std::string& parameter, const PriorSpec& spec)
{
    return prior_to_json(parameter, spec).dump();
}

} // namespace calib
