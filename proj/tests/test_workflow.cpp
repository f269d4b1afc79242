#include "calib/chain_io.h"
#include "calib/config.h"
#include "calib/error.h"
#include "calib/workflow.h"

#include "scratch_dir.h"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace calib;

namespace
{

// y = a + b with a target at 3: a ridge along a + b = 3 resolved only by the priors.
CalibrationRunSpec linear_spec()
{
    CalibrationRunSpec spec;
    spec.name             = "linear";
    spec.model.id         = "linear";
    spec.model.parameters = ParameterSpace({{"a"}, {"b"}});
    spec.model.evaluate   = [](std::span<const double> x) { return ModelOutputs{x[0] + x[1]}; };
    spec.model.output_names = {"y"};
    spec.prior   = JointPrior({"a", "b"}, {PriorSpec(Normal{1.0, 1.0}), PriorSpec(Normal{2.0, 1.0})});
    spec.targets = TargetSet({{"y", 3.0, 0.1}});
    spec.proposal = {{0.3, 0.3}, 2};
    spec.sampler  = {6000, 1000, 5};
    spec.seeds    = {1, 2, 3};
    return spec;
}

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

PriorSet prior_set_for_a(const std::string& id, double sd)
{
    return {id, {"a"}, {PriorSpec(Normal{1.0, sd})}};
}

} // namespace

TEST_CASE("a run persists its artifacts")
{
    ScratchDir tmp("run");
    auto spec        = linear_spec();
    spec.output_dir  = tmp / "out";
    spec.config_json = "{\"name\": \"linear\"}\n";
    const auto result = run_calibration(spec);
    CHECK(result.chains.size() == 3);
    CHECK(result.report.parameters.size() == 2);
    CHECK(result.report.correlated_pairs.size() == 1);
    for (const char* name : {"chain_1.csv", "chain_2.csv", "chain_3.csv", "chain_1.meta.json",
                             "diagnostics_report.json", "gof_trace.csv", "run_config.json"}) {
        CHECK_MESSAGE(std::filesystem::exists(spec.output_dir / name), std::string(name));
    }
    CHECK_FALSE(std::filesystem::exists(tmp / "out.lock"));
    CHECK_FALSE(std::filesystem::exists(tmp / "out.staging"));

    const auto back = read_chain_set(spec.output_dir);
    REQUIRE(back.size() == 3);
    CHECK(back[1].values == result.chains[1].values);
    CHECK(back[1].metadata.seed == 2);
    CHECK(back[1].metadata.model_id == "linear");
}

TEST_CASE("identical runs give byte-identical artifacts")
{
    ScratchDir tmp("repro");
    auto first        = linear_spec();
    first.output_dir  = tmp / "first";
    auto second       = first;
    second.output_dir = tmp / "second";
    run_calibration(first);
    run_calibration(second);
    for (const char* name : {"chain_1.csv", "chain_3.csv", "gof_trace.csv", "diagnostics_report.json"}) {
        CHECK(slurp(first.output_dir / name) == slurp(second.output_dir / name));
    }
    // Re-running into an existing directory replaces it.
    run_calibration(first);
    CHECK(slurp(first.output_dir / "chain_1.csv") == slurp(second.output_dir / "chain_1.csv"));
}

TEST_CASE("a locked output directory is refused")
{
    ScratchDir tmp("lock");
    auto spec       = linear_spec();
    spec.output_dir = tmp / "out";
    std::ofstream(tmp / "out.lock") << "1\n";
    CHECK_THROWS_AS(run_calibration(spec), IoError);
}

TEST_CASE("run validation")
{
    auto spec = linear_spec();
    spec.prior = JointPrior({"a"}, {PriorSpec(Normal{})});
    CHECK_THROWS_AS(run_calibration(spec), ConfigError);
    spec       = linear_spec();
    spec.seeds = {};
    CHECK_THROWS_AS(run_calibration(spec), ConfigError);
    spec         = linear_spec();
    spec.targets = TargetSet({{"y", 3.0, 0.1}, {"z", 1.0, 0.1}});
    CHECK_THROWS_AS(run_calibration(spec), ConfigError);
}

TEST_CASE("apply_prior_set")
{
    auto base        = linear_spec();
    base.output_dir  = "/tmp/sweep";
    base.config_json = R"({"name": "base", "priors": [], "sensitivity": {"prior_sets": []}})";
    const auto run   = apply_prior_set(base, prior_set_for_a("tight", 0.25));
    CHECK(run.name == "tight");
    CHECK(run.output_dir == std::filesystem::path("/tmp/sweep/tight"));
    CHECK(std::get<Normal>(run.prior[0].distribution()).sigma == 0.25);
    CHECK(std::get<Normal>(run.prior[1].distribution()).mu == 2.0);
    const auto doc = nlohmann::json::parse(run.config_json);
    CHECK(doc.at("name") == "tight");
    CHECK_FALSE(doc.contains("sensitivity"));
    CHECK(doc.at("priors").size() == 2);
    CHECK(doc.at("priors")[0].at("sd") == 0.25);
    CHECK_THROWS_AS(apply_prior_set(base, {"bad", {"zzz"}, {PriorSpec(Normal{})}}), ConfigError);
}

TEST_CASE("sensitivity sweep")
{
    ScratchDir tmp("sweep");
    SensitivitySweepSpec sweep;
    sweep.base            = linear_spec();
    sweep.base.output_dir = tmp / "sweep";
    sweep.summarise       = {"a"};

    SUBCASE("a single prior set is rejected")
    {
        sweep.prior_sets = {prior_set_for_a("only", 1.0)};
        CHECK_THROWS_AS(run_sensitivity(sweep), ConfigError);
    }
    SUBCASE("rows do not depend on execution order")
    {
        sweep.prior_sets = {prior_set_for_a("tight", 0.1), prior_set_for_a("loose", 10.0)};
        const auto forward = run_sensitivity(sweep);
        std::swap(sweep.prior_sets[0], sweep.prior_sets[1]);
        const auto backward = run_sensitivity(sweep);
        REQUIRE(forward.size() == 2);
        REQUIRE(backward.size() == 2);
        CHECK(forward[0].prior_set == "tight");
        CHECK(backward[1].prior_set == "tight");
        CHECK(forward[0].posterior_mean == backward[1].posterior_mean);
        CHECK(forward[1].posterior_sd == backward[0].posterior_sd);
        // A tighter prior on a pins it near its prior mean.
        CHECK(forward[0].posterior_sd < forward[1].posterior_sd);
        CHECK(std::filesystem::exists(sweep.base.output_dir / "sensitivity_summary.csv"));
        CHECK(std::filesystem::exists(sweep.base.output_dir / "tight" / "chain_1.csv"));
    }
    SUBCASE("a failing prior set is reported without aborting the sweep")
    {
        // Normal prior far outside the model's support: no start point can be found.
        sweep.base.model.parameters = ParameterSpace({{"a", 0.0, kInf}, {"b"}});
        sweep.prior_sets            = {prior_set_for_a("ok", 1.0), {"bad", {"a"}, {PriorSpec(Normal{-1e6, 1.0})}}};
        const auto rows             = run_sensitivity(sweep);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].error.empty());
        CHECK_FALSE(rows[1].error.empty());
        CHECK(std::isnan(rows[1].posterior_mean));
    }
}

TEST_CASE("shipped SIS configuration drives a short run")
{
    ScratchDir tmp("sis");
    auto text  = slurp(std::filesystem::path(CALIB_CONFIG_DIR) / "sis_informative.json");
    auto doc   = nlohmann::json::parse(text);
    doc["sampler"] = {{"iterations", 600}, {"burn_in", 100}, {"thinning", 5}};
    doc["output"]  = (tmp / "sis").string();
    const auto config = parse_run_configuration(doc.dump(), CALIB_CONFIG_DIR, "sis_short.json");
    CHECK(config.run.model.id == "sis");
    CHECK(config.run.seeds.size() == 3);
    const auto result = run_calibration(config.run);
    CHECK(result.chains.size() == 3);
    CHECK(result.chains[0].size() == 100);
    const auto stored = nlohmann::json::parse(slurp(tmp / "sis" / "run_config.json"));
    CHECK(stored.at("priors").size() == 3);
    CHECK(stored.at("sampler").at("iterations") == 600);
}
