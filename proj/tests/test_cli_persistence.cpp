#include "calib/chain_io.h"
#include "calib/config.h"
#include "calib/error.h"
#include "calib/plot_export.h"

#include "scratch_dir.h"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

using namespace calib;

namespace
{

Chain random_chain(std::mt19937_64& gen, std::size_t rows, std::size_t id)
{
    std::uniform_real_distribution<double> wide(-1e6, 1e6);
    std::uniform_int_distribution<int> exponent(-300, 300);
    Chain chain;
    chain.parameter_names = {"alpha", "beta, quoted", "gamma"};
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> row = {wide(gen), std::ldexp(wide(gen), exponent(gen)), 1.0 / 3.0 + r};
        const double gof        = (r % 17 == 0) ? std::numeric_limits<double>::quiet_NaN() : std::abs(wide(gen));
        chain.push_back(10 * (r + 1), row, {-gof / 2.0, gof, false}, gen() % 2 == 0);
    }
    chain.metadata.chain_id        = id;
    chain.metadata.seed            = gen();
    chain.metadata.options         = {10 * rows, 0, 10};
    chain.metadata.block_size      = 2;
    chain.metadata.model_id        = "toy";
    chain.metadata.acceptance_rate = 0.234;
    return chain;
}

bool same_bits(double a, double b)
{
    return (std::isnan(a) && std::isnan(b)) || std::memcmp(&a, &b, sizeof(double)) == 0;
}

int run_cli(const std::string& args)
{
    const std::string command = std::string(CALIB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status          = std::system(command.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path)
{
    std::ifstream in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (!line.empty() && line.back() == ',') {
            cells.emplace_back();
        }
        rows.push_back(cells);
    }
    return rows;
}

// A short SIS run written to dir/config.json, with output at dir/run.
std::filesystem::path write_short_config(const ScratchDir& dir, std::size_t iterations, std::vector<int> seeds)
{
    auto doc       = nlohmann::json::parse(slurp(std::filesystem::path(CALIB_CONFIG_DIR) / "sis_informative.json"));
    doc["targets"] = (std::filesystem::path(CALIB_DATA_DIR) / "sis_targets.csv").string();
    doc["sampler"] = {{"iterations", iterations}, {"burn_in", iterations / 5}, {"thinning", 5}};
    doc["seeds"]   = seeds;
    doc["output"]  = "run";
    std::ofstream(dir / "config.json") << doc.dump(2);
    return dir / "config.json";
}

} // namespace

TEST_CASE("property: chain CSV round trip is exact")
{
    std::mt19937_64 gen(4242);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t rows = trial == 0 ? 1000 : 1 + gen() % 200;
        const Chain chain      = random_chain(gen, rows, static_cast<std::size_t>(trial));
        std::stringstream buffer;
        write_chain_csv(buffer, chain);
        const Chain back = read_chain_csv(buffer);
        REQUIRE(back.size() == chain.size());
        CHECK(back.parameter_names == chain.parameter_names);
        CHECK(back.iteration == chain.iteration);
        CHECK(back.accepted == chain.accepted);
        CHECK(back.metadata.chain_id == chain.metadata.chain_id);
        bool exact = true;
        for (std::size_t i = 0; i < chain.values.size(); ++i) {
            exact = exact && same_bits(back.values[i], chain.values[i]);
        }
        for (std::size_t r = 0; r < chain.size(); ++r) {
            exact = exact && same_bits(back.gof[r], chain.gof[r]) && same_bits(back.log_posterior[r], chain.log_posterior[r]);
        }
        CHECK(exact);
    }
}

TEST_CASE("chain set round trip with metadata")
{
    ScratchDir tmp("chains");
    std::mt19937_64 gen(7);
    ChainSet set;
    set.chains = {random_chain(gen, 50, 0), random_chain(gen, 50, 1)};
    write_chain_set(tmp.path(), set);
    const auto back = read_chain_set(tmp.path());
    REQUIRE(back.size() == 2);
    CHECK(back[1].metadata.seed == set[1].metadata.seed);
    CHECK(back[1].metadata.model_id == "toy");
    CHECK(back[1].metadata.acceptance_rate == 0.234);
    CHECK(back[1].metadata.options.iterations == 500);

    const auto meta = chain_metadata_from_json(chain_metadata_to_json(set[0].metadata));
    CHECK(meta.block_size == 2);
    CHECK_THROWS_AS(chain_metadata_from_json("{\"chain_id\": 1}"), ParseError);
}

TEST_CASE("malformed chain files")
{
    const std::string header = "chain_id,iteration,a,b,log_posterior,gof,accepted\n";
    auto parse_error_line = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            read_chain_csv(in);
        }
        catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(parse_error_line(header + "0,1,0.5,0.5,-1,2\n") == 2);
    CHECK(parse_error_line(header + "0,1,0.5,0.5,-1,2,1\n0,2,0.5,x,-1,2,1\n") == 3);
    CHECK(parse_error_line(header + "0,1,0.5,0.5,-1,2,1\n1,2,0.5,0.5,-1,2,1\n") == 3);
    CHECK(parse_error_line(header + "0,1,0.5,0.5,-1,2,7\n") == 2);
    CHECK(parse_error_line("iteration,a\n") == 1);
    CHECK(parse_error_line("") == 1);

    ScratchDir tmp("mismatch");
    std::ofstream(tmp / "chain_1.csv") << header << "0,1,0.5,0.5,-1,2,1\n";
    std::ofstream(tmp / "chain_2.csv") << "chain_id,iteration,a,c,log_posterior,gof,accepted\n2,1,0.5,0.5,-1,2,1\n";
    CHECK_THROWS_AS(read_chain_set(tmp.path()), ParseError);
}

TEST_CASE("bad configurations are rejected with the offending field")
{
    const std::vector<std::pair<std::string, std::string>> corpus = {
        {"negative_sd", "priors[0].sd"},
        {"missing_targets", "targets"},
        {"unknown_key", "temperature"},
        {"duplicate_seeds", "seeds"},
        {"single_seed", "seeds"},
        {"unknown_prior_kind", "kind"},
        {"unknown_model", "model"},
        {"unknown_parameter", "q"},
        {"missing_prior", "d"},
        {"inverted_uniform", "priors[1]"},
        {"init_outside_bounds", "init"},
        {"block_size_zero", "block_size"},
        {"negative_scale", "proposal.scales.c"},
        {"burn_in_too_long", "burn_in"},
        {"too_few_states", "10 recorded"},
        {"missing_sampler", "sampler"},
        {"rhat_threshold", "diagnostics.rhat"},
        {"sweep_of_one", "prior_sets"},
        {"string_iterations", "iterations"},
        {"not_json", "JSON"},
    };
    for (const auto& [name, field] : corpus) {
        const auto path = std::filesystem::path(CALIB_TEST_DATA_DIR) / "bad_configs" / (name + ".json");
        REQUIRE(std::filesystem::exists(path));
        std::string message;
        try {
            load_run_configuration(path);
        }
        catch (const ConfigError& e) {
            message = e.what();
        }
        CHECK_MESSAGE(message.find(field) != std::string::npos, name << ": '" << message << "'");
        CHECK_MESSAGE(message.find(name + ".json") != std::string::npos, name);
    }
    CHECK_THROWS_AS(load_run_configuration("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("output root override")
{
    ScratchDir tmp("root");
    const auto config_path = write_short_config(tmp, 200, {1, 2});
    ::setenv(kOutputRootVariable, (tmp / "elsewhere").c_str(), 1);
    const auto config = load_run_configuration(config_path);
    ::unsetenv(kOutputRootVariable);
    CHECK(config.run.output_dir == tmp / "elsewhere" / "run");
    CHECK(load_run_configuration(config_path).run.output_dir == tmp / "run");
}

TEST_CASE("CLI end to end")
{
    ScratchDir tmp("cli");
    const auto config = write_short_config(tmp, 1000, {21, 22, 23});
    const auto run    = tmp / "run";

    CHECK(run_cli("calibrate " + config.string()) == 0);
    REQUIRE(std::filesystem::exists(run / "chain_3.csv"));
    CHECK(std::filesystem::exists(run / "run_config.json"));

    const int gate = run_cli("diagnose " + run.string());
    const auto report = nlohmann::json::parse(slurp(run / "diagnostics_report.json"));
    CHECK(gate == (report.at("converged").get<bool>() ? 0 : 3));

    CHECK(run_cli("export " + run.string() + " --kind trace --out " + (tmp / "plots").string()) == 0);
    const auto trace = read_rows(tmp / "plots" / "trace_c.csv");
    REQUIRE(trace.size() == 161);
    CHECK(trace[0] == std::vector<std::string>{"iteration", "chain_1", "chain_2", "chain_3"});

    CHECK(run_cli("export " + run.string() + " --kind density --bins 20 --out " + (tmp / "plots").string()) == 0);
    const auto density = read_rows(tmp / "plots" / "density_d.csv");
    REQUIRE(density.size() == 21);
    double mass = 0.0;
    for (std::size_t r = 1; r < density.size(); ++r) {
        mass += std::stod(density[r][1]) * std::stod(density[r][2]);
    }
    CHECK(mass == doctest::Approx(1.0));

    CHECK(run_cli("export " + run.string() + " --kind prior-posterior --bins 30 --out " + (tmp / "plots").string()) ==
          0);
    const auto pp = read_rows(tmp / "plots" / "prior_posterior_c.csv");
    REQUIRE(pp.size() == 31);
    CHECK(pp[0] == std::vector<std::string>{"bin_center", "bin_width", "prior_height", "posterior_height"});

    SUBCASE("a single stored chain cannot be diagnosed")
    {
        std::filesystem::remove(run / "chain_2.csv");
        std::filesystem::remove(run / "chain_3.csv");
        CHECK(run_cli("diagnose " + run.string()) == 2);
    }
    SUBCASE("a corrupted chain file is an input error")
    {
        std::ofstream(run / "chain_1.csv", std::ios::app) << "1,99999,1,2\n";
        CHECK(run_cli("diagnose " + run.string()) == 2);
    }
}

TEST_CASE("CLI gate fails on non-converged chains")
{
    ScratchDir tmp("gate");
    // Three chains parked in different places.
    ChainSet set;
    for (std::size_t k = 0; k < 3; ++k) {
        Chain chain;
        chain.parameter_names = {"x"};
        std::mt19937_64 gen(k);
        std::normal_distribution<double> noise(5.0 * static_cast<double>(k), 1.0);
        for (std::size_t r = 0; r < 200; ++r) {
            const double x = noise(gen);
            chain.push_back(r + 1, std::vector{x}, {0.0, 0.0, false}, true);
        }
        chain.metadata.chain_id = k;
        set.chains.push_back(std::move(chain));
    }
    write_chain_set(tmp.path(), set);
    CHECK(run_cli("diagnose " + tmp.path().string()) == 3);

    // The same chains recentred pass.
    for (auto& chain : set.chains) {
        for (auto& v : chain.values) {
            v -= 5.0 * static_cast<double>(chain.metadata.chain_id);
        }
    }
    write_chain_set(tmp.path(), set);
    CHECK(run_cli("diagnose " + tmp.path().string()) == 0);
}

TEST_CASE("CLI usage and configuration errors")
{
    CHECK(run_cli("") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("calibrate " + (std::filesystem::path(CALIB_TEST_DATA_DIR) / "bad_configs" / "negative_sd.json").string()) ==
          2);
    CHECK(run_cli("calibrate /nonexistent.json") == 2);
    CHECK(run_cli("export /nonexistent --kind violin") == 2);
    CHECK_THROWS_AS(export_kind_from_string("violin"), ConfigError);
    CHECK(export_kind_from_string("prior-posterior") == ExportKind::PriorPosterior);
}
