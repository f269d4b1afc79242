#include "calib/diagnostics.h"
#include "calib/error.h"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <random>

using namespace calib;

namespace
{

std::vector<double> iid_normal(std::size_t n, double mu, double sd, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> dist(mu, sd);
    std::vector<double> out(n);
    for (auto& x : out) {
        x = dist(rng);
    }
    return out;
}

Chain chain_from_columns(const std::vector<std::string>& names, const std::vector<std::vector<double>>& cols)
{
    Chain chain;
    chain.parameter_names = names;
    for (std::size_t r = 0; r < cols.front().size(); ++r) {
        std::vector<double> row;
        for (const auto& c : cols) {
            row.push_back(c[r]);
        }
        chain.push_back(r + 1, row, {0.0, 0.0, false}, true);
    }
    return chain;
}

} // namespace

TEST_CASE("R-hat: frozen example")
{
    // Reference values from an independent implementation of the same construction.
    const std::vector<std::vector<double>> chains = {
        {1.2, 0.8, 1.5, 0.9, 1.1, 1.3, 0.7, 1.0, 1.4, 0.6, 1.2, 0.9},
        {1.6, 1.9, 1.4, 2.1, 1.7, 1.5, 1.8, 2.0, 1.3, 1.6, 1.9, 1.7},
        {0.4, 0.9, 0.6, 1.1, 0.5, 0.8, 0.7, 0.3, 1.0, 0.6, 0.9, 0.5},
    };
    const auto r = gelman_rubin(chains);
    CHECK(r.point_estimate == doctest::Approx(3.082604341757909).epsilon(1e-10));
    CHECK(r.upper_ci == doctest::Approx(5.635510829172905).epsilon(1e-8));
}

TEST_CASE("R-hat: iid chains sit near one, displaced chains do not")
{
    std::vector<std::vector<double>> same;
    std::vector<std::vector<double>> shifted;
    for (std::uint64_t k = 0; k < 3; ++k) {
        same.push_back(iid_normal(5000, 0.0, 1.0, 100 + k));
        shifted.push_back(iid_normal(5000, 3.0 * static_cast<double>(k), 1.0, 200 + k));
    }
    const auto a = gelman_rubin(same);
    CHECK(a.point_estimate < 1.01);
    CHECK(a.upper_ci >= a.point_estimate);
    CHECK(gelman_rubin(shifted).point_estimate > 2.0);
}

TEST_CASE("R-hat: input errors")
{
    CHECK_THROWS_AS(gelman_rubin({iid_normal(100, 0, 1, 1)}), InsufficientChainsError);
    CHECK_THROWS_AS(gelman_rubin({iid_normal(100, 0, 1, 1), iid_normal(99, 0, 1, 2)}), InsufficientDataError);
    CHECK_THROWS_AS(gelman_rubin({iid_normal(9, 0, 1, 1), iid_normal(9, 0, 1, 2)}), InsufficientDataError);
    CHECK_THROWS_AS(gelman_rubin({std::vector(50, 1.0), std::vector(50, 2.0)}), DegenerateChainError);
}

TEST_CASE("property: R-hat is invariant to affine rescaling and chain order")
{
    Rng gen(77);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 2 + gen() % 4;
        const std::size_t n = 10 + gen() % 200;
        std::vector<std::vector<double>> chains;
        for (std::size_t k = 0; k < m; ++k) {
            chains.push_back(iid_normal(n, 0.3 * static_cast<double>(gen() % 5), 1.0, gen()));
        }
        const auto base = gelman_rubin(chains);
        CHECK(base.point_estimate > 0.0);
        auto scaled     = chains;
        for (auto& c : scaled) {
            for (auto& x : c) {
                x = -4.0 * x + 17.0;
            }
        }
        std::reverse(scaled.begin(), scaled.end());
        const auto moved = gelman_rubin(scaled);
        CHECK(moved.point_estimate == doctest::Approx(base.point_estimate).epsilon(1e-9));
        CHECK(moved.upper_ci == doctest::Approx(base.upper_ci).epsilon(1e-9));
    }
}

TEST_CASE("autocorrelation")
{
    SUBCASE("white noise")
    {
        const auto x   = iid_normal(20000, 0.0, 1.0, 5);
        const auto acf = autocorrelation(x, 10);
        REQUIRE(acf.size() == 11);
        CHECK(acf[0] == doctest::Approx(1.0));
        for (std::size_t k = 1; k <= 10; ++k) {
            CHECK(std::abs(acf[k]) < 4.0 / std::sqrt(20000.0));
        }
    }
    SUBCASE("AR(1) decays geometrically")
    {
        const double phi = 0.8;
        const auto e     = iid_normal(200000, 0.0, 1.0, 6);
        std::vector<double> x(e.size());
        x[0] = e[0];
        for (std::size_t t = 1; t < x.size(); ++t) {
            x[t] = phi * x[t - 1] + e[t];
        }
        const auto acf = autocorrelation(x, 5);
        for (std::size_t k = 1; k <= 5; ++k) {
            CHECK(acf[k] == doctest::Approx(std::pow(phi, static_cast<double>(k))).epsilon(0.03));
        }
    }
    CHECK_THROWS_AS(autocorrelation(std::vector(5, 1.0), 5), InsufficientDataError);
    CHECK_THROWS_AS(autocorrelation(std::vector(50, 1.0), 5), DegenerateChainError);
}

TEST_CASE("property: correlation matrices are symmetric, bounded and positive semi-definite")
{
    Rng gen(31);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n   = 10 + gen() % 100;
        const std::size_t dim = 2 + gen() % 3;
        std::vector<std::vector<double>> cols;
        std::vector<std::string> names;
        for (std::size_t j = 0; j < dim; ++j) {
            cols.push_back(iid_normal(n, 0.0, 1.0, gen()));
            names.push_back("x" + std::to_string(j));
        }
        for (std::size_t r = 0; r < n; ++r) {
            cols[1][r] += 0.7 * cols[0][r];
        }
        const auto c = correlation_matrix(cols, names);
        REQUIRE(c.size() == dim);
        for (std::size_t i = 0; i < dim; ++i) {
            CHECK(c(i, i) == 1.0);
            for (std::size_t j = 0; j < dim; ++j) {
                CHECK(c(i, j) == c(j, i));
                CHECK(std::abs(c(i, j)) <= 1.0);
            }
        }
        // Random quadratic forms stay non-negative.
        for (int q = 0; q < 20; ++q) {
            const auto v = iid_normal(dim, 0.0, 1.0, gen());
            double form  = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                for (std::size_t j = 0; j < dim; ++j) {
                    form += v[i] * c(i, j) * v[j];
                }
            }
            CHECK(form >= -1e-9);
        }
    }
}

TEST_CASE("correlation: degenerate columns and derived quantities")
{
    const auto a = iid_normal(200, 1.0, 0.1, 8);
    std::vector<double> b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        b[i] = 2.0 * a[i] + 1.0;
    }
    const auto c = correlation_matrix({a, b, std::vector(200, 3.0)}, {"a", "b", "k"});
    CHECK(c(0, 1) == doctest::Approx(1.0));
    CHECK(std::isnan(c(0, 2)));
    CHECK(c(2, 2) == 1.0);
    CHECK(c.degenerate[2]);
    CHECK_THROWS_AS(correlation_matrix({std::vector(5, 1.0), std::vector(5, 2.0)}, {"a", "b"}),
                    InsufficientDataError);

    ChainSet set;
    set.chains.push_back(chain_from_columns({"a", "b"}, {a, iid_normal(200, 0.0, 1.0, 9)}));
    set.chains.push_back(chain_from_columns({"a", "b"}, {iid_normal(200, 1.0, 0.1, 10), iid_normal(200, 0.0, 1.0, 11)}));
    const std::vector<DerivedQuantity> derived = {{"twice_a", [](std::span<const double> x) { return 2.0 * x[0]; }}};
    const auto pooled = cross_correlation(set, derived);
    REQUIRE(pooled.size() == 3);
    CHECK(pooled.names[2] == "twice_a");
    CHECK(pooled(0, 2) == doctest::Approx(1.0));
    CHECK(std::abs(pooled(0, 1)) < 0.2);
}

TEST_CASE("profile likelihood")
{
    // Outputs depend on the product a*b only: every value of a is rescued by b.
    Model ridge;
    ridge.id         = "ridge";
    ridge.parameters = ParameterSpace({{"a", 0.1, 10.0}, {"b", 0.0, 10.0}});
    ridge.evaluate   = [](std::span<const double> x) { return ModelOutputs{x[0] * x[1]}; };
    const TargetSet targets({{"y", 2.0, 0.1}});
    const std::vector<double> grid = {0.5, 1.0, 2.0, 4.0};

    SUBCASE("fixed nuisance traces a sharp curve")
    {
        const auto profile = profile_likelihood(ridge, targets, 0, grid, FixedNuisance{{0.0, 1.0}});
        REQUIRE(profile.size() == grid.size());
        CHECK(profile[2].best_gof == doctest::Approx(0.0));
        CHECK(profile[0].best_gof == doctest::Approx(225.0));
        CHECK(profile[0].best_theta[0] == 0.5);
        CHECK(profile_range(profile) == doctest::Approx(400.0));
    }
    SUBCASE("optimised nuisance flattens the ridge")
    {
        const JointPrior sampler({"a", "b"}, {PriorSpec(Uniform{0.1, 10.0}), PriorSpec(Uniform{0.0, 10.0})});
        const auto profile = profile_likelihood(ridge, targets, 0, grid, BestOfDraws{2000, sampler, 4});
        CHECK(profile_range(profile) < 1.0);
        const auto again = profile_likelihood(ridge, targets, 0, grid, BestOfDraws{2000, sampler, 4});
        for (std::size_t g = 0; g < grid.size(); ++g) {
            CHECK(profile[g].best_gof == again[g].best_gof);
        }
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_AS(profile_likelihood(ridge, targets, 0, std::vector<double>{}, FixedNuisance{{1.0, 1.0}}),
                        DomainError);
        CHECK_THROWS_AS(profile_likelihood(ridge, targets, 0, std::vector{20.0}, FixedNuisance{{1.0, 1.0}}),
                        DomainError);
    }
}

TEST_CASE("non-identifiability report")
{
    SUBCASE("independent well-mixed chains raise no flags")
    {
        ChainSet set;
        for (std::uint64_t k = 0; k < 3; ++k) {
            set.chains.push_back(chain_from_columns(
                {"a", "b"}, {iid_normal(3000, 0.0, 0.1, 10 * k + 1), iid_normal(3000, 5.0, 0.2, 10 * k + 2)}));
        }
        const JointPrior prior({"a", "b"}, {PriorSpec(Normal{0.0, 1.0}), PriorSpec(Normal{5.0, 1.0})});
        const auto report = detect_nonidentifiability(set, &prior);
        CHECK(report.converged);
        CHECK(report.identified);
        CHECK(report.flagged_parameters().empty());
        CHECK(report.parameters[0].sd_ratio.value() == doctest::Approx(0.1).epsilon(0.05));
        const auto doc = nlohmann::json::parse(report_to_json(report));
        CHECK(doc.at("verdict") == "identified");
    }
    SUBCASE("ridge, flat posterior and displaced chain")
    {
        ChainSet set;
        for (std::uint64_t k = 0; k < 3; ++k) {
            auto a       = iid_normal(3000, 0.0, 1.0, 10 * k + 1);
            auto flat    = iid_normal(3000, k == 2 ? 4.0 : 0.0, 0.95, 10 * k + 2);
            std::vector<double> b(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                b[i] = a[i] + 0.01 * flat[i];
            }
            set.chains.push_back(chain_from_columns({"a", "b", "c"}, {a, b, flat}));
        }
        const JointPrior prior({"a", "b", "c"},
                               {PriorSpec(Normal{0.0, 10.0}), PriorSpec(Normal{0.0, 10.0}), PriorSpec(Normal{0.0, 1.0})});
        const auto report = detect_nonidentifiability(set, &prior);
        CHECK_FALSE(report.converged);
        CHECK_FALSE(report.identified);
        REQUIRE(report.correlated_pairs.size() == 1);
        CHECK(report.correlated_pairs[0].first == "a");
        CHECK(report.correlated_pairs[0].second == "b");
        CHECK(report.parameters[0].correlation_flag);
        CHECK(report.parameters[2].rhat_flag);
        CHECK(report.rhat_flagged_parameters() == std::vector<std::string>{"c"});
        const auto no_prior = detect_nonidentifiability(set, nullptr);
        CHECK_FALSE(no_prior.parameters[2].sd_ratio.has_value());
        CHECK(nlohmann::json::parse(report_to_json(report)).at("verdict") == "not converged");
    }
}

TEST_CASE("prior-posterior overlap")
{
    const PriorSpec prior(Normal{0.0, 1.0});
    const auto same  = prior_posterior_summary(prior, iid_normal(200000, 0.0, 1.0, 3));
    const auto far   = prior_posterior_summary(prior, iid_normal(20000, 20.0, 0.1, 4));
    const auto sharp = prior_posterior_summary(prior, iid_normal(20000, 0.0, 0.05, 5));
    CHECK(same.overlap.value() > 0.97);
    CHECK(far.overlap.value() < 1e-6);
    CHECK(sharp.overlap.value() < 0.2);
    CHECK(same.prior_sd.value() == 1.0);
    double mass = 0.0;
    for (const auto& b : same.bins) {
        mass += b.posterior_height * b.width;
    }
    CHECK(mass == doctest::Approx(1.0));
    CHECK_THROWS_AS(prior_posterior_summary(prior, iid_normal(50, 0.0, 1.0, 6)), InsufficientDataError);

    const auto improper = prior_posterior_summary(PriorSpec(ImproperUniform{0.0, kInf}, 1.0, 2.0),
                                                  iid_normal(500, 5.0, 1.0, 7));
    CHECK_FALSE(improper.overlap.has_value());
}
