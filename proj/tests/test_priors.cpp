#include "calib/error.h"
#include "calib/priors.h"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace calib;

namespace
{

// Composite Simpson integral of exp(log density) over [a, b].
double integrate_density(const PriorSpec& spec, double a, double b, int n = 200000)
{
    const double h = (b - a) / n;
    double acc     = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double v = std::exp(log_prior_density(spec, a + i * h));
        acc += w * (std::isfinite(v) ? v : 0.0);
    }
    return acc * h / 3.0;
}

// Kolmogorov-Smirnov distance between sorted draws and the analytic CDF.
double ks_statistic(std::vector<double> draws, const PriorSpec& spec)
{
    std::sort(draws.begin(), draws.end());
    const auto n = static_cast<double>(draws.size());
    double d     = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const double f = *prior_cdf(spec, draws[i]);
        d              = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    return d;
}

} // namespace

TEST_CASE("construction rejects invalid parameters")
{
    CHECK_THROWS_AS(PriorSpec(Uniform{1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(PriorSpec(Uniform{2.0, 1.0}), DomainError);
    CHECK_THROWS_AS(PriorSpec(Normal{0.0, 0.0}), DomainError);
    CHECK_THROWS_AS(PriorSpec(Normal{0.0, -1.0}), DomainError);
    CHECK_THROWS_AS(PriorSpec(Gamma{0.0, 1.0}), DomainError);
    CHECK_THROWS_AS(PriorSpec(Gamma{1.0, -1.0}), DomainError);
    CHECK_THROWS_AS(PriorSpec(ImproperUniform{1.0, 0.0}), DomainError);
    CHECK_THROWS_AS(PriorSpec(ImproperUniform{0.0, kInf}, 2.0, 1.0), DomainError);
}

TEST_CASE("log_prior_density examples")
{
    const PriorSpec flat(ImproperUniform{0.0, kInf});
    CHECK(log_prior_density(flat, -1.0) == -kInf);
    CHECK(log_prior_density(flat, 3.0) == 0.0);
    CHECK(log_prior_density(flat, 1e300) == 0.0);

    CHECK(log_prior_density(PriorSpec(Normal{9.0, 1.0}), 9.0) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(log_prior_density(PriorSpec(Gamma{2.0, 1.0}), 0.0) == -kInf);
    CHECK(log_prior_density(PriorSpec(Gamma{2.0, 1.0}), -0.5) == -kInf);
    CHECK(log_prior_density(PriorSpec(Gamma{1.0, 3.0}), 0.0) == doctest::Approx(std::log(3.0)));
    // Gamma(k, r) density at x: r^k x^(k-1) e^(-r x) / Gamma(k).
    CHECK(log_prior_density(PriorSpec(Gamma{4.0, 4.0}), 1.5) ==
          doctest::Approx(4.0 * std::log(4.0) + 3.0 * std::log(1.5) - 6.0 - std::lgamma(4.0)).epsilon(1e-13));
    CHECK(log_prior_density(PriorSpec(Uniform{0.0, 4.0}), 4.5) == -kInf);
    CHECK(log_prior_density(PriorSpec(Uniform{0.0, 4.0}), 1.0) == doctest::Approx(-std::log(4.0)));
}

TEST_CASE("joint_log_prior")
{
    const JointPrior flat({"a", "b"}, {PriorSpec(ImproperUniform{0.0, 1.0}), PriorSpec(ImproperUniform{0.0, kInf})});
    CHECK(joint_log_prior(flat, std::vector{0.5, 10.0}) == 0.0);
    CHECK(joint_log_prior(flat, std::vector{1.5, 10.0}) == -kInf);
    CHECK_THROWS_AS(joint_log_prior(flat, std::vector{0.5}), AlignmentError);

    const JointPrior sis({"c", "p"}, {PriorSpec(Normal{9.0, 1.0}), PriorSpec(Normal{0.06, 0.01})});
    CHECK(joint_log_prior(sis, std::vector{9.0, 0.06}) ==
          doctest::Approx(-std::log(2.0 * std::numbers::pi) - std::log(1.0 * 0.01)).epsilon(1e-14));

    CHECK_THROWS_AS(JointPrior({"a"}, {}), AlignmentError);
}

TEST_CASE("property: joint_log_prior is permutation equivariant")
{
    std::vector<PriorSpec> specs{PriorSpec(Normal{1.0, 2.0}), PriorSpec(Gamma{2.0, 3.0}), PriorSpec(Uniform{-1.0, 5.0}),
                                 PriorSpec(ImproperUniform{0.0, kInf})};
    std::vector<std::string> names{"a", "b", "c", "d"};
    Rng rng(3);
    std::vector<std::size_t> order{0, 1, 2, 3};
    for (int trial = 0; trial < 200; ++trial) {
        const JointPrior prior(names, specs);
        std::vector<double> theta;
        for (const auto& s : specs) {
            theta.push_back(s.is_proper() ? sample_prior(s, rng) : 7.0);
        }
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<PriorSpec> ps;
        std::vector<std::string> pn;
        std::vector<double> pt;
        for (auto i : order) {
            ps.push_back(specs[i]);
            pn.push_back(names[i]);
            pt.push_back(theta[i]);
        }
        CHECK(joint_log_prior(JointPrior(pn, ps), pt) == doctest::Approx(joint_log_prior(prior, theta)).epsilon(1e-13));
    }
}

TEST_CASE("proper densities integrate to one")
{
    CHECK(integrate_density(PriorSpec(Normal{9.0, 1.0}), 0.0, 18.0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(integrate_density(PriorSpec(Normal{0.06, 0.01}), -0.04, 0.16) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(integrate_density(PriorSpec(Uniform{-2.0, 3.0}), -2.0, 3.0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(integrate_density(PriorSpec(Gamma{4.0, 4.0}), 0.0, 20.0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(integrate_density(PriorSpec(Gamma{2.5, 0.5}), 0.0, 120.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sampling")
{
    Rng rng(42);
    SUBCASE("uniform support")
    {
        const PriorSpec u(Uniform{0.0, 1.0});
        for (int i = 0; i < 1000; ++i) {
            const double x = sample_prior(u, rng);
            CHECK((x >= 0.0 && x < 1.0));
        }
    }
    SUBCASE("normal mean")
    {
        const PriorSpec n(Normal{9.0, 1.0});
        double sum = 0.0;
        for (int i = 0; i < 100000; ++i) {
            sum += sample_prior(n, rng);
        }
        CHECK(std::abs(sum / 1e5 - 9.0) < 0.02);
    }
    SUBCASE("gamma mean uses the rate")
    {
        const double k = 3.0;
        const double r = 2.0;
        const PriorSpec g(Gamma{k, r});
        double sum = 0.0;
        for (int i = 0; i < 100000; ++i) {
            sum += sample_prior(g, rng);
        }
        CHECK(std::abs(sum / 1e5 - k / r) < 3.0 * (std::sqrt(k) / r) / std::sqrt(1e5));
    }
    SUBCASE("improper uniform uses initialisation bounds")
    {
        const PriorSpec bounded(ImproperUniform{0.0, kInf}, 2.0, 3.0);
        for (int i = 0; i < 1000; ++i) {
            const double x = sample_prior(bounded, rng);
            CHECK((x >= 2.0 && x <= 3.0));
        }
        CHECK_THROWS_AS(sample_prior(PriorSpec(ImproperUniform{0.0, kInf}), rng), ConfigError);
    }
    SUBCASE("deterministic given the seed")
    {
        Rng a(5);
        Rng b(5);
        const PriorSpec g(Gamma{0.7, 1.3});
        for (int i = 0; i < 100; ++i) {
            CHECK(sample_prior(g, a) == sample_prior(g, b));
        }
    }
}

TEST_CASE("property: empirical CDF of draws matches the analytic CDF")
{
    Rng rng(11);
    for (const PriorSpec& spec : {PriorSpec(Uniform{-1.0, 2.0}), PriorSpec(Normal{9.0, 1.0}),
                                  PriorSpec(Gamma{4.0, 4.0}), PriorSpec(Gamma{0.5, 2.0}),
                                  PriorSpec(ImproperUniform{0.0, 10.0}, 0.0, 10.0)}) {
        std::vector<double> draws(100000);
        for (auto& x : draws) {
            x = sample_prior(spec, rng);
        }
        CHECK_MESSAGE(ks_statistic(draws, spec) < 0.01, spec.describe());
    }
}

TEST_CASE("moments and CDF")
{
    CHECK(*prior_mean(PriorSpec(Gamma{4.0, 2.0})) == doctest::Approx(2.0));
    CHECK(*prior_sd(PriorSpec(Gamma{4.0, 2.0})) == doctest::Approx(1.0));
    CHECK(*prior_sd(PriorSpec(Uniform{0.0, 12.0})) == doctest::Approx(12.0 / std::sqrt(12.0)));
    CHECK(*prior_cdf(PriorSpec(Normal{0.0, 1.0}), 0.0) == doctest::Approx(0.5));
    CHECK(*prior_sd(PriorSpec(ImproperUniform{0.0, 100.0})) == doctest::Approx(100.0 / std::sqrt(12.0)));
    CHECK_FALSE(prior_sd(PriorSpec(ImproperUniform{0.0, kInf})).has_value());
    CHECK_FALSE(prior_cdf(PriorSpec(ImproperUniform{0.0, kInf}), 1.0).has_value());
}
