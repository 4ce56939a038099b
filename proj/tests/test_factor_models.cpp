#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "shortrate/factor.hpp"
#include "shortrate/numerics.hpp"
#include "support/oracles.hpp"

using namespace shortrate;

namespace {
FactorParams vasicek_table2() { return {0.2433, 0.0611, 0.0124, false}; }
FactorParams cir_table2() { return {0.2110, 0.0657, 0.0995, false}; }
}  // namespace

TEST_CASE("loadings vanish at t = 0") {
    const Loadings lv = vasicek_loadings(0.0, vasicek_table2());
    CHECK(lv.a == 0.0);
    CHECK(lv.b == 0.0);
    const Loadings lc = cir_loadings(0.0, cir_table2());
    CHECK(lc.a == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(lc.b == 0.0);
}

TEST_CASE("Vasicek B tends to -t as kappa -> 0") {
    FactorParams p{1e-8, 0.05, 0.01, false};
    const Loadings l = vasicek_loadings(2.0, p);
    CHECK(l.b == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("CIR degenerates to the deterministic-drift B as theta -> 0") {
    FactorParams cir{0.5, 0.03, 1e-6, false};
    FactorParams vas{0.5, 0.03, 1e-6, false};
    const double bc = cir_loadings(1.0, cir).b;
    const double bv = vasicek_loadings(1.0, vas).b;
    CHECK(std::abs(bc - bv) < 1e-6);
}

TEST_CASE("Vasicek price matches the Euler Monte Carlo oracle") {
    const FactorParams p = vasicek_table2();
    const double r0 = 0.03;
    const std::vector<double> mats{10.0};
    const auto mc = oracles::mc_price_vasicek(p, r0, mats, 60000, 1000, 7101);
    const Loadings l = vasicek_loadings(10.0, p);
    const double price = std::exp(l.a + l.b * r0);
    CHECK(std::abs(price - mc[0].value) < 3.0 * mc[0].std_error);
}

TEST_CASE("CIR price matches the full-truncation Euler oracle") {
    const FactorParams p = cir_table2();
    const double r0 = 0.02;
    const std::vector<double> mats{5.0};
    const auto mc = oracles::mc_price_cir(p, r0, mats, 60000, 1000, 7102);
    const Loadings l = cir_loadings(5.0, p);
    const double price = std::exp(l.a + l.b * r0);
    CHECK(std::abs(price - mc[0].value) < 3.0 * mc[0].std_error);
}

TEST_CASE("conditional moments reach the stationary limit") {
    FactorParams p{1.5, 0.04, 0.02, false};
    const auto m = conditional_moments(FactorKind::Vasicek, p, 0.10, 40.0);
    CHECK(m.mean == doctest::Approx(p.eta).epsilon(1e-12));
    CHECK(m.variance == doctest::Approx(p.theta * p.theta / (2.0 * p.kappa)).epsilon(1e-12));
    const auto s = stationary_init(FactorKind::Vasicek, p);
    CHECK(m.variance == doctest::Approx(s.variance).epsilon(1e-12));
}

TEST_CASE("CIR variance at r_prev = 0 keeps only the eta term") {
    FactorParams p{0.8, 0.05, 0.09, false};
    const double dt = 1.0 / 252.0;
    const auto m = conditional_moments(FactorKind::Cir, p, 0.0, dt);
    const double e1 = std::exp(-p.kappa * dt);
    const double expected =
        p.eta * p.theta * p.theta / (2.0 * p.kappa) * (1.0 - e1) * (1.0 - e1);
    CHECK(m.variance == doctest::Approx(expected).epsilon(1e-14));
    // negative filtered states floor to the same value
    const auto mneg = conditional_moments(FactorKind::Cir, p, -0.02, dt);
    CHECK(mneg.variance == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("exact transition sampling matches conditional moments") {
    const int n = 1000000;
    SUBCASE("Vasicek") {
        FactorParams p{1.0, 0.05, 0.02, false};
        const double r_prev = 0.03, dt = 1.0 / 252.0;
        const auto m = conditional_moments(FactorKind::Vasicek, p, r_prev, dt);
        RngStream rng(991, 0);
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = sample_transition(FactorKind::Vasicek, p, r_prev, dt, rng);
            sum += r;
            sumsq += r * r;
        }
        const double mean = sum / n;
        const double var = sumsq / n - mean * mean;
        const double se_mean = std::sqrt(m.variance / n);
        const double se_var = m.variance * std::sqrt(2.0 / (n - 1.0));
        CHECK(std::abs(mean - m.mean) < 4.0 * se_mean);
        CHECK(std::abs(var - m.variance) < 4.0 * se_var);
    }
    SUBCASE("CIR") {
        FactorParams p{0.9, 0.04, 0.08, false};
        const double r_prev = 0.02, dt = 1.0 / 52.0;
        const auto m = conditional_moments(FactorKind::Cir, p, r_prev, dt);
        RngStream rng(992, 0);
        double sum = 0.0, sumsq = 0.0;
        double min_draw = 1e300;
        for (int i = 0; i < n; ++i) {
            const double r = sample_transition(FactorKind::Cir, p, r_prev, dt, rng);
            min_draw = std::min(min_draw, r);
            sum += r;
            sumsq += r * r;
        }
        CHECK(min_draw >= 0.0);
        const double mean = sum / n;
        const double var = sumsq / n - mean * mean;
        const double se_mean = std::sqrt(m.variance / n);
        // noncentral chi-square has excess kurtosis; widen the variance band
        const double se_var = m.variance * std::sqrt(6.0 / (n - 1.0));
        CHECK(std::abs(mean - m.mean) < 4.0 * se_mean);
        CHECK(std::abs(var - m.variance) < 4.0 * se_var);
    }
}

TEST_CASE("degenerate Vasicek draw equals the conditional mean") {
    FactorParams p{0.7, 0.03, 0.0, false};
    RngStream rng(5, 0);
    const double r = sample_transition(FactorKind::Vasicek, p, 0.02, 1.0 / 252.0, rng);
    const auto m = conditional_moments(FactorKind::Vasicek, p, 0.02, 1.0 / 252.0);
    CHECK(r == m.mean);
}

TEST_CASE("stationary initialization") {
    FactorParams p{0.5, 0.02, 0.1, false};
    const auto v = stationary_init(FactorKind::Vasicek, p);
    CHECK(v.mean == 0.02);
    CHECK(v.variance == doctest::Approx(0.01).epsilon(1e-15));
    FactorParams c{0.5, 1e-12, 0.1, false};
    const auto cc = stationary_init(FactorKind::Cir, c);
    CHECK(cc.variance == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("B is negative and decreasing in t for both models") {
    const FactorParams pv = vasicek_table2();
    const FactorParams pc = cir_table2();
    const std::vector<double> grid{0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0};
    double prev_v = 0.0, prev_c = 0.0;
    for (double t : grid) {
        const double bv = vasicek_loadings(t, pv).b;
        const double bc = cir_loadings(t, pc).b;
        CHECK(bv < 0.0);
        CHECK(bc < 0.0);
        CHECK(bv < prev_v);
        CHECK(bc < prev_c);
        prev_v = bv;
        prev_c = bc;
    }
}

TEST_CASE("rearranged CIR A equals the sign-paired textbook form to 1e-12") {
    const std::vector<FactorParams> params{
        cir_table2(), {0.5, 0.03, 0.08, false}, {1.2, 0.05, 0.2, false}};
    const std::vector<double> grid{0.25, 1.0, 5.0, 10.0, 30.0};
    for (const auto& p : params)
        for (double t : grid) {
            const double b = std::sqrt(p.kappa * p.kappa + 2.0 * p.theta * p.theta);
            const double a = (p.kappa + b) / (p.kappa - b);
            // (b/(kappa-b)) / (a e^{bt} - 1): both factors negative, ratio > 0
            const double q = (b / (p.kappa - b)) / (a * std::exp(b * t) - 1.0);
            const double a_paper = 2.0 * p.kappa * p.eta / (p.theta * p.theta) *
                                   (std::log(2.0) + std::log(q * std::exp((p.kappa + b) * t / 2.0)));
            const double a_impl = cir_loadings(t, p).a;
            CHECK(a_impl == doctest::Approx(a_paper).epsilon(1e-12));
        }
}

TEST_CASE("Feller condition is a diagnostic only") {
    CHECK(feller_condition({0.5, 0.05, 0.1, false}));       // 0.05 > 0.01
    CHECK_FALSE(feller_condition({0.1, 0.01, 0.2, false})); // 0.002 < 0.04
    // loadings and moments still evaluate when the condition fails
    const FactorParams bad{0.1, 0.01, 0.2, false};
    CHECK(std::isfinite(cir_loadings(5.0, bad).a));
    CHECK(std::isfinite(conditional_moments(FactorKind::Cir, bad, 0.01, 1.0 / 252).variance));
}

TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(vasicek_loadings(-1.0, vasicek_table2()), std::invalid_argument);
    CHECK_THROWS_AS(
        vasicek_loadings(1.0, FactorParams{std::nan(""), 0.0, 0.1, false}),
        std::invalid_argument);
    CHECK_THROWS_AS(vasicek_loadings(1.0, FactorParams{-0.1, 0.0, 0.1, false}),
                    std::invalid_argument);
    RngStream rng(1, 0);
    CHECK_THROWS_AS(
        sample_transition(FactorKind::Cir, {0.5, 0.0, 0.1, false}, 0.02, 1.0 / 252, rng),
        std::invalid_argument);
    CHECK_THROWS_AS(
        conditional_moments(FactorKind::Vasicek, vasicek_table2(), 0.02, 0.0),
        std::invalid_argument);
}
