#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"

#include "cmi/channels.hpp"
#include "cmi/error.hpp"

using namespace cmi;
using namespace cmi::channels;

namespace {

struct Moments {
    double mx = 0, my = 0, mz = 0, vx = 0, vy = 0, vz = 0, cxy = 0, cxz = 0, cyz = 0;
};

Moments moments(const Dataset& d) {
    Moments m;
    const double n = static_cast<double>(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        m.mx += d.x(i)[0] / n;
        m.my += d.y(i)[0] / n;
        m.mz += d.z(i)[0] / n;
    }
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double x = d.x(i)[0] - m.mx, y = d.y(i)[0] - m.my, z = d.z(i)[0] - m.mz;
        m.vx += x * x / n;
        m.vy += y * y / n;
        m.vz += z * z / n;
        m.cxy += x * y / n;
        m.cxz += x * z / n;
        m.cyz += y * z / n;
    }
    return m;
}

double partial_correlation_xy_given_z(const Moments& m) {
    const double rxy = m.cxy / std::sqrt(m.vx * m.vy);
    const double rxz = m.cxz / std::sqrt(m.vx * m.vz);
    const double ryz = m.cyz / std::sqrt(m.vy * m.vz);
    return (rxy - rxz * ryz) / std::sqrt((1 - rxz * rxz) * (1 - ryz * ryz));
}

// Posterior mean and variance of X ~ N(0, P) observed through additive
// Gaussian noise of the given variance, by brute-force quadrature.
std::pair<double, double> posterior_by_quadrature(double P, double noise, double obs) {
    const double lo = -80.0, hi = 80.0, h = 1e-3;
    double w0 = 0, w1 = 0, w2 = 0;
    for (double x = lo; x <= hi; x += h) {
        const double w = std::exp(-0.5 * x * x / P - 0.5 * (obs - x) * (obs - x) / noise);
        w0 += w;
        w1 += w * x;
        w2 += w * x * x;
    }
    const double mean = w1 / w0;
    return {mean, w2 / w0 - mean * mean};
}

}  // namespace

TEST_CASE("closed-form conditional mutual information") {
    CHECK(analytic_cmi(100, 1, 25) == doctest::Approx(1.5184675739556317).epsilon(1e-14));
    CHECK(analytic_cmi(100, 1, 0) == 0.0);
    const double cap = 0.5 * std::log(101.0);
    double prev = 0.0;
    for (double s2 = 0.5; s2 <= 50.0; s2 += 0.5) {
        const double v = analytic_cmi(100, 1, s2 * s2);
        CHECK(v > prev);
        CHECK(v < cap);
        prev = v;
    }
    CHECK(analytic_cmi(100, 1, 1e14) == doctest::Approx(cap).epsilon(1e-9));
    // More input power, more secrecy rate.
    CHECK(analytic_cmi(200, 1, 25) > analytic_cmi(100, 1, 25));
    CHECK_THROWS_AS(analytic_cmi(0, 1, 1), ConfigError);
    CHECK_THROWS_AS(analytic_cmi(1, 1, -1), ConfigError);
}

TEST_CASE("simulation") {
    DwtcParams p;
    p.n = 200000;
    p.seed = 7;
    const auto d = sample_dwtc(p);
    REQUIRE(d.size() == p.n);

    SUBCASE("second moments") {
        const auto m = moments(d);
        CHECK(std::abs(m.mx) < 0.1);
        CHECK(m.vx == doctest::Approx(100.0).epsilon(0.015));
        CHECK(m.vy == doctest::Approx(101.0).epsilon(0.015));
        CHECK(m.vz == doctest::Approx(126.0).epsilon(0.015));
        CHECK(m.cxz == doctest::Approx(100.0).epsilon(0.015));
        CHECK(partial_correlation_xy_given_z(m) > 0.5);
    }
    SUBCASE("deterministic per seed") {
        p.n = 100;
        CHECK(sample_dwtc(p).matrix() == sample_dwtc(p).matrix());
        auto q = p;
        q.seed = 8;
        CHECK(sample_dwtc(p).matrix() != sample_dwtc(q).matrix());
    }
    SUBCASE("no degradation means Z = Y") {
        auto q = p;
        q.n = 1000;
        q.sigma2_sq = 0.0;
        const auto e = sample_dwtc(q);
        for (std::size_t i = 0; i < e.size(); ++i) CHECK(e.z(i)[0] == e.y(i)[0]);
        CHECK(analytic_log_ratio(1.0, 2.0, 2.0, q) == 0.0);
    }
    SUBCASE("product samples break the X-Y link given Z") {
        const auto m = moments(sample_dwtc_product(p));
        CHECK(std::abs(partial_correlation_xy_given_z(m)) < 0.01);
        CHECK(m.vx == doctest::Approx(100.0).epsilon(0.015));
        CHECK(m.cxz == doctest::Approx(100.0).epsilon(0.015));
    }
    SUBCASE("log ratio averages to the CMI and exponentiates to one") {
        const auto prod = sample_dwtc_product(p);
        double mean_r = 0.0, mean_exp = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            mean_r += analytic_log_ratio(d.x(i)[0], d.y(i)[0], d.z(i)[0], p) / static_cast<double>(d.size());
            mean_exp += std::exp(analytic_log_ratio(prod.x(i)[0], prod.y(i)[0], prod.z(i)[0], p)) /
                        static_cast<double>(prod.size());
        }
        CHECK(mean_r == doctest::Approx(analytic_cmi(p)).epsilon(0.01));
        CHECK(mean_exp == doctest::Approx(1.0).epsilon(0.03));
    }
    SUBCASE("bad parameters") {
        auto q = p;
        q.P = 0;
        CHECK_THROWS_AS(sample_dwtc(q), ConfigError);
        q = p;
        q.sigma2_sq = -1;
        CHECK_THROWS_AS(validate(q), ConfigError);
        q = p;
        q.n = 0;
        CHECK_THROWS_AS(validate(q), ConfigError);
    }
}

TEST_CASE("Gaussian conditionals match numerical posteriors") {
    DwtcParams p;
    for (double obs : {-12.0, 0.0, 3.7, 20.0}) {
        const auto [my, vy] = posterior_by_quadrature(p.P, p.sigma1_sq, obs);
        const auto cy = x_given_y(p);
        CHECK(cy.slope * obs == doctest::Approx(my).epsilon(1e-6).scale(1.0));
        CHECK(cy.variance == doctest::Approx(vy).epsilon(1e-6));

        const auto [mz, vz] = posterior_by_quadrature(p.P, p.sigma1_sq + p.sigma2_sq, obs);
        const auto cz = x_given_z(p);
        CHECK(cz.slope * obs == doctest::Approx(mz).epsilon(1e-6).scale(1.0));
        CHECK(cz.variance == doctest::Approx(vz).epsilon(1e-6));
    }
    const LinearGaussian g{0.5, 4.0};
    CHECK(g.log_pdf(1.0, 2.0) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * 4.0)).epsilon(1e-14));
}
