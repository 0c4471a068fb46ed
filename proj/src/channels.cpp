#include "cmi/channels.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "cmi/error.hpp"
#include "cmi/random.hpp"

namespace cmi::channels {

void validate(const DwtcParams& p) {
    if (!(p.P > 0.0)) throw ConfigError("channel input power P must be positive");
    if (!(p.sigma1_sq > 0.0)) throw ConfigError("main-channel noise variance must be positive");
    if (!(p.sigma2_sq >= 0.0) || !std::isfinite(p.sigma2_sq))
        throw ConfigError("degradation noise variance must be finite and non-negative");
    if (p.n < 1) throw ConfigError("sample count must be >= 1");
}

namespace {

struct Draw {
    double x, y, z;
};

template <typename Fn>
Dataset generate(const DwtcParams& p, Fn&& transform) {
    validate(p);
    auto rng = make_rng(p.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sx = std::sqrt(p.P), s1 = std::sqrt(p.sigma1_sq), s2 = std::sqrt(p.sigma2_sq);
    Eigen::MatrixXd m(3, static_cast<Eigen::Index>(p.n));
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
        Draw d;
        d.x = sx * gauss(rng);
        d.y = d.x + s1 * gauss(rng);
        d.z = d.y + s2 * gauss(rng);
        transform(d, rng, gauss);
        m(0, i) = d.x;
        m(1, i) = d.y;
        m(2, i) = d.z;
    }
    return Dataset({1, 1, 1}, std::move(m));
}

}  // namespace

Dataset sample_dwtc(const DwtcParams& params) {
    return generate(params, [](Draw&, Rng&, std::normal_distribution<double>&) {});
}

Dataset sample_dwtc_product(const DwtcParams& params) {
    const auto cond = x_given_z(params);
    const double sd = std::sqrt(cond.variance);
    return generate(params, [&](Draw& d, Rng& rng, std::normal_distribution<double>& gauss) {
        d.x = cond.slope * d.z + sd * gauss(rng);
    });
}

double analytic_cmi(double P, double sigma1_sq, double sigma2_sq) {
    if (!(P > 0.0) || !(sigma1_sq > 0.0) || !(sigma2_sq >= 0.0))
        throw ConfigError("analytic CMI needs P > 0, sigma1^2 > 0, sigma2^2 >= 0");
    if (sigma2_sq == 0.0) return 0.0;
    return 0.5 * std::log1p(P / sigma1_sq) - 0.5 * std::log1p(P / (sigma1_sq + sigma2_sq));
}

double LinearGaussian::log_pdf(double x, double v) const {
    const double r = x - slope * v;
    return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

LinearGaussian x_given_y(const DwtcParams& p) {
    const double s = p.P + p.sigma1_sq;
    return {p.P / s, p.P * p.sigma1_sq / s};
}

LinearGaussian x_given_z(const DwtcParams& p) {
    const double noise = p.sigma1_sq + p.sigma2_sq;
    const double s = p.P + noise;
    return {p.P / s, p.P * noise / s};
}

double analytic_log_ratio(double x, double y, double z, const DwtcParams& params) {
    validate(params);
    if (params.sigma2_sq == 0.0) return 0.0;
    return x_given_y(params).log_pdf(x, y) - x_given_z(params).log_pdf(x, z);
}

}  // namespace cmi::channels
