#pragma once

#include <cstddef>
#include <cstdint>

#include "cmi/dataset.hpp"

namespace cmi::channels {

// Degraded wiretap channel with Gaussian input and additive Gaussian noise:
// X ~ N(0, P), Y = X + N1, Z = Y + N2.
struct DwtcParams {
    double P = 100.0;
    double sigma1_sq = 1.0;
    double sigma2_sq = 25.0;
    std::size_t n = 20000;
    std::uint64_t seed = 0;
};

// Throws ConfigError unless P > 0, sigma1_sq > 0, sigma2_sq >= 0, n >= 1.
void validate(const DwtcParams& params);

// n i.i.d. triples with dx = dy = dz = 1. Each sample consumes three
// standard normals (x, n1, n2) in that order.
Dataset sample_dwtc(const DwtcParams& params);

// n triples whose (y, z) follow p(y,z) and whose x is redrawn from p(x|z),
// i.e. exact draws from the product p(x|z)p(y,z).
Dataset sample_dwtc_product(const DwtcParams& params);

// I(X;Y|Z) in nats for Gaussian input:
// 1/2 ln(1 + P/s1) - 1/2 ln(1 + P/(s1 + s2)).
double analytic_cmi(double P, double sigma1_sq, double sigma2_sq);
inline double analytic_cmi(const DwtcParams& p) { return analytic_cmi(p.P, p.sigma1_sq, p.sigma2_sq); }

// Scalar Gaussian N(slope * v, variance) describing x given one
// conditioning value v.
struct LinearGaussian {
    double slope = 0.0;
    double variance = 1.0;

    double log_pdf(double x, double v) const;
};

// p(x|y) (= p(x|y,z) by the Markov chain X - Y - Z).
LinearGaussian x_given_y(const DwtcParams& params);
// p(x|z).
LinearGaussian x_given_z(const DwtcParams& params);

// ln p(x|y,z) - ln p(x|z); identically 0 when sigma2_sq == 0.
double analytic_log_ratio(double x, double y, double z, const DwtcParams& params);

}  // namespace cmi::channels
