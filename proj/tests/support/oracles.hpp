#pragma once

// Reference computations used only by the tests. They avoid the library's code paths:
// posterior moments by direct integration of the mixture posterior, the channel MMSE by
// Monte Carlo, the linear MMSE by an LU solve, and derivatives by central differences.

#include "ecsr/core.hpp"
#include "ecsr/denoiser.hpp"

#include <Eigen/LU>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace oracle {

struct Moments {
    double mean;
    double second;
};

/// Posterior of x under (1 - rho) delta(x) + rho N(0, sigma_x2) times exp(-e x^2/2 + h x),
/// with the slab integrals done numerically around the integrand's peak.
inline Moments posterior_by_quadrature(double h, double e, const ecsr::PriorBG& prior) {
    const double sx2 = prior.sigma_x2;
    auto exponent = [&](double x) { return -x * x / (2.0 * sx2) - 0.5 * e * x * x + h * x; };
    // centre and width of the slab integrand; only used to place the integration window
    const double curvature = 1.0 / sx2 + e;
    const double peak = h / curvature;
    const double width = 1.0 / std::sqrt(curvature);
    const double shift = exponent(peak);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * sx2);

    using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
    auto moment = [&](int power) {
        auto f = [&](double x) { return std::pow(x, power) * norm * std::exp(exponent(x) - shift); };
        const double lo = peak - 40.0 * width;
        const double hi = peak + 40.0 * width;
        double total = 0.0;
        const int pieces = 16;
        for (int p = 0; p < pieces; ++p) {
            const double a = lo + (hi - lo) * p / pieces;
            const double b = lo + (hi - lo) * (p + 1) / pieces;
            total += Rule::integrate(f, a, b, 8, 1e-14);
        }
        return total;
    };
    const double i0 = moment(0);
    const double i1 = moment(1);
    const double i2 = moment(2);
    const double denom = (1.0 - prior.rho) * std::exp(-shift) + prior.rho * i0;
    return {prior.rho * i1 / denom, prior.rho * i2 / denom};
}

struct Estimate {
    double mean;
    double stderr;
};

/// Monte Carlo estimate of E[(x0 - <x>_{e x0 + sqrt(e) z, e})^2].
inline Estimate mc_scalar_mmse(double e, const ecsr::PriorBG& prior, std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution on(prior.rho);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sx = std::sqrt(prior.sigma_x2);
    const double root_e = std::sqrt(e);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const double x0 = on(rng) ? sx * normal(rng) : 0.0;
        const double h = e * x0 + root_e * normal(rng);
        const double d = x0 - ecsr::posterior_mean(h, e, prior);
        sum += d * d;
        sum_sq += d * d * d * d;
    }
    const double n = static_cast<double>(samples);
    const double mean = sum / n;
    const double var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

/// (A^T A / sigma2 + I / prior_var)^-1 A^T y / sigma2 by partial-pivot LU.
inline ecsr::Vector linear_mmse_lu(const ecsr::Matrix& a, const ecsr::Vector& y, double sigma2, double prior_var) {
    ecsr::Matrix lhs = a.transpose() * a / sigma2 + ecsr::Matrix::Identity(a.cols(), a.cols()) / prior_var;
    return lhs.partialPivLu().solve(a.transpose() * y / sigma2);
}

/// Central difference of f at x with step h.
template <class F>
double central_difference(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Fourth-order central difference.
template <class F>
double central_difference4(F&& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12.0 * h);
}

}  // namespace oracle
