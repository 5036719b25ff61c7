#pragma once

// Scalar Bernoulli-Gaussian posterior under the effective channel
// exp(-e x^2 / 2 + h x): partition factor, slab weight, posterior moments and
// the channel MMSE averaged over the prior.

#include "ecsr/core.hpp"
#include "ecsr/quadrature.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace ecsr {

struct PosteriorMoments {
    double mean;
    double second_moment;
    double variance;
};

namespace detail {

inline void check_channel(double e) {
    if (!(e > 0.0) || !std::isfinite(e)) throw InvalidArgument("denoiser: effective precision must be positive");
}

/// log of rho / (1 - rho), with the endpoints mapped to -/+ infinity.
inline double prior_logit(const PriorBG& prior) {
    if (prior.rho <= 0.0) return -std::numeric_limits<double>::infinity();
    if (prior.rho >= 1.0) return std::numeric_limits<double>::infinity();
    return std::log(prior.rho) - std::log1p(-prior.rho);
}

inline double logistic(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double et = std::exp(t);
    return et / (1.0 + et);
}

/// log(exp(a) + exp(b)).
inline double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace detail

/// log Z(h, e) with Z = (1 + sigma_x2 e)^{-1/2} exp(h^2 / (2 (e + 1/sigma_x2))).
/// Defined for 1 + sigma_x2 e > 0.
inline double log_partition_z(double h, double e, const PriorBG& prior) {
    const double precision = e + 1.0 / prior.sigma_x2;
    if (!(precision > 0.0)) throw InvalidArgument("log_partition_z: e + 1/sigma_x2 must be positive");
    return -0.5 * std::log1p(prior.sigma_x2 * e) + h * h / (2.0 * precision);
}

/// Z(h, e); overflows to +inf for very large |h|, use log_partition_z there.
inline double partition_z(double h, double e, const PriorBG& prior) {
    detail::check_channel(e);
    return std::exp(log_partition_z(h, e, prior));
}

/// rho Z / (1 - rho + rho Z), evaluated as a logistic in log space.
inline double slab_weight(double h, double e, const PriorBG& prior) {
    return detail::logistic(detail::prior_logit(prior) + log_partition_z(h, e, prior));
}

/// ln[ int dx P(x) exp(-e x^2/2 + h x) ] = ln(1 - rho + rho Z(h, e)).
inline double log_marginal(double h, double e, const PriorBG& prior) {
    const double log_spike = prior.rho < 1.0 ? std::log1p(-prior.rho) : -std::numeric_limits<double>::infinity();
    const double log_slab =
        prior.rho > 0.0 ? std::log(prior.rho) + log_partition_z(h, e, prior) : -std::numeric_limits<double>::infinity();
    return detail::log_add(log_spike, log_slab);
}

inline PosteriorMoments posterior_moments(double h, double e, const PriorBG& prior) {
    detail::check_channel(e);
    const double kappa = 1.0 / (e + 1.0 / prior.sigma_x2);
    const double pi = slab_weight(h, e, prior);
    const double slab_mean = kappa * h;
    const double mean = pi * slab_mean;
    const double second = pi * (kappa + slab_mean * slab_mean);
    const double variance = pi * kappa + pi * (1.0 - pi) * slab_mean * slab_mean;
    return {mean, second, variance};
}

inline double posterior_mean(double h, double e, const PriorBG& prior) { return posterior_moments(h, e, prior).mean; }

inline double posterior_second_moment(double h, double e, const PriorBG& prior) {
    return posterior_moments(h, e, prior).second_moment;
}

/// |h| at which the slab weight crosses 1/2, or 0 when it never does.
inline double weight_transition(double e, const PriorBG& prior) {
    if (prior.rho <= 0.0 || prior.rho >= 1.0) return 0.0;
    const double level = -detail::prior_logit(prior) + 0.5 * std::log1p(prior.sigma_x2 * e);
    if (level <= 0.0) return 0.0;
    return std::sqrt(2.0 * (e + 1.0 / prior.sigma_x2) * level);
}

/// MMSE of the scalar channel h = e x0 + sqrt(e) z, x0 ~ prior, z ~ N(0, 1).
///
/// Spike branch: h ~ N(0, e), error m(h)^2. Slab branch: h ~ N(0, e^2 sigma_x2 + e) and
/// x0 | h ~ N(kappa h, kappa), so the error is kappa + (kappa h - m(h))^2.
inline double scalar_mmse(double e, const PriorBG& prior, const QuadratureConfig& quad = {}) {
    prior.validate();
    if (!(e >= 0.0)) throw InvalidArgument("scalar_mmse: e must be >= 0");
    if (e == 0.0 || prior.rho == 0.0) return prior.second_moment();
    if (!std::isfinite(e)) return 0.0;

    const double kappa = 1.0 / (e + 1.0 / prior.sigma_x2);
    const double ht = weight_transition(e, prior);
    const std::array<double, 2> breaks{-ht, ht};

    auto spike_err = [&](double h) {
        const double m = slab_weight(h, e, prior) * kappa * h;
        return m * m;
    };
    auto slab_err = [&](double h) {
        const double miss = (1.0 - slab_weight(h, e, prior)) * kappa * h;
        return miss * miss;
    };
    const double spike = prior.rho < 1.0 ? gaussian_expectation(spike_err, std::sqrt(e), breaks, quad) : 0.0;
    const double slab = kappa + gaussian_expectation(slab_err, std::sqrt(e * (e * prior.sigma_x2 + 1.0)), breaks, quad);
    return (1.0 - prior.rho) * spike + prior.rho * slab;
}

/// Same quantity by nested quadrature over x0 and z; slower, kept as a cross-check.
inline double scalar_mmse_nested(double e, const PriorBG& prior, const QuadratureConfig& quad = {}) {
    prior.validate();
    if (!(e >= 0.0)) throw InvalidArgument("scalar_mmse_nested: e must be >= 0");
    if (e == 0.0 || prior.rho == 0.0) return prior.second_moment();

    const double ht = weight_transition(e, prior);
    const double root_e = std::sqrt(e);
    auto conditional_err = [&](double x0) {
        // breakpoints of m(e x0 + sqrt(e) z) in units of sqrt(e) z
        const std::array<double, 3> breaks{-ht - e * x0, ht - e * x0, -e * x0};
        auto err = [&](double noise) {
            const double d = x0 - posterior_mean(e * x0 + noise, e, prior);
            return d * d;
        };
        return gaussian_expectation(err, root_e, breaks, quad);
    };
    const double spike = prior.rho < 1.0 ? conditional_err(0.0) : 0.0;
    const std::array<double, 2> x_breaks{-ht / e, ht / e};
    const double slab = gaussian_expectation(conditional_err, std::sqrt(prior.sigma_x2), x_breaks, quad);
    return (1.0 - prior.rho) * spike + prior.rho * slab;
}

}  // namespace ecsr
