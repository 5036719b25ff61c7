#pragma once

// Expectations over a centered Gaussian, E[f(s Z)] with Z ~ N(0, 1), by adaptive
// Gauss-Kronrod integration on the z-line. Callers pass the abscissae (in the
// original h units) where f changes quickly; the integration range is split there.

#include "ecsr/core.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace ecsr {

struct QuadratureConfig {
    /// Relative tolerance handed to the adaptive rule.
    double tolerance = 1e-13;
    unsigned max_depth = 10;
    /// Recompute with the half-order Kronrod rule and fail on disagreement.
    bool self_check = false;
    double self_check_threshold = 1e-8;
};

namespace detail {

// phi(z) is below 1e-300 past |z| = 37.
inline constexpr double kGaussianCutoff = 38.0;

inline double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

template <unsigned Points, class F>
double integrate_pieces(F& f, const std::vector<double>& edges, const QuadratureConfig& cfg) {
    using Rule = boost::math::quadrature::gauss_kronrod<double, Points>;
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k)
        total += Rule::integrate(f, edges[k], edges[k + 1], cfg.max_depth, cfg.tolerance);
    return total;
}

}  // namespace detail

/// E[f(sd * Z)], Z ~ N(0, 1). `breaks` are points (in the argument units of f) where
/// the integrand has sharp features.
template <class F>
double gaussian_expectation(F&& f, double sd, std::span<const double> breaks = {},
                            const QuadratureConfig& cfg = {}) {
    if (!(sd >= 0.0) || !std::isfinite(sd)) throw QuadratureError("gaussian_expectation: invalid scale");
    if (sd == 0.0) return f(0.0);

    const double cut = detail::kGaussianCutoff;
    std::vector<double> edges{-cut, 0.0, cut};
    for (double b : breaks) {
        const double z = b / sd;
        if (std::isfinite(z) && std::abs(z) < cut) edges.push_back(z);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    auto integrand = [&](double z) { return f(sd * z) * detail::std_normal_pdf(z); };
    const double value = detail::integrate_pieces<61>(integrand, edges, cfg);
    if (!std::isfinite(value)) throw QuadratureError("gaussian_expectation: non-finite result");
    if (cfg.self_check) {
        const double coarse = detail::integrate_pieces<31>(integrand, edges, cfg);
        if (std::abs(coarse - value) > cfg.self_check_threshold)
            throw QuadratureError("gaussian_expectation: order-doubling discrepancy " +
                                  std::to_string(std::abs(coarse - value)));
    }
    return value;
}

/// Adaptive integral of f over [lo, hi] split at `breaks`; used for non-Gaussian weights.
template <class F>
double integrate_interval(F&& f, double lo, double hi, std::span<const double> breaks = {},
                          const QuadratureConfig& cfg = {}) {
    std::vector<double> edges{lo, hi};
    for (double b : breaks)
        if (b > lo && b < hi) edges.push_back(b);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return detail::integrate_pieces<61>(f, edges, cfg);
}

}  // namespace ecsr
