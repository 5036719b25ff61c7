#pragma once

// Replica-symmetric saddle point in the Bayes-optimal setting and the variational
// free energy density phi(q, m, Q, qhat, mhat, Qhat).
//
// With the matched prior and noise, the saddle has Q = Q0, q = m, Qhat = 0 and
// qhat = mhat = E, and reduces to the scalar equation
//   chi = mmse(E),   E = (2/sigma2) G'(-chi/sigma2),
// with mmse = Q0 - q = chi.

#include "ecsr/core.hpp"
#include "ecsr/denoiser.hpp"
#include "ecsr/gfunc.hpp"
#include "ecsr/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace ecsr {

struct ReplicaFixedPoint {
    double chi = 0.0;
    double e = 0.0;
    double mmse = 0.0;
    // full saddle coordinates
    double q = 0.0;
    double m = 0.0;
    double q_cap = 0.0;
    double qhat = 0.0;
    double mhat = 0.0;
    double qcap_hat = 0.0;
    std::size_t iterations = 0;
    /// Free energy density at the point (filled by replica_fixed_points).
    double phi = 0.0;
};

struct ReplicaOptions {
    double tol = 1e-13;
    std::size_t max_iter = 200000;
    QuadratureConfig quad{};
    /// Starting points of the chi iteration; distinct limits are all reported.
    std::vector<double> starts{};  // empty: {Q0, 1e-8}
};

/// Prior and noise used to generate the data, when they differ from the ones assumed
/// by the estimator.
struct TrueModel {
    PriorBG prior;
    double sigma2;
};

/// phi(q, m, Q, qhat, mhat, Qhat) for an estimator assuming (prior, sigma2) on data drawn
/// from `truth`:
///   -Qhat Q/2 - qhat q/2 + mhat m - G(-(Q - q)/sigma2)
///   + ((q - 2m + Q0)/sigma2 - sigma0^2 (Q - q)/sigma2^2) G'(-(Q - q)/sigma2)
///   - E_{x0, z} ln int dx P(x) exp(-(Qhat + qhat) x^2/2 + (sqrt(qhat) z + mhat x0) x).
inline double free_energy_density(const ReplicaFixedPoint& c, const PriorBG& prior, double sigma2, const GFunction& g,
                                  const TrueModel& truth, const QuadratureConfig& quad = {}) {
    if (!(sigma2 > 0.0) || !(truth.sigma2 > 0.0)) throw InvalidArgument("free_energy_density: sigma2 must be > 0");
    if (!(c.qhat >= 0.0)) throw InvalidArgument("free_energy_density: qhat must be >= 0");
    const double q0 = truth.prior.second_moment();
    const double x = -(c.q_cap - c.q) / sigma2;
    const double bracket = (c.q - 2.0 * c.m + q0) / sigma2 - truth.sigma2 * (c.q_cap - c.q) / (sigma2 * sigma2);
    const double energy =
        -0.5 * c.qcap_hat * c.q_cap - 0.5 * c.qhat * c.q + c.mhat * c.m - g.value(x) + bracket * g.derivative(x);

    const double precision = c.qcap_hat + c.qhat;
    const double ht = weight_transition(std::max(precision, 0.0), prior);
    const std::array<double, 2> breaks{-ht, ht};
    auto log_z = [&](double b) { return log_marginal(b, precision, prior); };
    const double spike = gaussian_expectation(log_z, std::sqrt(c.qhat), breaks, quad);
    const double slab_sd = std::sqrt(c.qhat + c.mhat * c.mhat * truth.prior.sigma_x2);
    const double slab = truth.prior.rho > 0.0 ? gaussian_expectation(log_z, slab_sd, breaks, quad) : 0.0;
    const double entropy = (1.0 - truth.prior.rho) * spike + truth.prior.rho * slab;
    return energy - entropy;
}

/// Matched case: data drawn from the assumed prior and noise.
inline double free_energy_density(const ReplicaFixedPoint& c, const PriorBG& prior, double sigma2, const GFunction& g,
                                  const QuadratureConfig& quad = {}) {
    return free_energy_density(c, prior, sigma2, g, TrueModel{prior, sigma2}, quad);
}

/// qhat from the saddle-point condition,
///   (2/sigma2) ((q - 2m + Q0)/sigma2 - sigma0^2 chi/sigma2^2) G''(-chi/sigma2) + (2 sigma0^2/sigma2^2) G'(-chi/sigma2).
inline double saddle_qhat(double chi, double q, double m, double q0, double sigma2, double sigma2_true,
                          const GFunction& g) {
    const double x = -chi / sigma2;
    const double bracket = (q - 2.0 * m + q0) / sigma2 - sigma2_true * chi / (sigma2 * sigma2);
    return 2.0 / sigma2 * bracket * g.second_derivative(x) + 2.0 * sigma2_true / (sigma2 * sigma2) * g.derivative(x);
}

/// Nishimori coordinates for a given chi.
inline ReplicaFixedPoint nishimori_point(double chi, const PriorBG& prior, double sigma2, const GFunction& g) {
    ReplicaFixedPoint p;
    const double q0 = prior.second_moment();
    p.chi = chi;
    p.e = effective_E(chi, sigma2, g);
    p.mmse = chi;
    p.q = q0 - chi;
    p.m = q0 - chi;
    p.q_cap = q0;
    p.qhat = p.e;
    p.mhat = p.e;
    p.qcap_hat = 0.0;
    return p;
}

namespace detail {

inline ReplicaFixedPoint iterate_chi(double chi, const PriorBG& prior, double sigma2, const GFunction& g,
                                     const ReplicaOptions& opt) {
    double damping = 1.0;
    double last_step = 0.0;
    int sign_flips = 0;
    std::vector<double> tail;
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        const double e = effective_E(chi, sigma2, g);
        const double target = scalar_mmse(e, prior, opt.quad);
        const double step = target - chi;
        if (std::abs(step) < opt.tol * (1.0 + chi)) {
            auto p = nishimori_point(target, prior, sigma2, g);
            p.iterations = it;
            return p;
        }
        // The map is monotone in exact arithmetic; alternating steps mean overshoot.
        if (last_step * step < 0.0 && ++sign_flips >= 2) damping = 0.5;
        last_step = step;
        chi += damping * step;
        chi = std::max(chi, 0.0);
        tail.push_back(chi);
        if (tail.size() > 8) tail.erase(tail.begin());
    }
    std::string traj;
    for (double v : tail) traj += " " + std::to_string(v);
    throw ConvergenceError("replica fixed point: no convergence; last chi values:" + traj);
}

}  // namespace detail

/// All distinct fixed points reached from the configured starts, each with its
/// free energy density; sorted by phi (dominant first).
inline std::vector<ReplicaFixedPoint> replica_fixed_points(const PriorBG& prior, double sigma2, const GFunction& g,
                                                           const ReplicaOptions& opt = {}) {
    prior.validate();
    if (!(sigma2 > 0.0)) throw InvalidArgument("replica_fixed_point: sigma2 must be > 0");
    if (!(opt.tol > 0.0)) throw InvalidArgument("replica_fixed_point: tol must be > 0");
    const double q0 = prior.second_moment();
    std::vector<double> starts = opt.starts;
    if (starts.empty()) starts = {q0, 1e-8};

    std::vector<ReplicaFixedPoint> found;
    for (double start : starts) {
        auto p = detail::iterate_chi(start, prior, sigma2, g, opt);
        const bool duplicate = std::any_of(found.begin(), found.end(), [&](const ReplicaFixedPoint& f) {
            return std::abs(f.chi - p.chi) <= 1e-7 * std::max(f.chi, 1e-12) + 1e-14;
        });
        if (!duplicate) found.push_back(p);
    }
    for (auto& p : found) p.phi = free_energy_density(p, prior, sigma2, g, opt.quad);
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.phi < b.phi; });
    return found;
}

/// Thermodynamically dominant (lowest phi) Nishimori fixed point.
inline ReplicaFixedPoint replica_fixed_point(const PriorBG& prior, double sigma2, const GFunction& g,
                                             const ReplicaOptions& opt = {}) {
    return replica_fixed_points(prior, sigma2, g, opt).front();
}

struct CurvePoint {
    double inv_alpha = 0.0;
    double mmse = 0.0;
    bool ok = false;
    std::string error;
    /// Number of distinct fixed points found.
    std::size_t branches = 0;
    ReplicaFixedPoint fixed_point{};
};

struct MseCurve {
    std::vector<CurvePoint> points;
    /// False when mmse decreases somewhere along increasing 1/alpha.
    bool monotone = true;
};

/// Maps replica_fixed_point over 1/alpha; failures are recorded per point.
inline MseCurve mse_curve(const PriorBG& prior, double sigma2, const std::function<GFunction(double alpha)>& make_g,
                          const std::vector<double>& inverse_alpha_grid, const ReplicaOptions& opt = {}) {
    MseCurve curve;
    for (double inv_alpha : inverse_alpha_grid) {
        CurvePoint pt;
        pt.inv_alpha = inv_alpha;
        try {
            if (!(inv_alpha >= 1.0)) throw InvalidArgument("mse_curve: 1/alpha must be >= 1");
            const auto fps = replica_fixed_points(prior, sigma2, make_g(1.0 / inv_alpha), opt);
            pt.fixed_point = fps.front();
            pt.branches = fps.size();
            pt.mmse = pt.fixed_point.mmse;
            pt.ok = true;
        } catch (const Error& err) {
            pt.error = err.what();
        }
        curve.points.push_back(std::move(pt));
    }
    const CurvePoint* prev = nullptr;
    for (const auto& pt : curve.points) {
        if (!pt.ok) continue;
        if (prev && pt.inv_alpha > prev->inv_alpha && pt.mmse < prev->mmse) curve.monotone = false;
        prev = &pt;
    }
    return curve;
}

inline MseCurve mse_curve(const PriorBG& prior, double sigma2, GKind kind, const std::vector<double>& grid,
                          const ReplicaOptions& opt = {}) {
    return mse_curve(prior, sigma2, [kind](double alpha) { return GFunction::make(kind, alpha); }, grid, opt);
}

}  // namespace ecsr
