#pragma once

// Damped fixed-point iteration of the EC recovery equations
//   h   = A^T (y - A m) / sigma2 + E m
//   m_i = <x>_{h_i, E},  Q_i = <x^2>_{h_i, E}
//   chi = N^-1 sum_i (Q_i - m_i^2),  E = (2/sigma2) G'(-chi/sigma2)
// plus the EC Gibbs free energy used to check stationarity, and the AMP-equivalent
// baseline (the same iteration with the i.i.d. Gaussian G).

#include "ecsr/core.hpp"
#include "ecsr/denoiser.hpp"
#include "ecsr/ensembles.hpp"
#include "ecsr/gfunc.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

namespace ecsr {

struct SolverParams {
    /// Damping: x <- (1 - gamma) x + gamma x_new for m and chi.
    double gamma = 0.05;
    std::size_t max_iter = 3000;
    /// Stop when N^-1/2 ||m_new - m|| < tol and chi has settled to 100 tol relative.
    double tol = 1e-8;
    /// Starting mean; zero when empty.
    std::optional<Vector> init_m;
    /// Starting chi. Zero starts from E = 2 G'(0) / sigma2; starting at the prior
    /// variance makes the undamped gain ~ lambda_max chi / (alpha sigma2), which
    /// gamma = 0.05 does not contain.
    double init_chi = 0.0;

    void validate(std::size_t n) const {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("SolverParams: gamma must be in (0, 1]");
        if (max_iter < 1) throw InvalidArgument("SolverParams: max_iter must be >= 1");
        if (!(tol >= 0.0)) throw InvalidArgument("SolverParams: tol must be >= 0");
        if (!(init_chi >= 0.0)) throw InvalidArgument("SolverParams: init_chi must be >= 0");
        if (init_m && static_cast<std::size_t>(init_m->size()) != n)
            throw InvalidArgument("SolverParams: init_m has the wrong length");
    }
};

struct ECState {
    Vector m;
    Vector h;
    /// Per-component second moments Q_i from the last sweep.
    Vector q_vec;
    double chi = 0.0;
    double e = 0.0;
    std::size_t iter = 0;
    bool converged = false;
};

namespace detail {
// Floor on chi before evaluating G'; keeps x = -chi/sigma2 off the x = 0 limit.
inline constexpr double kChiFloor = 1e-12;
}  // namespace detail

inline ECState ec_solve(const Matrix& a, const Vector& y, double sigma2, const PriorBG& prior, const GFunction& g,
                        const SolverParams& params = {}) {
    prior.validate();
    const auto n = static_cast<std::size_t>(a.cols());
    if (static_cast<Eigen::Index>(y.size()) != a.rows())
        throw InvalidArgument("ec_solve: y has length " + std::to_string(y.size()) + ", A has " +
                              std::to_string(a.rows()) + " rows");
    if (n == 0) throw InvalidArgument("ec_solve: empty problem");
    if (!(sigma2 > 0.0)) throw InvalidArgument("ec_solve: sigma2 must be positive");
    params.validate(n);

    const double inv_sigma2 = 1.0 / sigma2;
    const double root_n = std::sqrt(static_cast<double>(n));
    const auto nn = static_cast<Eigen::Index>(n);

    ECState state;
    state.m = params.init_m ? *params.init_m : Vector::Zero(nn);
    state.h = Vector::Zero(nn);
    state.q_vec = Vector::Zero(nn);
    state.chi = params.init_chi;

    Vector residual(a.rows());
    Vector m_new(nn);
    for (std::size_t it = 1; it <= params.max_iter; ++it) {
        const double e = effective_E(std::max(state.chi, detail::kChiFloor), sigma2, g);
        residual.noalias() = y - a * state.m;
        state.h.noalias() = a.transpose() * residual;
        state.h = inv_sigma2 * state.h + e * state.m;

        double var_sum = 0.0;
        for (Eigen::Index i = 0; i < nn; ++i) {
            const auto mom = posterior_moments(state.h[i], e, prior);
            m_new[i] = mom.mean;
            state.q_vec[i] = mom.second_moment;
            var_sum += mom.variance;
        }
        const double chi_new = var_sum / static_cast<double>(n);
        if (!std::isfinite(chi_new) || !m_new.allFinite())
            throw DivergenceError("ec_solve: non-finite iterate", it);

        const double dm = (m_new - state.m).norm() / root_n;
        const double dchi = std::abs(chi_new - state.chi);
        state.m = (1.0 - params.gamma) * state.m + params.gamma * m_new;
        state.chi = (1.0 - params.gamma) * state.chi + params.gamma * chi_new;
        state.iter = it;
        if (dm < params.tol && dchi <= 100.0 * params.tol * chi_new) {
            state.converged = true;
            break;
        }
    }
    state.e = effective_E(std::max(state.chi, detail::kChiFloor), sigma2, g);
    return state;
}

inline ECState ec_solve(const ObservationInstance& obs, const PriorBG& prior, const GFunction& g,
                        const SolverParams& params = {}) {
    return ec_solve(obs.a, obs.y, obs.sigma2, prior, g, params);
}

/// ec_solve with the i.i.d. Gaussian G at alpha = M/N; shares AMP's fixed point.
inline ECState amp_baseline(const ObservationInstance& obs, const PriorBG& prior, const SolverParams& params = {}) {
    const double alpha = static_cast<double>(obs.m()) / static_cast<double>(obs.n());
    return ec_solve(obs, prior, GFunction::iid(alpha), params);
}

inline double nmse(const Vector& m, const Vector& x0) {
    if (m.size() != x0.size()) throw InvalidArgument("nmse: length mismatch");
    const double ref = x0.squaredNorm();
    if (!(ref > 0.0)) throw InvalidArgument("nmse: ground truth is the zero vector");
    return (m - x0).squaredNorm() / ref;
}

/// Objective inside the extremization of the EC Gibbs free energy,
///   ||y - A m||^2 / (2 sigma2) - N G(-(Q - q)/sigma2) - N E Q / 2 + h.m
///   - sum_i ln int dx P(x) exp(-E x^2/2 + h_i x),   q = ||m||^2 / N,
/// up to an additive constant.
inline double ec_objective(const Vector& m, double q_cap, const Vector& h, double e, const Matrix& a,
                           const Vector& y, double sigma2, const PriorBG& prior, const GFunction& g) {
    const double n = static_cast<double>(m.size());
    const double q = m.squaredNorm() / n;
    double log_z = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) log_z += log_marginal(h[i], e, prior);
    return (y - a * m).squaredNorm() / (2.0 * sigma2) - n * g.value(-(q_cap - q) / sigma2) - 0.5 * n * e * q_cap +
           h.dot(m) - log_z;
}

/// EC free energy at a solver state, with Q = chi + ||m||^2 / N.
inline double ec_free_energy(const ECState& state, const ObservationInstance& obs, const PriorBG& prior,
                             const GFunction& g) {
    const double q = state.m.squaredNorm() / static_cast<double>(state.m.size());
    return ec_objective(state.m, state.chi + q, state.h, state.e, obs.a, obs.y, obs.sigma2, prior, g);
}

}  // namespace ecsr
