#pragma once

// Exact Bayes posterior mean by support enumeration, the linear-MMSE (ridge) estimator,
// and a tiny-system comparison of both against EC and the zero estimator.

#include "ecsr/core.hpp"
#include "ecsr/ec_solver.hpp"
#include "ecsr/ensembles.hpp"
#include "ecsr/gfunc.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace ecsr::harness {

inline constexpr std::size_t kMaxEnumerationSize = 14;

/// (A^T A / sigma2 + I / prior_var)^-1 A^T y / sigma2.
inline Vector linear_mmse(const Matrix& a, const Vector& y, double sigma2, double prior_var) {
    if (!(sigma2 > 0.0) || !(prior_var > 0.0)) throw InvalidArgument("linear_mmse: variances must be positive");
    if (y.size() != a.rows()) throw InvalidArgument("linear_mmse: dimension mismatch");
    Matrix h = a.transpose() * a / sigma2;
    h.diagonal().array() += 1.0 / prior_var;
    const Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success) throw DomainError("linear_mmse: normal matrix is not positive definite");
    return llt.solve(a.transpose() * y / sigma2);
}

/// Linear MMSE estimator for a prior with second moment Q0.
inline Vector ridge_estimate(const ObservationInstance& obs, const PriorBG& prior) {
    return linear_mmse(obs.a, obs.y, obs.sigma2, prior.second_moment());
}

/// Posterior mean under the Bernoulli-Gaussian prior, summing over all 2^N supports.
/// For support S with c = sigma_x2 / sigma2, B = I + c A_S^T A_S and v = A_S^T y,
///   log weight = |S| ln rho + (N - |S|) ln(1 - rho) - ln det(B)/2 + c v^T B^-1 v / (2 sigma2)
/// (common factors dropped) and the restricted posterior mean is c B^-1 v.
inline Vector exact_posterior_mean_enum(const ObservationInstance& obs, const PriorBG& prior) {
    prior.validate();
    const auto n = static_cast<std::size_t>(obs.a.cols());
    if (n == 0) throw InvalidArgument("exact_posterior_mean_enum: empty problem");
    if (n > kMaxEnumerationSize)
        throw InvalidArgument("exact_posterior_mean_enum: N = " + std::to_string(n) + " exceeds " +
                              std::to_string(kMaxEnumerationSize));
    if (obs.y.size() != obs.a.rows()) throw InvalidArgument("exact_posterior_mean_enum: dimension mismatch");
    if (!(obs.sigma2 > 0.0)) throw InvalidArgument("exact_posterior_mean_enum: sigma2 must be positive");

    const double c = prior.sigma_x2 / obs.sigma2;
    const double log_rho = std::log(prior.rho);
    const double log_off = std::log1p(-prior.rho);
    const Vector aty = obs.a.transpose() * obs.y;
    const Matrix gram = obs.a.transpose() * obs.a;

    const std::uint64_t count = std::uint64_t{1} << n;
    std::vector<double> log_w(count, -std::numeric_limits<double>::infinity());
    std::vector<Vector> means(count);
    double log_max = -std::numeric_limits<double>::infinity();
    std::vector<Eigen::Index> idx;
    for (std::uint64_t s = 0; s < count; ++s) {
        idx.clear();
        for (std::size_t i = 0; i < n; ++i)
            if (s >> i & 1U) idx.push_back(static_cast<Eigen::Index>(i));
        const auto k = static_cast<double>(idx.size());
        const double log_prior = (k > 0 ? k * log_rho : 0.0) + (k < static_cast<double>(n) ? (n - k) * log_off : 0.0);
        if (!std::isfinite(log_prior)) continue;  // support excluded by rho in {0, 1}

        Vector mean = Vector::Zero(static_cast<Eigen::Index>(n));
        double log_evidence = 0.0;
        if (!idx.empty()) {
            const auto kk = static_cast<Eigen::Index>(idx.size());
            Matrix b(kk, kk);
            Vector v(kk);
            for (Eigen::Index r = 0; r < kk; ++r) {
                v[r] = aty[idx[r]];
                for (Eigen::Index q = 0; q < kk; ++q) b(r, q) = c * gram(idx[r], idx[q]);
                b(r, r) += 1.0;
            }
            const Eigen::LLT<Matrix> llt(b);
            const Vector sol = llt.solve(v);
            const Matrix& l = llt.matrixLLT();
            double log_det = 0.0;
            for (Eigen::Index r = 0; r < kk; ++r) log_det += 2.0 * std::log(l(r, r));
            log_evidence = -0.5 * log_det + 0.5 * c * v.dot(sol) / obs.sigma2;
            for (Eigen::Index r = 0; r < kk; ++r) mean[idx[r]] = c * sol[r];
        }
        log_w[s] = log_prior + log_evidence;
        means[s] = std::move(mean);
        log_max = std::max(log_max, log_w[s]);
    }

    Vector total = Vector::Zero(static_cast<Eigen::Index>(n));
    double norm = 0.0;
    for (std::uint64_t s = 0; s < count; ++s) {
        if (!std::isfinite(log_w[s])) continue;
        const double w = std::exp(log_w[s] - log_max);
        total += w * means[s];
        norm += w;
    }
    return total / norm;
}

struct OracleComparison {
    std::size_t instances = 0;
    // mean over instances of ||estimate - x0||^2 / N
    double mse_bayes = 0.0;
    double mse_ridge = 0.0;
    double mse_zero = 0.0;
    double mse_ec = 0.0;
    // standard errors of the paired differences (other - bayes)
    double se_ridge_minus_bayes = 0.0;
    double se_zero_minus_bayes = 0.0;
    double se_ec_minus_bayes = 0.0;
    std::size_t ec_diverged = 0;

    /// Bayes at most ridge and zero, each up to 3 standard errors of the paired difference.
    bool bayes_dominates() const {
        return mse_bayes <= mse_ridge + 3.0 * se_ridge_minus_bayes && mse_bayes <= mse_zero + 3.0 * se_zero_minus_bayes;
    }
};

/// Draws `instances` i.i.d. Gaussian instances of size n x m from seeds seed, seed+1, ...
/// and compares the estimators per instance.
inline OracleComparison compare_estimators(const PriorBG& prior, double sigma2, std::size_t n, std::size_t m,
                                           std::size_t instances, std::uint64_t seed,
                                           EnsembleKind ensemble = EnsembleKind::IidGaussian,
                                           const SolverParams& solver = {}) {
    if (instances < 2) throw InvalidArgument("compare_estimators: need at least 2 instances");
    const EnsembleSpec spec{ensemble, n, m};
    spec.validate();
    const auto g = GFunction::make(ensemble == EnsembleKind::IidGaussian ? GKind::IidGaussianClosedForm
                                                                        : GKind::RowOrthogonalClosedForm,
                                   spec.alpha());
    const double nn = static_cast<double>(n);
    std::vector<double> d_ridge, d_zero, d_ec;
    OracleComparison out;
    out.instances = instances;
    for (std::size_t k = 0; k < instances; ++k) {
        const auto obs = make_instance(spec, prior, sigma2, seed + k);
        const double e_bayes = (exact_posterior_mean_enum(obs, prior) - obs.x0).squaredNorm() / nn;
        const double e_ridge = (ridge_estimate(obs, prior) - obs.x0).squaredNorm() / nn;
        const double e_zero = obs.x0.squaredNorm() / nn;
        double e_ec = std::numeric_limits<double>::infinity();
        try {
            e_ec = (ec_solve(obs, prior, g, solver).m - obs.x0).squaredNorm() / nn;
        } catch (const DivergenceError&) {
            ++out.ec_diverged;
        }
        out.mse_bayes += e_bayes;
        out.mse_ridge += e_ridge;
        out.mse_zero += e_zero;
        out.mse_ec += e_ec;
        d_ridge.push_back(e_ridge - e_bayes);
        d_zero.push_back(e_zero - e_bayes);
        d_ec.push_back(e_ec - e_bayes);
    }
    const double count = static_cast<double>(instances);
    out.mse_bayes /= count;
    out.mse_ridge /= count;
    out.mse_zero /= count;
    out.mse_ec /= count;
    auto standard_error = [count](const std::vector<double>& d) {
        double mean = 0.0;
        for (double v : d) mean += v;
        mean /= count;
        double ss = 0.0;
        for (double v : d) ss += (v - mean) * (v - mean);
        return std::sqrt(ss / (count - 1.0) / count);
    };
    out.se_ridge_minus_bayes = standard_error(d_ridge);
    out.se_zero_minus_bayes = standard_error(d_zero);
    out.se_ec_minus_bayes = out.ec_diverged ? std::numeric_limits<double>::infinity() : standard_error(d_ec);
    return out;
}

}  // namespace ecsr::harness
