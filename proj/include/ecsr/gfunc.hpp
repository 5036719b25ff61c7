#pragma once

// Ensemble-dependent function G(x) (asymptotic rank-one HCIZ integral of A^T A),
// its first two derivatives, and the effective precision E = (2/sigma2) G'(-chi/sigma2).
//
// For a spectrum rho(lambda),
//   G(x) = extr_L { -1/2 int rho ln|L - lambda| + L x / 2 } - ln|x| / 2 - 1/2,
// whose stationary point satisfies int rho / (L - lambda) = x with L below the
// spectrum. Writing L = 1/x + r turns this into
//   H(r) = sum_k w_k (lambda_k - r) / d_k = 0,   d_k = 1 + (r - lambda_k) x,
// which is well conditioned as x -> 0 and gives
//   G'(x) = r / 2,  G(x) = (r x - sum_k w_k log1p((r - lambda_k) x)) / 2.
// With the x -> 0 limit r -> mean(lambda), G'(0) is half the mean eigenvalue.

#include "ecsr/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ecsr {

struct SpectralAtom {
    double lambda;
    double weight;
};

using Spectrum = std::vector<SpectralAtom>;

inline void validate_spectrum(const Spectrum& spectrum) {
    if (spectrum.empty()) throw InvalidArgument("spectrum: no atoms");
    double total = 0.0;
    for (const auto& [lambda, weight] : spectrum) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("spectrum: eigenvalues must be >= 0");
        if (!(weight >= 0.0) || !std::isfinite(weight)) throw InvalidArgument("spectrum: weights must be >= 0");
        total += weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw InvalidArgument("spectrum: weights sum to " + std::to_string(total) + ", expected 1");
}

/// Equal-weight atoms at the given eigenvalues (e.g. an empirical spectrum).
inline Spectrum empirical_spectrum(const std::vector<double>& eigenvalues) {
    if (eigenvalues.empty()) throw InvalidArgument("empirical_spectrum: no eigenvalues");
    Spectrum s;
    s.reserve(eigenvalues.size());
    const double w = 1.0 / static_cast<double>(eigenvalues.size());
    for (double v : eigenvalues) s.push_back({std::max(v, 0.0), w});
    return s;
}

/// Two-atom spectrum of the scaled row-orthogonal ensemble.
inline Spectrum row_orthogonal_spectrum(double alpha) {
    if (alpha >= 1.0) return {{1.0, 1.0}};
    return {{0.0, 1.0 - alpha}, {1.0 / alpha, alpha}};
}

/// Atomized limiting spectrum of A^T A for i.i.d. Gaussian A (entries of variance
/// 1/M): mass 1 - alpha at zero plus the Marchenko-Pastur bulk of AA^T rescaled by
/// 1/alpha, discretized by the midpoint rule in the angle of
/// s = (a + b)/2 + (b - a)/2 cos(theta).
inline Spectrum marchenko_pastur_spectrum(double alpha, std::size_t atoms) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("marchenko_pastur_spectrum: alpha must be in (0, 1]");
    if (atoms < 2) throw InvalidArgument("marchenko_pastur_spectrum: need at least two atoms");
    const double lo = std::pow(1.0 - std::sqrt(alpha), 2);
    const double hi = std::pow(1.0 + std::sqrt(alpha), 2);
    Spectrum bulk;
    bulk.reserve(atoms);
    double mass = 0.0;
    for (std::size_t k = 0; k < atoms; ++k) {
        const double theta = std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(atoms);
        const double s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * std::cos(theta);
        const double sin_t = std::sin(theta);
        // density sqrt((hi - s)(s - lo)) / (2 pi alpha s) times ds/dtheta
        const double w = std::pow(0.5 * (hi - lo) * sin_t, 2) / (2.0 * std::numbers::pi * alpha * s);
        bulk.push_back({s / alpha, w});
        mass += w;
    }
    Spectrum out;
    out.reserve(atoms + 1);
    if (alpha < 1.0) out.push_back({0.0, 1.0 - alpha});
    for (auto [lambda, w] : bulk) out.push_back({lambda, alpha * w / mass});
    return out;
}

/// Reads "lambda weight" pairs, one per line; '#' starts a comment.
inline Spectrum read_spectrum(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("read_spectrum: cannot open " + path);
    Spectrum s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        double lambda = 0.0;
        double weight = 0.0;
        if (!(fields >> lambda)) continue;
        if (!(fields >> weight))
            throw InvalidArgument("read_spectrum: " + path + ":" + std::to_string(lineno) + ": missing weight");
        s.push_back({lambda, weight});
    }
    validate_spectrum(s);
    return s;
}

namespace detail {

struct SpectralRoot {
    double r;   // L - 1/x; G'(x) = r / 2
    double dr;  // dr/dx; G''(x) = dr / 2
};

/// Solves sum_k w_k (lambda_k - r)/d_k = 0 on the branch below the spectrum by
/// Newton steps safeguarded with bisection.
inline SpectralRoot solve_spectral_root(double x, const Spectrum& spectrum) {
    if (!(x <= 0.0)) throw DomainError("spectral G: x must be <= 0, got " + std::to_string(x));
    double lmin = std::numeric_limits<double>::infinity();
    double lmax = -std::numeric_limits<double>::infinity();
    for (const auto& atom : spectrum) {
        if (atom.weight <= 0.0) continue;
        lmin = std::min(lmin, atom.lambda);
        lmax = std::max(lmax, atom.lambda);
    }
    if (!(lmin <= lmax)) throw InvalidArgument("spectral G: spectrum has no mass");

    auto derivative_terms = [&](double r) {
        double s_wd2 = 0.0;
        double s_num = 0.0;
        for (const auto& [lambda, w] : spectrum) {
            if (w == 0.0) continue;
            const double d = 1.0 + (r - lambda) * x;
            const double d2 = d * d;
            s_wd2 += w / d2;
            s_num += w * (lambda - r) * (lambda - r) / d2;
        }
        return std::pair{s_wd2, s_num};
    };

    if (!std::isfinite(x)) return {lmin, 0.0};

    double lo = lmin;
    double hi = lmax;
    if (x < 0.0) hi = std::min(hi, lmin + 1.0 / (-x));
    if (hi <= lo) {
        const auto [s_wd2, s_num] = derivative_terms(lo);
        return {lo, std::isfinite(s_num / s_wd2) ? s_num / s_wd2 : 0.0};
    }

    auto residual = [&](double r, double* slope) {
        double h = 0.0;
        double dh = 0.0;
        for (const auto& [lambda, w] : spectrum) {
            if (w == 0.0) continue;
            const double d = 1.0 + (r - lambda) * x;
            h += w * (lambda - r) / d;
            dh -= w / (d * d);
        }
        if (slope) *slope = dh;
        return h;
    };

    // H decreases on (lo, hi): H(lo) >= 0, H(hi-) <= 0.
    double r = 0.5 * (lo + hi);
    constexpr int kMaxSteps = 400;
    int step = 0;
    for (; step < kMaxSteps; ++step) {
        double slope = 0.0;
        const double h = residual(r, &slope);
        if (h == 0.0) break;
        if (h > 0.0)
            lo = r;
        else
            hi = r;
        double next = r - h / slope;
        if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
        const double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(r));
        if (std::abs(next - r) <= tol || hi - lo <= tol) {
            r = next;
            break;
        }
        r = next;
    }
    if (step == kMaxSteps) throw ConvergenceError("spectral G: root finder did not converge at x = " + std::to_string(x));
    const auto [s_wd2, s_num] = derivative_terms(r);
    return {r, s_num / s_wd2};
}

}  // namespace detail

/// G'(x) for the i.i.d. Gaussian ensemble; G(x) = -(alpha/2) ln(1 - x/alpha).
inline double g_prime_iid(double x, double alpha) {
    if (!(alpha > 0.0)) throw InvalidArgument("g_prime_iid: alpha must be positive");
    if (!(x < alpha)) throw DomainError("g_prime_iid: x must be < alpha (branch point)");
    return 0.5 / (1.0 - x / alpha);
}

inline double g_iid(double x, double alpha) {
    if (!(alpha > 0.0)) throw InvalidArgument("g_iid: alpha must be positive");
    if (!(x < alpha)) throw DomainError("g_iid: x must be < alpha (branch point)");
    return -0.5 * alpha * std::log1p(-x / alpha);
}

inline double g_second_iid(double x, double alpha) {
    const double t = 1.0 - x / alpha;
    return 0.5 / (alpha * t * t);
}

namespace detail {

/// Smaller root of x r^2 + (1 - x/alpha) r - 1 = 0, i.e. r = L - 1/x for the
/// two-atom spectrum {0: 1 - alpha, 1/alpha: alpha} on the branch L < 0.
inline double row_orth_r(double x, double alpha) {
    if (alpha >= 1.0) return 1.0;
    if (!std::isfinite(x)) return 0.0;
    const double b = 1.0 - x / alpha;
    const double disc = b * b + 4.0 * x;  // nonnegative for alpha <= 1
    return 2.0 / (b + std::sqrt(std::max(disc, 0.0)));
}

inline void check_row_orth_args(double x, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("row-orthogonal G: alpha must be in (0, 1]");
    if (!(x <= 0.0)) throw DomainError("row-orthogonal G: x must be <= 0, got " + std::to_string(x));
}

}  // namespace detail

inline double g_prime_row_orth(double x, double alpha) {
    detail::check_row_orth_args(x, alpha);
    return 0.5 * detail::row_orth_r(x, alpha);
}

inline double g_row_orth(double x, double alpha) {
    detail::check_row_orth_args(x, alpha);
    if (alpha >= 1.0) return 0.5 * x;
    if (x == 0.0) return 0.0;
    const double r = detail::row_orth_r(x, alpha);
    return 0.5 * (r * x - (1.0 - alpha) * std::log1p(r * x) - alpha * std::log1p((r - 1.0 / alpha) * x));
}

inline double g_second_row_orth(double x, double alpha) {
    detail::check_row_orth_args(x, alpha);
    if (alpha >= 1.0) return 0.0;
    const double r = detail::row_orth_r(x, alpha);
    // implicit derivative of x r^2 + (1 - x/alpha) r - 1 = 0
    const double dr = (r / alpha - r * r) / (2.0 * x * r + 1.0 - x / alpha);
    return 0.5 * dr;
}

inline double g_prime_spectral(double x, const Spectrum& spectrum) {
    return 0.5 * detail::solve_spectral_root(x, spectrum).r;
}

inline double g_spectral(double x, const Spectrum& spectrum) {
    const auto root = detail::solve_spectral_root(x, spectrum);
    if (x == 0.0) return 0.0;
    double acc = 0.0;
    for (const auto& [lambda, w] : spectrum)
        if (w > 0.0) acc += w * std::log1p((root.r - lambda) * x);
    return 0.5 * (root.r * x - acc);
}

inline double g_second_spectral(double x, const Spectrum& spectrum) {
    return 0.5 * detail::solve_spectral_root(x, spectrum).dr;
}

enum class GKind { IidGaussianClosedForm, RowOrthogonalClosedForm, SpectralNumeric };

inline std::string_view to_string(GKind kind) {
    switch (kind) {
        case GKind::IidGaussianClosedForm: return "iid";
        case GKind::RowOrthogonalClosedForm: return "rowortho";
        case GKind::SpectralNumeric: return "spectral";
    }
    return "?";
}

inline GKind parse_gkind(std::string_view name) {
    if (name == "iid") return GKind::IidGaussianClosedForm;
    if (name == "rowortho") return GKind::RowOrthogonalClosedForm;
    if (name == "spectral") return GKind::SpectralNumeric;
    throw InvalidArgument("unknown G-function '" + std::string(name) + "' (expected iid|rowortho|spectral)");
}

/// Value type bundling one ensemble's G with its evaluators.
class GFunction {
public:
    static GFunction iid(double alpha) {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("GFunction::iid: alpha must be in (0, 1]");
        return GFunction(GKind::IidGaussianClosedForm, alpha, {});
    }

    static GFunction row_orthogonal(double alpha) {
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw InvalidArgument("GFunction::row_orthogonal: alpha must be in (0, 1]");
        return GFunction(GKind::RowOrthogonalClosedForm, alpha, {});
    }

    /// `alpha` is informational for spectral G (reported, not used in evaluation).
    static GFunction spectral(Spectrum spectrum, double alpha = std::numeric_limits<double>::quiet_NaN()) {
        validate_spectrum(spectrum);
        if (std::isnan(alpha)) {
            double nonzero = 0.0;
            for (const auto& atom : spectrum)
                if (atom.lambda > 0.0) nonzero += atom.weight;
            alpha = nonzero;
        }
        return GFunction(GKind::SpectralNumeric, alpha, std::move(spectrum));
    }

    static GFunction make(GKind kind, double alpha) {
        switch (kind) {
            case GKind::IidGaussianClosedForm: return iid(alpha);
            case GKind::RowOrthogonalClosedForm: return row_orthogonal(alpha);
            case GKind::SpectralNumeric:
                throw InvalidArgument("GFunction::make: spectral G needs a spectrum");
        }
        throw InvalidArgument("GFunction::make: unknown kind");
    }

    GKind kind() const noexcept { return kind_; }
    double alpha() const noexcept { return alpha_; }
    const Spectrum& spectrum() const noexcept { return spectrum_; }

    double value(double x) const {
        switch (kind_) {
            case GKind::IidGaussianClosedForm: return g_iid(x, alpha_);
            case GKind::RowOrthogonalClosedForm: return g_row_orth(x, alpha_);
            case GKind::SpectralNumeric: return g_spectral(x, spectrum_);
        }
        return 0.0;
    }

    double derivative(double x) const {
        switch (kind_) {
            case GKind::IidGaussianClosedForm: return g_prime_iid(x, alpha_);
            case GKind::RowOrthogonalClosedForm: return g_prime_row_orth(x, alpha_);
            case GKind::SpectralNumeric: return g_prime_spectral(x, spectrum_);
        }
        return 0.0;
    }

    double second_derivative(double x) const {
        switch (kind_) {
            case GKind::IidGaussianClosedForm: return g_second_iid(x, alpha_);
            case GKind::RowOrthogonalClosedForm: return g_second_row_orth(x, alpha_);
            case GKind::SpectralNumeric: return g_second_spectral(x, spectrum_);
        }
        return 0.0;
    }

private:
    GFunction(GKind kind, double alpha, Spectrum spectrum)
        : kind_(kind), alpha_(alpha), spectrum_(std::move(spectrum)) {}

    GKind kind_;
    double alpha_;
    Spectrum spectrum_;
};

/// E = (2/sigma2) G'(-chi/sigma2).
inline double effective_E(double chi, double sigma2, const GFunction& g) {
    if (!(chi >= 0.0)) throw InvalidArgument("effective_E: chi must be >= 0");
    if (!(sigma2 > 0.0)) throw InvalidArgument("effective_E: sigma2 must be > 0");
    return 2.0 / sigma2 * g.derivative(-chi / sigma2);
}

}  // namespace ecsr
