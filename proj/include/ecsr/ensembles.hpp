#pragma once

// Measurement-matrix ensembles, sparse signal sampling and the noisy linear
// observation y = A x0 + n.
//
// All three ensembles are normalized so that trace(A^T A) = N: i.i.d. entries have
// variance 1/M, and the orthogonal-row ensembles are scaled by sqrt(N/M) so that the
// nonzero eigenvalues of A^T A equal 1/alpha.

#include "ecsr/core.hpp"

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ecsr {

using Rng = std::mt19937_64;

enum class EnsembleKind { IidGaussian, RowOrthogonal, RandomDct };

inline std::string_view to_string(EnsembleKind kind) {
    switch (kind) {
        case EnsembleKind::IidGaussian: return "iid";
        case EnsembleKind::RowOrthogonal: return "rowortho";
        case EnsembleKind::RandomDct: return "dct";
    }
    return "?";
}

inline EnsembleKind parse_ensemble(std::string_view name) {
    if (name == "iid") return EnsembleKind::IidGaussian;
    if (name == "rowortho") return EnsembleKind::RowOrthogonal;
    if (name == "dct") return EnsembleKind::RandomDct;
    throw InvalidArgument("unknown ensemble '" + std::string(name) + "' (expected iid|rowortho|dct)");
}

struct EnsembleSpec {
    EnsembleKind kind = EnsembleKind::RowOrthogonal;
    std::size_t n = 1024;
    std::size_t m = 512;

    double alpha() const noexcept { return static_cast<double>(m) / static_cast<double>(n); }

    void validate() const {
        if (n == 0 || m == 0) throw InvalidArgument("EnsembleSpec: dimensions must be positive");
        if (m > n)
            throw InvalidArgument("EnsembleSpec: m (" + std::to_string(m) + ") exceeds n (" +
                                  std::to_string(n) + ")");
    }
};

/// One realized measurement problem.
struct ObservationInstance {
    Matrix a;
    Vector y;
    Vector x0;
    double sigma2 = 0.01;
    std::uint64_t seed = 0;

    std::size_t n() const noexcept { return static_cast<std::size_t>(a.cols()); }
    std::size_t m() const noexcept { return static_cast<std::size_t>(a.rows()); }
};

inline Vector sample_signal(const PriorBG& prior, std::size_t n, Rng& rng) {
    prior.validate();
    if (n == 0) throw InvalidArgument("sample_signal: n must be at least 1");
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::normal_distribution<double> slab(0.0, std::sqrt(prior.sigma_x2));
    Vector x(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        // Both draws are always taken so the stream layout does not depend on rho.
        const double u = coin(rng);
        const double g = slab(rng);
        x[i] = u < prior.rho ? g : 0.0;
    }
    return x;
}

inline Matrix standard_gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    // Column-major fill keeps the draw order tied to storage order.
    for (Eigen::Index j = 0; j < g.cols(); ++j)
        for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    return g;
}

namespace detail {

/// Orthonormal columns of the QR factor of `g`, with column signs fixed so that
/// diag(R) > 0. For Gaussian `g` this yields Haar-distributed frames.
inline Matrix sign_corrected_q(const Matrix& g) {
    Eigen::HouseholderQR<Matrix> qr(g);
    const Eigen::Index cols = g.cols();
    Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), cols);
    const auto& packed = qr.matrixQR();
    for (Eigen::Index j = 0; j < cols; ++j)
        if (packed(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

}  // namespace detail

/// Haar-distributed n x n orthogonal matrix.
inline Matrix haar_orthogonal(std::size_t n, Rng& rng) {
    if (n == 0) throw InvalidArgument("haar_orthogonal: n must be positive");
    return detail::sign_corrected_q(standard_gaussian(n, n, rng));
}

/// `m` distinct indices from {0, ..., n-1}, uniform over subsets, ascending.
inline std::vector<std::size_t> choose_rows(std::size_t n, std::size_t m, Rng& rng) {
    if (m > n) throw InvalidArgument("choose_rows: m exceeds n");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// Entry (k, j) of the orthonormal n-point DCT-II matrix.
inline double dct_coefficient(std::size_t n, std::size_t k, std::size_t j) {
    const double nd = static_cast<double>(n);
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / nd);
    return scale * std::cos(std::numbers::pi * static_cast<double>((2 * j + 1) * k) / (2.0 * nd));
}

inline Matrix dct_matrix(std::size_t n) {
    const auto nn = static_cast<Eigen::Index>(n);
    Matrix c(nn, nn);
    for (Eigen::Index k = 0; k < nn; ++k)
        for (Eigen::Index j = 0; j < nn; ++j)
            c(k, j) = dct_coefficient(n, static_cast<std::size_t>(k), static_cast<std::size_t>(j));
    return c;
}

inline Matrix sample_matrix(const EnsembleSpec& spec, Rng& rng) {
    spec.validate();
    const double row_scale = std::sqrt(static_cast<double>(spec.n) / static_cast<double>(spec.m));
    switch (spec.kind) {
        case EnsembleKind::IidGaussian: {
            Matrix a = standard_gaussian(spec.m, spec.n, rng);
            a /= std::sqrt(static_cast<double>(spec.m));
            return a;
        }
        case EnsembleKind::RowOrthogonal: {
            // M rows of a Haar matrix are a Haar M-frame; the thin sign-corrected QR of an
            // n x m Gaussian produces one directly.
            Matrix frame = detail::sign_corrected_q(standard_gaussian(spec.n, spec.m, rng));
            return row_scale * frame.transpose();
        }
        case EnsembleKind::RandomDct: {
            const auto rows = choose_rows(spec.n, spec.m, rng);
            Matrix a(static_cast<Eigen::Index>(spec.m), static_cast<Eigen::Index>(spec.n));
            for (Eigen::Index r = 0; r < a.rows(); ++r)
                for (Eigen::Index j = 0; j < a.cols(); ++j)
                    a(r, j) = row_scale * dct_coefficient(spec.n, rows[static_cast<std::size_t>(r)],
                                                          static_cast<std::size_t>(j));
            return a;
        }
    }
    throw InvalidArgument("sample_matrix: unknown ensemble");
}

/// y = A x0 + n, n ~ N(0, sigma2 I).
inline Vector observe(const Matrix& a, const Vector& x0, double sigma2, Rng& rng) {
    if (a.cols() != x0.size())
        throw InvalidArgument("observe: A has " + std::to_string(a.cols()) + " columns but x0 has length " +
                              std::to_string(x0.size()));
    if (!(sigma2 >= 0.0)) throw InvalidArgument("observe: sigma2 must be nonnegative");
    Vector y = a * x0;
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(sigma2);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double n = normal(rng);
        y[i] += sd * n;
    }
    return y;
}

/// Draws x0, then A, then the noise from one stream seeded with `seed`.
inline ObservationInstance make_instance(const EnsembleSpec& spec, const PriorBG& prior, double sigma2,
                                         std::uint64_t seed) {
    if (!(sigma2 > 0.0)) throw InvalidArgument("make_instance: sigma2 must be positive");
    Rng rng(seed);
    ObservationInstance obs;
    obs.x0 = sample_signal(prior, spec.n, rng);
    obs.a = sample_matrix(spec, rng);
    obs.y = observe(obs.a, obs.x0, sigma2, rng);
    obs.sigma2 = sigma2;
    obs.seed = seed;
    return obs;
}

}  // namespace ecsr
