#include "ecsr/ensembles.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace ecsr;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

Matrix scaled_identity(Eigen::Index m, double v) { return v * Matrix::Identity(m, m); }

}  // namespace

TEST(SampleSignal, SpikeOnlyPriorGivesZeros) {
    Rng rng(1);
    const auto x = sample_signal(PriorBG{0.0, 1.0}, 1000, rng);
    EXPECT_EQ(x.squaredNorm(), 0.0);
}

TEST(SampleSignal, GaussianPriorVariance) {
    Rng rng(2);
    const auto x = sample_signal(PriorBG{1.0, 1.0}, 100000, rng);
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / (x.size() - 1);
    EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(SampleSignal, NonzeroFraction) {
    Rng rng(3);
    const auto x = sample_signal(PriorBG{0.1, 1.0}, 100000, rng);
    const double frac = static_cast<double>((x.array() != 0.0).count()) / x.size();
    EXPECT_NEAR(frac, 0.1, 0.01);
}

TEST(SampleSignal, RejectsInvalidPrior) {
    Rng rng(4);
    EXPECT_THROW(sample_signal(PriorBG{1.5, 1.0}, 10, rng), InvalidArgument);
    EXPECT_THROW(sample_signal(PriorBG{-0.1, 1.0}, 10, rng), InvalidArgument);
    EXPECT_THROW(sample_signal(PriorBG{0.5, 0.0}, 10, rng), InvalidArgument);
}

TEST(SampleMatrix, RowOrthogonalGramIsScaledIdentity) {
    for (auto [n, m] : {std::pair{64, 32}, std::pair{100, 37}, std::pair{50, 50}, std::pair{80, 1}}) {
        Rng rng(10 + n + m);
        const EnsembleSpec spec{EnsembleKind::RowOrthogonal, static_cast<std::size_t>(n), static_cast<std::size_t>(m)};
        const Matrix a = sample_matrix(spec, rng);
        ASSERT_EQ(a.rows(), m);
        ASSERT_EQ(a.cols(), n);
        EXPECT_LT(max_abs(a * a.transpose() - scaled_identity(m, 1.0 / spec.alpha())), 1e-10) << n << "x" << m;
    }
}

TEST(SampleMatrix, RandomDctGramIsScaledIdentity) {
    for (auto [n, m] : {std::pair{64, 32}, std::pair{100, 37}, std::pair{33, 33}}) {
        Rng rng(20 + n + m);
        const EnsembleSpec spec{EnsembleKind::RandomDct, static_cast<std::size_t>(n), static_cast<std::size_t>(m)};
        const Matrix a = sample_matrix(spec, rng);
        EXPECT_LT(max_abs(a * a.transpose() - scaled_identity(m, 1.0 / spec.alpha())), 1e-10) << n << "x" << m;
    }
}

TEST(SampleMatrix, RandomDctRowsAreDistinctDctRows) {
    Rng rng(5);
    const std::size_t n = 40;
    const EnsembleSpec spec{EnsembleKind::RandomDct, n, 13};
    const Matrix a = sample_matrix(spec, rng) / std::sqrt(1.0 / spec.alpha());
    const Matrix dct = dct_matrix(n);
    std::set<Eigen::Index> used;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        Eigen::Index match = -1;
        for (Eigen::Index k = 0; k < dct.rows(); ++k)
            if ((dct.row(k) - a.row(r)).cwiseAbs().maxCoeff() < 1e-12) match = k;
        ASSERT_GE(match, 0);
        EXPECT_TRUE(used.insert(match).second);
    }
}

TEST(DctMatrix, OrthonormalTypeTwo) {
    const std::size_t n = 16;
    const Matrix c = dct_matrix(n);
    EXPECT_LT(max_abs(c * c.transpose() - Matrix::Identity(16, 16)), 1e-12);
    // DC row is constant 1/sqrt(n); entry (k, j) = sqrt(2/n) cos(pi (j + 1/2) k / n) otherwise
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(c(0, j), 1.0 / std::sqrt(16.0), 1e-15);
    EXPECT_NEAR(c(3, 5), std::sqrt(2.0 / 16.0) * std::cos(std::numbers::pi * 5.5 * 3 / 16.0), 1e-15);
}

TEST(SampleMatrix, IidTraceConcentration) {
    Rng rng(6);
    const std::size_t n = 1024;
    const Matrix a = sample_matrix({EnsembleKind::IidGaussian, n, 512}, rng);
    const double t = a.squaredNorm() / n;  // trace(A^T A) / N
    EXPECT_NEAR(t, 1.0, 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(SampleMatrix, IidEntryVariance) {
    Rng rng(7);
    const Matrix a = sample_matrix({EnsembleKind::IidGaussian, 400, 200}, rng);
    const double var = a.squaredNorm() / a.size();
    EXPECT_NEAR(var * 200.0, 1.0, 0.02);
    EXPECT_NEAR(a.mean(), 0.0, 5.0 * std::sqrt(1.0 / 200.0 / a.size()));
}

TEST(SampleMatrix, RejectsTooManyRows) {
    Rng rng(8);
    EXPECT_THROW(sample_matrix({EnsembleKind::IidGaussian, 10, 11}, rng), InvalidArgument);
    EXPECT_THROW(sample_matrix({EnsembleKind::RowOrthogonal, 10, 0}, rng), InvalidArgument);
}

TEST(HaarProperty, FullRowOrthogonalIsOrthogonal) {
    Rng rng(9);
    const Matrix a = sample_matrix({EnsembleKind::RowOrthogonal, 60, 60}, rng);
    EXPECT_LT(max_abs(a.transpose() * a - Matrix::Identity(60, 60)), 1e-10);
}

TEST(HaarProperty, EigenvaluesAreZeroOrInverseAlpha) {
    Rng rng(10);
    const EnsembleSpec spec{EnsembleKind::RowOrthogonal, 60, 24};
    const Matrix a = sample_matrix(spec, rng);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(a.transpose() * a);
    int nonzero = 0;
    for (double v : eig.eigenvalues()) {
        const double dist = std::min(std::abs(v), std::abs(v - 1.0 / spec.alpha()));
        EXPECT_LT(dist, 1e-8);
        nonzero += std::abs(v) > 0.5;
    }
    EXPECT_EQ(nonzero, 24);
}

TEST(HaarProperty, HaarOrthogonalIsOrthogonalWithUniformSigns) {
    // Sign correction makes E[Q_11] = 0; without it the first column leans positive.
    double sum = 0.0;
    for (int s = 0; s < 400; ++s) {
        Rng rng(1000 + s);
        const Matrix q = haar_orthogonal(8, rng);
        ASSERT_LT(max_abs(q.transpose() * q - Matrix::Identity(8, 8)), 1e-12);
        sum += q(0, 0);
    }
    // Var(Q_11) = 1/8; the mean of 400 draws has sd 0.0177
    EXPECT_LT(std::abs(sum / 400.0), 4.0 * std::sqrt(1.0 / 8.0 / 400.0));
}

TEST(IidSpectrum, MeanEigenvalueAndStableEdge) {
    std::vector<double> maxima;
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        Rng rng(seed);
        const Matrix a = sample_matrix({EnsembleKind::IidGaussian, 1024, 512}, rng);
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(a * a.transpose(), Eigen::EigenvaluesOnly);
        // nonzero eigenvalues of A^T A are those of A A^T; the rest are 0
        const double mean = eig.eigenvalues().sum() / 1024.0;
        EXPECT_NEAR(mean, 1.0, 0.05);
        maxima.push_back(eig.eigenvalues().maxCoeff());
    }
    const double edge = std::pow(1.0 + std::sqrt(0.5), 2) / 0.5;
    for (double v : maxima) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_NEAR(v, edge, 0.1 * edge);
    }
}

TEST(Observe, NoiselessIsExact) {
    Rng rng(14);
    const Matrix a = sample_matrix({EnsembleKind::IidGaussian, 30, 20}, rng);
    const Vector x = sample_signal(PriorBG{0.3, 1.0}, 30, rng);
    const Vector y = observe(a, x, 0.0, rng);
    EXPECT_EQ((y - a * x).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Observe, ZeroSignalNoiseVariance) {
    Rng rng(15);
    const std::size_t m = 10000;
    const Matrix a = Matrix::Zero(m, 3);
    const Vector y = observe(a, Vector::Zero(3), 0.01, rng);
    const double var = (y.array() - y.mean()).square().sum() / (m - 1);
    EXPECT_NEAR(var, 0.01, 0.001);
}

TEST(Observe, LengthAndDimensionErrors) {
    Rng rng(16);
    const Matrix a = sample_matrix({EnsembleKind::IidGaussian, 1024, 512}, rng);
    const Vector x = sample_signal(PriorBG{0.1, 1.0}, 1024, rng);
    EXPECT_EQ(observe(a, x, 0.01, rng).size(), 512);
    EXPECT_THROW(observe(a, Vector::Zero(10), 0.01, rng), InvalidArgument);
    EXPECT_THROW(observe(a, x, -1.0, rng), InvalidArgument);
}

TEST(Reproducibility, SameSeedSameInstance) {
    for (auto kind : {EnsembleKind::IidGaussian, EnsembleKind::RowOrthogonal, EnsembleKind::RandomDct}) {
        const EnsembleSpec spec{kind, 64, 20};
        const auto a = make_instance(spec, PriorBG{0.2, 1.0}, 0.01, 77);
        const auto b = make_instance(spec, PriorBG{0.2, 1.0}, 0.01, 77);
        const auto c = make_instance(spec, PriorBG{0.2, 1.0}, 0.01, 78);
        EXPECT_TRUE(a.a == b.a);
        EXPECT_TRUE(a.x0 == b.x0);
        EXPECT_TRUE(a.y == b.y);
        EXPECT_FALSE(a.y == c.y);
        EXPECT_EQ(a.seed, 77u);
    }
}

TEST(EnsembleNames, RoundTrip) {
    for (auto kind : {EnsembleKind::IidGaussian, EnsembleKind::RowOrthogonal, EnsembleKind::RandomDct})
        EXPECT_EQ(parse_ensemble(to_string(kind)), kind);
    EXPECT_THROW(parse_ensemble("hadamard"), InvalidArgument);
}

TEST(ChooseRows, DistinctSortedAndUniform) {
    std::vector<int> hits(10, 0);
    for (int s = 0; s < 2000; ++s) {
        Rng rng(s);
        const auto rows = choose_rows(10, 3, rng);
        ASSERT_EQ(rows.size(), 3u);
        EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end()));
        EXPECT_EQ(std::set<std::size_t>(rows.begin(), rows.end()).size(), 3u);
        for (auto r : rows) ++hits[r];
    }
    // each row is picked with probability 3/10: 600 expected, sd ~ 20.5
    for (int h : hits) EXPECT_NEAR(h, 600, 90);
}
