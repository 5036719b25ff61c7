#include "ecsr/ec_solver.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ecsr;

namespace {

const PriorBG kSparse{0.1, 1.0};

// Damping small enough for the Gaussian-prior map on every ensemble at alpha = 1/2.
SolverParams gaussian_prior_params() {
    SolverParams p;
    p.gamma = 0.005;
    p.max_iter = 40000;
    p.tol = 1e-11;
    return p;
}

ObservationInstance instance(EnsembleKind kind, std::size_t n, std::size_t m, const PriorBG& prior,
                             std::uint64_t seed) {
    return make_instance({kind, n, m}, prior, 0.01, seed);
}

}  // namespace

class GaussianPriorExactness : public ::testing::TestWithParam<EnsembleKind> {};

TEST_P(GaussianPriorExactness, FixedPointIsLinearMmse) {
    const PriorBG gauss{1.0, 1.0};
    const auto obs = instance(GetParam(), 256, 128, gauss, 3);
    const Vector ref = oracle::linear_mmse_lu(obs.a, obs.y, obs.sigma2, 1.0);
    for (auto g : {GFunction::iid(0.5), GFunction::row_orthogonal(0.5)}) {
        const auto st = ec_solve(obs, gauss, g, gaussian_prior_params());
        EXPECT_TRUE(st.converged);
        EXPECT_LE((st.m - ref).norm() / ref.norm(), 1e-8);
    }
    const auto amp = amp_baseline(obs, gauss, gaussian_prior_params());
    EXPECT_LE((amp.m - ref).norm() / ref.norm(), 1e-8);
}

INSTANTIATE_TEST_SUITE_P(AllEnsembles, GaussianPriorExactness,
                         ::testing::Values(EnsembleKind::IidGaussian, EnsembleKind::RowOrthogonal,
                                           EnsembleKind::RandomDct),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(EcSolve, ZeroObservationsKeepZeroMean) {
    const auto obs0 = instance(EnsembleKind::RowOrthogonal, 64, 32, kSparse, 4);
    ObservationInstance obs = obs0;
    obs.y.setZero();
    const auto g = GFunction::row_orthogonal(0.5);
    const auto st = ec_solve(obs, kSparse, g);
    ASSERT_TRUE(st.converged);
    EXPECT_EQ(st.m.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(st.h.cwiseAbs().maxCoeff(), 0.0);
    // chi solves chi = Q(0, E(chi)) with every component identical
    const double e = effective_E(st.chi, obs.sigma2, g);
    EXPECT_NEAR(st.chi, posterior_second_moment(0.0, e, kSparse), 1e-6 * st.chi);
}

TEST(EcSolve, EIsConsistentWithChiAtExit) {
    const auto obs = instance(EnsembleKind::IidGaussian, 128, 64, kSparse, 5);
    const auto g = GFunction::iid(0.5);
    for (std::size_t iters : {1u, 7u, 3000u}) {
        SolverParams p;
        p.max_iter = iters;
        const auto st = ec_solve(obs, kSparse, g, p);
        EXPECT_EQ(st.e, effective_E(std::max(st.chi, 1e-12), obs.sigma2, g));
        EXPECT_GE(st.chi, 0.0);
        EXPECT_GT(st.e, 0.0);
        EXPECT_EQ(st.m.size(), 128);
        EXPECT_EQ(st.q_vec.size(), 128);
    }
}

TEST(EcSolve, FixedPointResidual) {
    const auto obs = instance(EnsembleKind::RowOrthogonal, 256, 128, kSparse, 6);
    const auto g = GFunction::row_orthogonal(0.5);
    const auto st = ec_solve(obs, kSparse, g);
    ASSERT_TRUE(st.converged);
    SolverParams one;
    one.gamma = 1.0;
    one.max_iter = 1;
    one.init_m = st.m;
    one.init_chi = st.chi;
    const auto next = ec_solve(obs, kSparse, g, one);
    EXPECT_LE((next.m - st.m).norm() / std::sqrt(256.0), 10.0 * SolverParams{}.tol);
    EXPECT_LE(std::abs(next.chi - st.chi), 1e-6 * st.chi);
}

TEST(EcSolve, UndampedStepIsThePlainMap) {
    const auto obs = instance(EnsembleKind::IidGaussian, 64, 40, kSparse, 7);
    const auto g = GFunction::iid(40.0 / 64.0);
    SolverParams one;
    one.gamma = 1.0;
    one.max_iter = 1;
    one.init_chi = 0.02;
    one.init_m = Vector::Constant(64, 0.05);
    const auto st = ec_solve(obs, kSparse, g, one);
    const double e = effective_E(0.02, obs.sigma2, g);
    const Vector h = obs.a.transpose() * (obs.y - obs.a * *one.init_m) / obs.sigma2 + e * *one.init_m;
    double chi = 0.0;
    for (Eigen::Index i = 0; i < 64; ++i) {
        const auto mom = posterior_moments(h[i], e, kSparse);
        EXPECT_NEAR(st.m[i], mom.mean, 1e-15);
        chi += mom.variance / 64.0;
    }
    EXPECT_NEAR(st.chi, chi, 1e-15);
}

TEST(EcSolve, DampingDoesNotMoveTheFixedPoint) {
    const auto obs = instance(EnsembleKind::RowOrthogonal, 256, 128, kSparse, 8);
    const auto g = GFunction::row_orthogonal(0.5);
    SolverParams slow, fast;
    slow.gamma = 0.05;
    fast.gamma = 0.2;
    slow.max_iter = fast.max_iter = 20000;
    const auto a = ec_solve(obs, kSparse, g, slow);
    const auto b = ec_solve(obs, kSparse, g, fast);
    ASSERT_TRUE(a.converged);
    ASSERT_TRUE(b.converged);
    EXPECT_NEAR(nmse(a.m, obs.x0), nmse(b.m, obs.x0), 1e-6);
}

TEST(EcSolve, Deterministic) {
    const auto obs = instance(EnsembleKind::RandomDct, 128, 64, kSparse, 9);
    const auto g = GFunction::row_orthogonal(0.5);
    const auto a = ec_solve(obs, kSparse, g);
    const auto b = ec_solve(instance(EnsembleKind::RandomDct, 128, 64, kSparse, 9), kSparse, g);
    EXPECT_TRUE(a.m == b.m);
    EXPECT_EQ(a.chi, b.chi);
    EXPECT_EQ(a.iter, b.iter);
}

TEST(EcSolve, DivergenceCarriesIteration) {
    const PriorBG gauss{1.0, 1.0};
    const auto obs = instance(EnsembleKind::RowOrthogonal, 64, 32, gauss, 10);
    try {
        ec_solve(obs, gauss, GFunction::row_orthogonal(0.5));  // gamma = 0.05 is unstable here
        FAIL() << "expected divergence";
    } catch (const DivergenceError& err) {
        EXPECT_GT(err.iteration(), 1u);
        EXPECT_LE(err.iteration(), 3000u);
    }
}

TEST(EcSolve, InputValidation) {
    const auto obs = instance(EnsembleKind::IidGaussian, 32, 16, kSparse, 11);
    const auto g = GFunction::iid(0.5);
    EXPECT_THROW(ec_solve(obs.a, Vector::Zero(3), 0.01, kSparse, g), InvalidArgument);
    EXPECT_THROW(ec_solve(obs.a, obs.y, 0.0, kSparse, g), InvalidArgument);
    SolverParams bad;
    bad.gamma = 0.0;
    EXPECT_THROW(ec_solve(obs, kSparse, g, bad), InvalidArgument);
    bad = {};
    bad.max_iter = 0;
    EXPECT_THROW(ec_solve(obs, kSparse, g, bad), InvalidArgument);
    bad = {};
    bad.init_m = Vector::Zero(5);
    EXPECT_THROW(ec_solve(obs, kSparse, g, bad), InvalidArgument);
    bad = {};
    bad.init_chi = -1.0;
    EXPECT_THROW(ec_solve(obs, kSparse, g, bad), InvalidArgument);
}

TEST(Nmse, Examples) {
    const Vector x = (Vector(4) << 1.0, -2.0, 0.0, 0.5).finished();
    EXPECT_EQ(nmse(x, x), 0.0);
    EXPECT_EQ(nmse(Vector::Zero(4), x), 1.0);
    EXPECT_EQ(nmse(2.0 * x, x), 1.0);
    EXPECT_THROW(nmse(x, Vector::Zero(4)), InvalidArgument);
    EXPECT_THROW(nmse(Vector::Zero(3), x), InvalidArgument);
}

TEST(EcFreeEnergy, StationaryAtConvergedState) {
    const auto obs = instance(EnsembleKind::RowOrthogonal, 128, 64, kSparse, 12);
    const auto g = GFunction::row_orthogonal(0.5);
    SolverParams p;
    p.tol = 1e-12;
    p.max_iter = 50000;
    const auto st = ec_solve(obs, kSparse, g, p);
    ASSERT_TRUE(st.converged);
    const double n = 128.0;
    const double q_cap = st.chi + st.m.squaredNorm() / n;
    auto phi = [&](const Vector& m, double qc, const Vector& h, double e) {
        return ec_objective(m, qc, h, e, obs.a, obs.y, obs.sigma2, kSparse, g);
    };
    const double base = ec_free_energy(st, obs, kSparse, g);
    EXPECT_NEAR(base, phi(st.m, q_cap, st.h, st.e), 1e-9 * std::abs(base));
    const double tol = 1e-4 * (1.0 + std::abs(base));

    EXPECT_LE(std::abs(oracle::central_difference([&](double v) { return phi(st.m, v, st.h, st.e); }, q_cap, 1e-6)),
              tol);
    EXPECT_LE(std::abs(oracle::central_difference([&](double v) { return phi(st.m, q_cap, st.h, v); }, st.e, 1e-4)),
              tol);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<Eigen::Index> pick(0, 127);
    for (int k = 0; k < 12; ++k) {
        const Eigen::Index i = pick(rng);
        auto along_m = [&](double v) {
            Vector m = st.m;
            m[i] = v;
            return phi(m, q_cap, st.h, st.e);
        };
        auto along_h = [&](double v) {
            Vector h = st.h;
            h[i] = v;
            return phi(st.m, q_cap, h, st.e);
        };
        EXPECT_LE(std::abs(oracle::central_difference(along_m, st.m[i], 1e-6)), tol) << "m_" << i;
        EXPECT_LE(std::abs(oracle::central_difference(along_h, st.h[i], 1e-6)), tol) << "h_" << i;
    }
}

TEST(EcFreeEnergy, GaussianPriorStationaryAtLinearMmse) {
    // Any chi works: with E matched to chi and h built from the linear MMSE m, both the
    // m- and h-gradients vanish.
    const PriorBG gauss{1.0, 1.0};
    const auto obs = instance(EnsembleKind::IidGaussian, 64, 32, gauss, 13);
    const auto g = GFunction::iid(0.5);
    const Vector m = oracle::linear_mmse_lu(obs.a, obs.y, obs.sigma2, 1.0);
    const double chi = 0.05;
    const double e = effective_E(chi, obs.sigma2, g);
    const Vector h = obs.a.transpose() * (obs.y - obs.a * m) / obs.sigma2 + e * m;
    const double q_cap = chi + m.squaredNorm() / 64.0;
    const double base = ec_objective(m, q_cap, h, e, obs.a, obs.y, obs.sigma2, gauss, g);
    for (Eigen::Index i : {0, 17, 63}) {
        auto along_m = [&](double v) {
            Vector mm = m;
            mm[i] = v;
            return ec_objective(mm, q_cap, h, e, obs.a, obs.y, obs.sigma2, gauss, g);
        };
        auto along_h = [&](double v) {
            Vector hh = h;
            hh[i] = v;
            return ec_objective(m, q_cap, hh, e, obs.a, obs.y, obs.sigma2, gauss, g);
        };
        EXPECT_LE(std::abs(oracle::central_difference(along_m, m[i], 1e-6)), 1e-5 * (1.0 + std::abs(base)));
        EXPECT_LE(std::abs(oracle::central_difference(along_h, h[i], 1e-6)), 1e-5 * (1.0 + std::abs(base)));
    }
}

TEST(EcFreeEnergy, IidTermMatchesLogDeterminantForm) {
    const auto obs = instance(EnsembleKind::IidGaussian, 100, 40, kSparse, 14);
    const double alpha = 0.4, q = 0.03, q_cap = 0.05, s2 = obs.sigma2;
    const double term = -100.0 * GFunction::iid(alpha).value(-(q_cap - q) / s2);
    EXPECT_NEAR(term, 0.5 * 40.0 * std::log1p((q_cap - q) / (alpha * s2)), 1e-12 * std::abs(term));
}
