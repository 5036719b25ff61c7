// Paired comparison on row-orthogonal matrices: the i.i.d. G is the wrong one there,
// so its fixed point should be worse than EC with the row-orthogonal G.

#include "ecsr/ec_solver.hpp"
#include "ecsr/harness/experiment.hpp"

#include <gtest/gtest.h>

using namespace ecsr;

TEST(AmpBaseline, WorseThanMatchedGOnRowOrthogonalMatrices) {
    const PriorBG prior{0.1, 1.0};
    constexpr double sigma2 = 0.01;
    constexpr std::size_t n = 512, trials = 200;
    const EnsembleSpec spec{EnsembleKind::RowOrthogonal, n, n / 2};
    const auto g = GFunction::row_orthogonal(spec.alpha());
    std::vector<double> ec, amp;
    std::size_t amp_worse = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto obs = harness::make_trial_instance(spec, prior, sigma2, harness::trial_seed(5, spec.kind, 0, t));
        const double e_ec = nmse(ec_solve(obs, prior, g).m, obs.x0);
        const double e_amp = nmse(amp_baseline(obs, prior).m, obs.x0);
        ec.push_back(e_ec);
        amp.push_back(e_amp);
        amp_worse += e_amp > e_ec;
    }
    const double med_ec = harness::median_of(ec), med_amp = harness::median_of(amp);
    RecordProperty("median_ec", std::to_string(med_ec));
    RecordProperty("median_amp", std::to_string(med_amp));
    EXPECT_GT(med_amp, med_ec);
    EXPECT_GT(amp_worse, trials / 2);
}
