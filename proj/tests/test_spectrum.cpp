#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hfspec/error.hpp"
#include "hfspec/spectrum.hpp"
#include "test_support.hpp"

namespace hfspec {
namespace {

Manifolds levels_230() { return solve(testing::surrogate_model(), FieldVector(0.0, 230.0, 0.0)); }

TEST(Lorentzian, PeakNormalized) {
  EXPECT_DOUBLE_EQ(lorentzian(0.0, 0.05), 1.0);
  EXPECT_NEAR(lorentzian(0.025, 0.05), 0.5, 1e-15);
}

TEST(Synthesis, FftMatchesDirectSum) {
  const Manifolds lv = levels_230();
  const DetuningGrid grid = DetuningGrid::covering(lv, -4.0, 4.0, 0.01);
  PopulationGrid pop = init_thermal(grid);
  pump_to_steady_state(pop, PumpSequence::chirp(grid.axis(), 0.0, 1.5), branching_matrix(lv), lv);
  const FrequencyAxis probe = FrequencyAxis::span(-4.0, 4.0, 0.01);
  const BranchingMatrix gamma = branching_matrix(lv);
  const Spectrum fft = synthesize_spectrum(pop, grid, gamma, lv, probe);
  const Spectrum direct = synthesize_spectrum_direct(pop, grid, gamma, lv, probe);
  ASSERT_EQ(fft.od.size(), direct.od.size());
  EXPECT_LT((fft.od - direct.od).cwiseAbs().maxCoeff(), 1e-9 * direct.od.cwiseAbs().maxCoeff());
}

TEST(Synthesis, ThreadCountDoesNotChangeResult) {
  const Manifolds lv = levels_230();
  const DetuningGrid grid = DetuningGrid::covering(lv, -3.0, 3.0, 0.01);
  const PopulationGrid pop = init_thermal(grid);
  const FrequencyAxis probe = FrequencyAxis::span(-3.0, 3.0, 0.01);
  SynthesisOptions one;
  SynthesisOptions four;
  four.threads = 4;
  const Spectrum a = synthesize_spectrum(pop, grid, BranchingMatrix::uniform(), lv, probe, one);
  const Spectrum b = synthesize_spectrum(pop, grid, BranchingMatrix::uniform(), lv, probe, four);
  EXPECT_EQ((a.od - b.od).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Synthesis, LinearInPopulations) {
  const Manifolds lv = levels_230();
  const DetuningGrid grid = DetuningGrid::covering(lv, -3.0, 3.0, 0.01);
  const FrequencyAxis probe = FrequencyAxis::span(-3.0, 3.0, 0.01);
  PopulationGrid a = init_thermal(grid);
  PopulationGrid b = init_thermal(grid);
  pump_to_steady_state(b, PumpSequence::chirp(grid.axis(), 0.5, 1.0), BranchingMatrix::uniform(), lv);
  PopulationGrid sum = a;
  sum.rho = 0.3 * a.rho + 1.7 * b.rho;
  const BranchingMatrix gamma = branching_matrix(lv);
  const Spectrum sa = synthesize_spectrum(a, grid, gamma, lv, probe);
  const Spectrum sb = synthesize_spectrum(b, grid, gamma, lv, probe);
  const Spectrum ss = synthesize_spectrum(sum, grid, gamma, lv, probe);
  EXPECT_LT((ss.od - (0.3 * sa.od + 1.7 * sb.od)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Synthesis, ThermalFlatGivesUnitOd) {
  const Manifolds lv = levels_230();
  const FrequencyAxis probe = FrequencyAxis::span(-150.0, 150.0, 0.01);
  const DetuningGrid grid = DetuningGrid::covering(lv, probe.start, probe.stop(), 0.01, 5.0);
  SynthesisOptions opt;
  opt.chi = normalization_chi(grid, BranchingMatrix::uniform(), lv, probe, opt, 1.0);
  const Spectrum s = synthesize_spectrum(init_thermal(grid), grid, BranchingMatrix::uniform(), lv, probe, opt);
  EXPECT_NEAR(s.od.maxCoeff(), 1.0, 1e-12);
  // Central region: every line of every class is on the grid.
  const Eigen::VectorXd centre = s.od.segment(probe.nearest(-50.0), probe.nearest(50.0) - probe.nearest(-50.0));
  EXPECT_LT(centre.maxCoeff() - centre.minCoeff(), 1e-5);
}

TEST(Synthesis, SingleClassGivesSixLines) {
  const Manifolds lv = levels_230();
  const DetuningGrid grid(FrequencyAxis::span(-0.5, 0.5, 0.01));
  PopulationGrid pop = init_thermal(grid);
  pop.rho.setZero();
  const int k0 = grid.axis().nearest(0.0);
  pop.rho(k0, 4) = 1.0;
  const BranchingMatrix gamma = branching_matrix(lv);
  const FrequencyAxis probe = FrequencyAxis::span(-200.0, 200.0, 0.01);
  const Spectrum s = synthesize_spectrum(pop, grid, gamma, lv, probe);
  for (int j = 0; j < kLevels; ++j) {
    const double x = transition_frequency(lv, 4, j, grid[k0]);
    const int k = probe.nearest(x);
    EXPECT_NEAR(s.od[k], gamma(4, j) * lorentzian(probe[k] - x, 0.05), 1e-3) << j;
  }
}

TEST(Synthesis, RejectsUndersampledProbe) {
  const Manifolds lv = levels_230();
  const DetuningGrid grid = DetuningGrid::covering(lv, -1.0, 1.0, 0.01);
  const FrequencyAxis coarse = FrequencyAxis::span(-1.0, 1.0, 0.05);
  EXPECT_THROW(synthesize_spectrum(init_thermal(grid), grid, BranchingMatrix::uniform(), lv, coarse),
               InputError);
}

TEST(Difference, IdenticalSpectraAreZero) {
  Spectrum a;
  a.axis = FrequencyAxis::span(0.0, 1.0, 0.01);
  a.od = Eigen::VectorXd::LinSpaced(a.axis.size, 0.0, 1.0);
  EXPECT_EQ(shb_difference(a, a).od.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Extrema, ZeroSpectrumHasNone) {
  Spectrum d;
  d.axis = FrequencyAxis::span(-1.0, 1.0, 0.01);
  d.od = Eigen::VectorXd::Zero(d.axis.size);
  const ExtremaSet e = count_extrema(d, 1e-6);
  EXPECT_TRUE(e.holes.empty());
  EXPECT_TRUE(e.antiholes.empty());
}

TEST(Extrema, ThreeSyntheticDips) {
  Spectrum d;
  d.axis = FrequencyAxis::span(-5.0, 5.0, 0.01);
  d.od = Eigen::VectorXd::Zero(d.axis.size);
  const double centres[] = {-3.21, 0.4, 2.87};
  for (int k = 0; k < d.axis.size; ++k) {
    for (double c : centres) d.od[k] -= 0.2 * lorentzian(d.axis[k] - c, 0.05);
    d.od[k] += 0.05 * lorentzian(d.axis[k] - 1.5, 0.05);
  }
  const ExtremaSet e = count_extrema(d, 0.01);
  ASSERT_EQ(e.holes.size(), 3u);
  for (int n = 0; n < 3; ++n) EXPECT_NEAR(e.holes[n].frequency, centres[n], d.axis.step);
  ASSERT_EQ(e.antiholes.size(), 1u);
  EXPECT_NEAR(e.antiholes[0].frequency, 1.5, d.axis.step);
}

TEST(Extrema, MergeToleranceJoinsNeighbours) {
  Spectrum d;
  d.axis = FrequencyAxis::span(-1.0, 1.0, 0.01);
  d.od = Eigen::VectorXd::Zero(d.axis.size);
  for (int k = 0; k < d.axis.size; ++k) {
    d.od[k] = 0.10 * lorentzian(d.axis[k] + 0.15, 0.05) + 0.12 * lorentzian(d.axis[k] - 0.15, 0.05);
  }
  EXPECT_EQ(count_extrema(d, 0.01, 0.0).antiholes.size(), 2u);
  const ExtremaSet merged = count_extrema(d, 0.01, 0.5);
  ASSERT_EQ(merged.antiholes.size(), 1u);
  EXPECT_NEAR(merged.antiholes[0].frequency, 0.15, d.axis.step);
}

TEST(ResonantOd, ClosedForms) {
  Vector6d polarized = Vector6d::Zero();
  polarized[4] = 1.0;
  EXPECT_NEAR(resonant_od(BranchingMatrix::uniform(), polarized, {4, 5}), 1.0 / 6.0, 1e-15);
  const BranchingMatrix g = branching_matrix(solve(testing::surrogate_model(), FieldVector(-30.8, 227.0, 0.0)));
  EXPECT_NEAR(resonant_od(g, polarized, {4, 5}), 0.750, 0.005);
  EXPECT_NEAR(resonant_od(g, Matrix6d::Constant(1.0 / 6.0)), 1.0, 1e-12);
  EXPECT_NEAR(resonant_od(BranchingMatrix::uniform(), Matrix6d::Constant(1.0 / 6.0)), 1.0, 1e-12);
}

}  // namespace
}  // namespace hfspec
