#include <gtest/gtest.h>

#include "hfspec/pump_sim.hpp"
#include "test_support.hpp"

namespace hfspec {
namespace {

Manifolds levels_230() { return solve(testing::surrogate_model(), FieldVector(0.0, 230.0, 0.0)); }

TEST(FrequencyAxis, SpanAlignsToStep) {
  const FrequencyAxis a = FrequencyAxis::span(-1.0, 1.0, 0.01);
  EXPECT_NEAR(a.start, -1.0, 1e-12);
  EXPECT_NEAR(a.stop(), 1.0, 1e-12);
  EXPECT_EQ(a.size, 201);
  // Unaligned limits round outwards so the range is covered.
  const FrequencyAxis b = FrequencyAxis::span(-1.004, 1.004, 0.01);
  EXPECT_NEAR(b.start, -1.01, 1e-12);
  EXPECT_NEAR(b.stop(), 1.01, 1e-12);
  EXPECT_EQ(a.nearest(0.0), 100);
  EXPECT_EQ(a.nearest(0.0049), 100);
  EXPECT_EQ(a.nearest(1.2), -1);
}

TEST(Thermal, EveryEntryOneSixth) {
  const DetuningGrid grid(FrequencyAxis::span(-5.0, 5.0, 0.01));
  const PopulationGrid pop = init_thermal(grid);
  EXPECT_EQ(pop.size(), grid.size());
  EXPECT_LT((pop.rho.array() - 1.0 / 6.0).abs().maxCoeff(), 1e-15);
  EXPECT_LT(pop.max_sum_deviation(), 1e-15);
}

TEST(Thermal, SinglePointGrid) {
  const DetuningGrid grid(FrequencyAxis{0.0, 0.01, 1});
  const PopulationGrid pop = init_thermal(grid);
  ASSERT_EQ(pop.size(), 1);
  for (int i = 0; i < kLevels; ++i) EXPECT_DOUBLE_EQ(pop.rho(0, i), 1.0 / 6.0);
}

TEST(Pump, UniformRedistribution) {
  const Manifolds lv = levels_230();
  const DetuningGrid grid(FrequencyAxis::span(-2.0, 2.0, 0.01));
  PopulationGrid pop = init_thermal(grid);
  // Burn the 1g-1e line of class delta = 0.5.
  const double f = transition_frequency(lv, 0, 0, 0.5);
  const PumpSequence burn = PumpSequence::burn(FrequencyAxis::span(f - 1.0, f + 1.0, 0.01), f);
  // Restrict to a window where only (1g, 1e) is resonant on the grid.
  apply_pump(pop, burn, BranchingMatrix::uniform(), lv);
  const int k = grid.axis().nearest(0.5);
  EXPECT_NEAR(pop.rho(k, 0), 1.0 / 36.0, 1e-12);
  for (int i = 1; i < kLevels; ++i) EXPECT_NEAR(pop.rho(k, i), 1.0 / 6.0 + 1.0 / 36.0, 1e-12);
  EXPECT_LT(pop.max_sum_deviation(), 1e-12);
}

TEST(Pump, ConservesPopulation) {
  const Manifolds lv = levels_230();
  const BranchingMatrix gamma = branching_matrix(lv);
  const DetuningGrid grid = DetuningGrid::covering(lv, -10.0, 10.0, 0.01);
  PopulationGrid pop = init_thermal(grid);
  PumpSequence seq = PumpSequence::chirp(grid.axis(), 0.0, 2.0);
  seq.append(PumpSequence::chirp(grid.axis(), 34.1, 2.0));
  pump_to_steady_state(pop, seq, gamma, lv);
  EXPECT_LT(pop.max_sum_deviation(), 1e-12);
  EXPECT_GE(pop.rho.minCoeff(), 0.0);
}

TEST(Pump, SteadyStateIsIdempotent) {
  const Manifolds lv = levels_230();
  const DetuningGrid grid = DetuningGrid::covering(lv, -5.0, 5.0, 0.01);
  PopulationGrid pop = init_thermal(grid);
  const PumpSequence seq = PumpSequence::chirp(grid.axis(), 0.0, 1.0);
  const PumpReport first = pump_to_steady_state(pop, seq, BranchingMatrix::uniform(), lv);
  EXPECT_TRUE(first.converged);
  const PopulationMatrix snapshot = pop.rho;
  apply_pump(pop, seq, BranchingMatrix::uniform(), lv);
  EXPECT_LT((pop.rho - snapshot).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pump, EmptiesPumpedLevelOfOtherClasses) {
  const Manifolds lv = levels_230();
  const DetuningGrid grid = DetuningGrid::covering(lv, -3.0, 3.0, 0.01);
  PopulationGrid pop = init_thermal(grid);
  pump_to_steady_state(pop, PumpSequence::chirp(grid.axis(), 0.0, 2.0), BranchingMatrix::uniform(), lv);
  // Every class with some line at 0 has that line's ground level empty.
  for (int i = 0; i < kLevels; ++i) {
    for (int j = 0; j < kLevels; ++j) {
      const int k = grid.axis().nearest(-transition_frequency(lv, i, j));
      if (k >= 0) EXPECT_LT(pop.rho(k, i), 1e-9) << i << " " << j;
    }
  }
}

TEST(Pump, EfficiencyZeroIsNoOp) {
  const Manifolds lv = levels_230();
  const DetuningGrid grid = DetuningGrid::covering(lv, -2.0, 2.0, 0.01);
  PopulationGrid pop = init_thermal(grid);
  const PopulationMatrix before = pop.rho;
  apply_pump(pop, PumpSequence::chirp(grid.axis(), 0.0, 1.0), BranchingMatrix::uniform(), lv, 0.0);
  EXPECT_EQ((pop.rho - before).cwiseAbs().maxCoeff(), 0.0);
}

TEST(PumpSequence, ChirpCoversWidthAtGridStep) {
  const FrequencyAxis axis = FrequencyAxis::span(-10.0, 10.0, 0.01);
  const PumpSequence c = PumpSequence::chirp(axis, 1.0, 2.2);
  EXPECT_EQ(c.size(), 221u);
  EXPECT_NEAR(c.components().front(), -0.1, 1e-9);
  EXPECT_NEAR(c.components().back(), 2.1, 1e-9);
  EXPECT_EQ(PumpSequence::chirp(axis, 1.0, 0.0).size(), 1u);
  EXPECT_EQ(c.repeated(3).size(), 663u);
}

TEST(DetuningGrid, GaussianWeightsPeakAtCenter) {
  BroadeningConfig b;
  b.shape = Broadening::gaussian;
  b.fwhm_MHz = 2.0;
  const DetuningGrid grid(FrequencyAxis::span(-3.0, 3.0, 0.01), b);
  const int c = grid.axis().nearest(0.0);
  EXPECT_NEAR(grid.weights()[c], 1.0, 1e-12);
  EXPECT_NEAR(grid.weights()[grid.axis().nearest(1.0)], 0.5, 1e-9);
}

}  // namespace
}  // namespace hfspec
