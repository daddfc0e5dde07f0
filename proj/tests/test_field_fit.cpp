#include <random>

#include <gtest/gtest.h>

#include "hfspec/error.hpp"
#include "hfspec/field_fit.hpp"
#include "test_support.hpp"

namespace hfspec {
namespace {

using testing::surrogate_model;

std::vector<RhsLine> synthetic_rhs(const SpinModel& model, const FieldVector& b, bool merged) {
  const RhsLineSet s = rhs_lines(model, b);
  std::vector<RhsLine> lines;
  for (int k = 0; k < kRhsLines; ++k) {
    if (merged) {
      lines.push_back({k, Subsite::merged, s.subsite1[k], 1.0});
    } else {
      lines.push_back({k, Subsite::first, s.subsite1[k], 1.0});
      lines.push_back({k, Subsite::second, s.subsite2[k], 1.0});
    }
  }
  return lines;
}

TEST(FieldFitRhs, NoiselessMergedRoundTrip) {
  const FieldVector truth(-20.0, 240.0, 0.0);
  const FieldFitResult r =
      fit_field_rhs(surrogate_model(), synthetic_rhs(surrogate_model(), truth, true), FieldVector(0.0, 230.0, 0.0));
  EXPECT_TRUE(r.plane_constrained);
  EXPECT_LT((r.field.mT() - truth.mT()).norm(), 0.01);
  EXPECT_LT(r.rms_kHz, 0.1);
}

TEST(FieldFitRhs, NoiselessEightLineRoundTrip) {
  const FieldVector truth(-22.4, 248.9, 3.1);
  const FieldFitResult r = fit_field_rhs(surrogate_model(), synthetic_rhs(surrogate_model(), truth, false),
                                         FieldVector(0.0, 240.0, 1.0));
  EXPECT_FALSE(r.plane_constrained);
  EXPECT_LT((r.field.mT() - truth.mT()).norm(), 0.01);
}

TEST(FieldFitRhs, SignResolvedTowardsInitialGuess) {
  const FieldVector truth(-22.4, 248.9, 3.1);
  const FieldFitResult r = fit_field_rhs(surrogate_model(), synthetic_rhs(surrogate_model(), truth, false),
                                         FieldVector(20.0, -240.0, -1.0));
  // H(B) and H(-B) share their spectrum; the reported field follows B_init.
  EXPECT_LT((r.field.mT() + truth.mT()).norm(), 0.01);
}

TEST(FieldFitRhs, CrossingPointLines) {
  const auto lines = read_rhs_lines(read_csv(testing::data_path("rhs_crossing.csv")));
  const FieldFitResult r = fit_field_rhs(surrogate_model(), lines, FieldVector(0.0, 250.0, 0.0));
  EXPECT_NEAR(r.field[0], -22.7, 1.0);
  EXPECT_NEAR(r.field[1], 249.2, 1.0);
  EXPECT_EQ(r.field[2], 0.0);
  EXPECT_LT(r.rms_kHz, 20.0);
  EXPECT_NEAR(r.angles.magnitude, 250.3, 1.0);
  EXPECT_NEAR(r.angles.phi_deg, 95.2, 0.3);
  EXPECT_NEAR(r.angles.theta_deg, 90.0, 1e-9);
}

TEST(FieldFitRhs, TooFewLines) {
  std::vector<RhsLine> one{{0, Subsite::merged, 31.4, 1.0}};
  EXPECT_THROW(fit_field_rhs(surrogate_model(), one, FieldVector(0.0, 250.0, 0.0)), InputError);
}

TEST(FieldFitRhs, ReportedErrorsScaleWithNoise) {
  const SpinModel& m = surrogate_model();
  const FieldVector truth(-22.4, 248.9, 3.1);
  const auto clean = synthetic_rhs(m, truth, false);
  std::mt19937_64 rng(42);
  auto mean_error = [&](double sigma_kHz) {
    std::normal_distribution<double> noise(0.0, sigma_kHz * 1e-3);
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    const int trials = 40;
    for (int t = 0; t < trials; ++t) {
      auto lines = clean;
      for (RhsLine& l : lines) l.frequency += noise(rng);
      sum += fit_field_rhs(m, lines, FieldVector(0.0, 240.0, 1.0)).std_error;
    }
    return Eigen::Vector3d(sum / trials);
  };
  const Eigen::Vector3d low = mean_error(1.0);
  const Eigen::Vector3d high = mean_error(4.0);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(high[a] / low[a], 4.0, 0.8) << a;
}

std::vector<ShbLine> synthetic_shb(const Manifolds& lv, bool assigned) {
  // Eight holes and eight anti-holes spread over the catalog.
  const std::array<std::array<int, 4>, 16> picks{{
      {4, 5, 4, 4}, {4, 5, 4, 3}, {4, 5, 4, 2}, {4, 5, 4, 1}, {2, 3, 2, 5}, {1, 1, 1, 2}, {0, 2, 0, 4}, {3, 0, 3, 5},
      {4, 5, 3, 5}, {4, 5, 2, 4}, {4, 5, 0, 1}, {2, 3, 5, 3}, {1, 1, 3, 0}, {0, 2, 5, 5}, {3, 0, 1, 4}, {5, 4, 2, 2}}};
  std::vector<ShbLine> lines;
  for (const auto& p : picks) {
    ShbLine l;
    l.kind = p[0] == p[2] ? LineKind::hole : LineKind::antihole;
    l.offset = catalog_offset(lv, l.kind, p[0], p[1], p[2], p[3]);
    if (assigned) l.assignment = p;
    lines.push_back(l);
  }
  return lines;
}

TEST(FieldFitShb, NoiselessAssignedRoundTrip) {
  const SpinModel& m = surrogate_model();
  const FieldVector truth(-26.9, 227.5, 0.8);
  const auto lines = synthetic_shb(solve(m, truth), true);
  const FieldFitResult r = fit_field_shb(m, lines, FieldVector(-20.0, 230.0, 0.0));
  EXPECT_LT((r.field.mT() - truth.mT()).norm(), 0.01);
}

TEST(FieldFitShb, AutoAssignmentRecoversField) {
  const SpinModel& m = surrogate_model();
  const FieldVector truth(-26.9, 227.5, 0.0);
  FieldFitOptions opt;
  opt.constrain_plane = true;
  const auto lines = synthetic_shb(solve(m, truth), false);
  const FieldFitResult r = fit_field_shb(m, lines, FieldVector(-25.0, 228.0, 0.0), opt);
  EXPECT_LT((r.field.mT() - truth.mT()).norm(), 0.05);
  EXPECT_EQ(r.assignments.size(), lines.size());
}

TEST(FieldFitShb, MonteCarloCoverage) {
  const SpinModel& m = surrogate_model();
  const FieldVector truth(-26.9, 227.5, 0.8);
  const auto clean = synthetic_shb(solve(m, truth), true);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.005);
  const int trials = 100;
  Eigen::Vector3i inside = Eigen::Vector3i::Zero();
  for (int t = 0; t < trials; ++t) {
    auto lines = clean;
    for (ShbLine& l : lines) l.offset += noise(rng);
    const FieldFitResult r = fit_field_shb(m, lines, FieldVector(-20.0, 230.0, 0.0));
    for (int a = 0; a < 3; ++a) inside[a] += std::abs(r.field[a] - truth[a]) < 2.0 * r.std_error[a];
  }
  // 2 sigma covers ~95 %; allow for the scatter of 100 trials.
  for (int a = 0; a < 3; ++a) EXPECT_GE(inside[a], 88) << a;
}

TEST(FieldFitIo, ReadsLineTables) {
  const auto rhs = read_rhs_lines(parse_csv("label,freq_MHz,weight,subsite\nw36,37.7,1,2\n"));
  ASSERT_EQ(rhs.size(), 1u);
  EXPECT_EQ(rhs[0].line, 3);
  EXPECT_EQ(rhs[0].subsite, Subsite::second);
  const auto shb = read_shb_lines(parse_csv("kind,offset_MHz,i,j,i2,j2,weight\nantihole,-23.8,5,6,4,6,1\n"));
  ASSERT_EQ(shb.size(), 1u);
  ASSERT_TRUE(shb[0].assignment.has_value());
  EXPECT_EQ((*shb[0].assignment)[0], 4);
  EXPECT_THROW(read_rhs_lines(parse_csv("label,freq_MHz,weight\nw99,1,1\n")), InputError);
}

}  // namespace
}  // namespace hfspec
