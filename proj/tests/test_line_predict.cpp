#include <algorithm>

#include <gtest/gtest.h>

#include "hfspec/error.hpp"
#include "hfspec/line_predict.hpp"
#include "test_support.hpp"

namespace hfspec {
namespace {

using testing::surrogate_model;

TEST(RhsLines, SubsitesAgreeInPlane) {
  const RhsLineSet s = rhs_lines(surrogate_model(), FieldVector(-22.7, 249.2, 0.0));
  for (int k = 0; k < kRhsLines; ++k) EXPECT_NEAR(s.subsite1[k], s.subsite2[k], 1e-9);
  EXPECT_TRUE(s.ordered);
}

TEST(RhsLines, CrossingFrequencies) {
  const RhsLineSet s = rhs_lines(surrogate_model(), FieldVector(-22.7, 249.2, 0.0));
  const double measured[] = {31.425, 33.956, 35.187, 37.767};
  for (int k = 0; k < kRhsLines; ++k) EXPECT_NEAR(s.subsite1[k], measured[k], 0.030) << rhs_line_labels()[k];
}

TEST(RhsLines, ConsistencyIdentity) {
  const RhsLineSet s = rhs_lines(testing::synthetic_model(), FieldVector(12.0, -80.0, 40.0));
  EXPECT_LT(std::abs(s.consistency), 1e-9);
}

TEST(RhsLines, LabelLookup) {
  EXPECT_EQ(rhs_line_index("w46"), 2);
  EXPECT_THROW(rhs_line_index("w56"), InputError);
}

TEST(SplitSlopes, VanishAtPlane) {
  const SplitSlopes s = subsite_split_slopes(surrogate_model(), FieldVector(-22.4, 248.9, 0.0));
  for (int k = 0; k < kRhsLines; ++k) EXPECT_NEAR(s.crossing_mT[k], 0.0, 1e-3);
  // split(B_b) = -split(-B_b)
  const std::size_t n = s.b_values.size();
  for (std::size_t m = 0; m < n; ++m) {
    for (int k = 0; k < kRhsLines; ++k) {
      EXPECT_NEAR(s.splits_MHz[m][k], -s.splits_MHz[n - 1 - m][k], 1e-9);
    }
  }
}

TEST(SplitSlopes, QuotedMagnitudes) {
  const SplitSlopes s = subsite_split_slopes(surrogate_model(), FieldVector(-22.4, 248.9, 3.1));
  const double quoted[] = {65.0, 42.0, 40.0, 63.0};
  for (int k = 0; k < kRhsLines; ++k) {
    EXPECT_NEAR(std::abs(s.slope_kHz_per_mT[k]), quoted[k], 0.15 * quoted[k]) << rhs_line_labels()[k];
  }
}

TEST(ShbCatalog, GenericFieldCounts) {
  const ShbCatalog c = shb_catalog_all(solve(surrogate_model(), FieldVector(-26.9, 227.5, 0.0)), 1e-3);
  EXPECT_EQ(c.expected_holes, 31);
  EXPECT_EQ(c.expected_antiholes, 930);
  EXPECT_EQ(c.holes.size(), 31u);
  EXPECT_EQ(c.antiholes.size(), 930u);
  EXPECT_TRUE(std::any_of(c.holes.begin(), c.holes.end(), [](const CatalogLine& l) { return l.offset == 0.0; }));
}

TEST(ShbCatalog, Antisymmetric) {
  const ShbCatalog c = shb_catalog_all(solve(testing::synthetic_model(), FieldVector(50.0, 120.0, -30.0)));
  for (const CatalogLine& l : c.antiholes) {
    const bool mirrored = std::any_of(c.antiholes.begin(), c.antiholes.end(), [&](const CatalogLine& m) {
      return std::abs(m.offset + l.offset) < 1e-9;
    });
    EXPECT_TRUE(mirrored) << l.offset;
  }
}

TEST(ShbCatalog, SingleClassHoles) {
  const Manifolds lv = solve(surrogate_model(), FieldVector(0.0, 230.0, 0.0));
  const ShbCatalog c = shb_catalog_single(lv, {4, 5});
  ASSERT_EQ(c.holes.size(), 6u);
  EXPECT_EQ(c.antiholes.size(), 30u);
  for (const CatalogLine& h : c.holes) {
    EXPECT_DOUBLE_EQ(h.offset, lv.excited.energies[h.j2] - lv.excited.energies[5]);
  }
}

TEST(ShbCatalog, ClustersAroundZeroFieldSplittings) {
  const Manifolds lv = solve(surrogate_model(), FieldVector(-26.9, 227.5, 0.0));
  const ShbCatalog c = shb_catalog_all(lv);
  auto count_near = [](const std::vector<CatalogLine>& lines, double centre, double width) {
    return std::count_if(lines.begin(), lines.end(),
                         [&](const CatalogLine& l) { return std::abs(l.offset - centre) < width; });
  };
  // Holes: excited-state gaps. Anti-holes with j == j2: ground-state gaps.
  std::vector<CatalogLine> ground_only;
  std::copy_if(c.antiholes.begin(), c.antiholes.end(), std::back_inserter(ground_only),
               [](const CatalogLine& l) { return l.j == l.j2; });
  EXPECT_GE(count_near(c.holes, 75.03, 10.0), 4);
  EXPECT_GE(count_near(c.holes, 101.65, 10.0), 4);
  EXPECT_GE(count_near(ground_only, 34.54, 8.0), 4);
  EXPECT_GE(count_near(ground_only, 46.25, 8.0), 4);
}

TEST(ShbCatalog, SingleClassAntiholeDoublets) {
  // Two pairs of anti-holes 0.2-0.3 MHz apart, seen as single broadened
  // features near -23.8 and 31.6 MHz.
  const ShbCatalog c = shb_catalog_single(solve(surrogate_model(), FieldVector(0.0, 230.0, 0.0)), Transition{4, 5});
  auto near = [&](double centre) {
    return std::count_if(c.antiholes.begin(), c.antiholes.end(),
                         [&](const CatalogLine& l) { return std::abs(l.offset - centre) < 0.5; });
  };
  EXPECT_EQ(near(-23.8), 2);
  EXPECT_EQ(near(31.6), 2);
}

TEST(ShbCatalog, OffsetFormula) {
  const Manifolds lv = solve(testing::synthetic_model(), FieldVector(10.0, 20.0, 30.0));
  const double a = catalog_offset(lv, LineKind::antihole, 1, 2, 4, 3);
  EXPECT_NEAR(a, (lv.ground.energies[1] - lv.ground.energies[4]) +
                     (lv.excited.energies[3] - lv.excited.energies[2]), 1e-12);
  EXPECT_EQ(parse_line_kind("anti-hole"), LineKind::antihole);
  EXPECT_THROW(parse_line_kind("bump"), InputError);
}

}  // namespace
}  // namespace hfspec
