#include "hfspec/line_predict.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "hfspec/error.hpp"

namespace hfspec {

const std::array<const char*, kRhsLines>& rhs_line_labels() {
  static const std::array<const char*, kRhsLines> labels{"w45", "w35", "w46", "w36"};
  return labels;
}

int rhs_line_index(const std::string& label) {
  const auto& labels = rhs_line_labels();
  for (int k = 0; k < kRhsLines; ++k) {
    if (label == labels[k]) return k;
  }
  throw InputError("unknown spin line '" + label + "' (expected w45, w35, w46 or w36)");
}

RhsLines rhs_lines(const LevelManifold& ground) {
  const Vector6d& g = ground.energies;
  // zero-based: levels 3,4,5,6 -> 2,3,4,5
  return {g[4] - g[3], g[4] - g[2], g[5] - g[3], g[5] - g[2]};
}

RhsLineSet rhs_lines(const SpinModel& model, const FieldVector& field) {
  RhsLineSet out;
  out.subsite1 = rhs_lines(solve_state(model.ground, field));
  out.subsite2 = rhs_lines(solve_state(subsite_transform(model).ground, field));
  const RhsLines& w = out.subsite1;
  out.consistency = (w[3] - w[1]) - (w[2] - w[0]);
  for (const RhsLines* s : {&out.subsite1, &out.subsite2}) {
    out.ordered = out.ordered && (*s)[0] < (*s)[1] && (*s)[1] < (*s)[2] && (*s)[2] < (*s)[3];
  }
  return out;
}

SplitSlopes subsite_split_slopes(const SpinModel& model, const FieldVector& b0,
                                 double half_range, int points) {
  if (points < 3) throw InputError("slope estimate needs at least 3 sample points");
  if (!(half_range > 0.0)) throw InputError("slope range must be positive");
  const SpinModel other = subsite_transform(model);
  SplitSlopes out;
  for (int k = 0; k < points; ++k) {
    const double b = b0[2] - half_range + 2.0 * half_range * k / (points - 1);
    const FieldVector f(b0[0], b0[1], b);
    const RhsLines s1 = rhs_lines(solve_state(model.ground, f));
    const RhsLines s2 = rhs_lines(solve_state(other.ground, f));
    RhsLines split{};
    for (int l = 0; l < kRhsLines; ++l) split[l] = s1[l] - s2[l];
    out.b_values.push_back(b);
    out.splits_MHz.push_back(split);
  }
  const double n = points;
  double sx = 0.0, sxx = 0.0;
  for (double b : out.b_values) {
    sx += b;
    sxx += b * b;
  }
  for (int l = 0; l < kRhsLines; ++l) {
    double sy = 0.0, sxy = 0.0;
    for (int k = 0; k < points; ++k) {
      sy += out.splits_MHz[k][l];
      sxy += out.b_values[k] * out.splits_MHz[k][l];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    out.slope_kHz_per_mT[l] = 1e3 * slope;
    out.crossing_mT[l] = slope != 0.0 ? -intercept / slope : std::nan("");
    double worst = 0.0;
    for (int k = 0; k < points; ++k) {
      worst = std::max(worst, std::abs(out.splits_MHz[k][l] - (intercept + slope * out.b_values[k])));
    }
    out.max_fit_residual_kHz[l] = 1e3 * worst;
  }
  return out;
}

const char* to_string(LineKind kind) { return kind == LineKind::hole ? "hole" : "antihole"; }

LineKind parse_line_kind(const std::string& text) {
  if (text == "hole") return LineKind::hole;
  if (text == "antihole" || text == "anti-hole") return LineKind::antihole;
  throw InputError("line kind must be 'hole' or 'antihole', got '" + text + "'");
}

double catalog_offset(const Manifolds& levels, LineKind kind, int i, int j, int i2, int j2) {
  const Vector6d& g = levels.ground.energies;
  const Vector6d& e = levels.excited.energies;
  for (int idx : {i, j, i2, j2}) {
    if (idx < 0 || idx >= kLevels) throw InputError("catalog level index out of range");
  }
  if (kind == LineKind::hole) return e[j2] - e[j];
  return (g[i] - g[i2]) + (e[j2] - e[j]);
}

std::vector<CatalogLine> shb_catalog_entries(const Manifolds& levels) {
  std::vector<CatalogLine> out;
  for (int i = 0; i < kLevels; ++i) {
    for (int i2 = 0; i2 < kLevels; ++i2) {
      for (int j = 0; j < kLevels; ++j) {
        for (int j2 = 0; j2 < kLevels; ++j2) {
          const LineKind kind = i == i2 ? LineKind::hole : LineKind::antihole;
          // Holes do not depend on i; enumerate them once.
          if (kind == LineKind::hole && i != 0) continue;
          out.push_back({kind, catalog_offset(levels, kind, i, j, i2, j2), i, j, i2, j2});
        }
      }
    }
  }
  return out;
}

namespace {

// Entries with equal keys are equal by construction (e.g. every j == j2 hole
// sits at 0); different keys are physically distinct lines.
std::tuple<int, int, int, int> structural_key(const CatalogLine& c) {
  const int jj = c.j == c.j2 ? -1 : c.j;
  const int jj2 = c.j == c.j2 ? -1 : c.j2;
  if (c.kind == LineKind::hole) return {-1, -1, jj, jj2};
  return {c.i, c.i2, jj, jj2};
}

std::vector<CatalogLine> dedupe(std::vector<CatalogLine> lines, double tol, int& expected,
                                std::vector<std::pair<CatalogLine, CatalogLine>>& collisions) {
  std::map<std::tuple<int, int, int, int>, CatalogLine> unique;
  for (const CatalogLine& c : lines) unique.emplace(structural_key(c), c);
  expected = static_cast<int>(unique.size());
  std::vector<CatalogLine> sorted;
  for (const auto& [key, c] : unique) sorted.push_back(c);
  std::sort(sorted.begin(), sorted.end(),
            [](const CatalogLine& a, const CatalogLine& b) { return a.offset < b.offset; });
  std::vector<CatalogLine> out;
  for (const CatalogLine& c : sorted) {
    if (!out.empty() && c.offset - out.back().offset <= tol) {
      collisions.emplace_back(out.back(), c);
      continue;
    }
    out.push_back(c);
  }
  return out;
}

ShbCatalog build(const std::vector<CatalogLine>& entries, double tol) {
  if (!(tol >= 0.0)) throw InputError("dedupe tolerance must be non-negative");
  ShbCatalog cat;
  std::vector<CatalogLine> holes;
  std::vector<CatalogLine> anti;
  for (const CatalogLine& c : entries) (c.kind == LineKind::hole ? holes : anti).push_back(c);
  cat.holes = dedupe(holes, tol, cat.expected_holes, cat.collisions);
  cat.antiholes = dedupe(anti, tol, cat.expected_antiholes, cat.collisions);
  return cat;
}

}  // namespace

ShbCatalog shb_catalog_all(const Manifolds& levels, double dedupe_tol) {
  return build(shb_catalog_entries(levels), dedupe_tol);
}

ShbCatalog shb_catalog_single(const Manifolds& levels, Transition burned, double dedupe_tol) {
  const int i = burned.ground;
  const int j = burned.excited;
  if (i < 0 || i >= kLevels || j < 0 || j >= kLevels) throw InputError("burned transition out of range");
  std::vector<CatalogLine> entries;
  for (int i2 = 0; i2 < kLevels; ++i2) {
    for (int j2 = 0; j2 < kLevels; ++j2) {
      const LineKind kind = i2 == i ? LineKind::hole : LineKind::antihole;
      entries.push_back({kind, catalog_offset(levels, kind, i, j, i2, j2), i, j, i2, j2});
    }
  }
  // Within one class every (i2, j2) is its own line.
  ShbCatalog cat;
  for (const CatalogLine& c : entries) (c.kind == LineKind::hole ? cat.holes : cat.antiholes).push_back(c);
  auto by_offset = [](const CatalogLine& a, const CatalogLine& b) { return a.offset < b.offset; };
  std::sort(cat.holes.begin(), cat.holes.end(), by_offset);
  std::sort(cat.antiholes.begin(), cat.antiholes.end(), by_offset);
  cat.expected_holes = static_cast<int>(cat.holes.size());
  cat.expected_antiholes = static_cast<int>(cat.antiholes.size());
  for (auto* list : {&cat.holes, &cat.antiholes}) {
    for (std::size_t k = 1; k < list->size(); ++k) {
      if ((*list)[k].offset - (*list)[k - 1].offset <= dedupe_tol) {
        cat.collisions.emplace_back((*list)[k - 1], (*list)[k]);
      }
    }
  }
  return cat;
}

}  // namespace hfspec
