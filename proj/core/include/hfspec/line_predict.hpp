#pragma once

// Forward models for measurable lines: ground-state spin transitions seen in
// Raman heterodyne spectra, and spectral hole / anti-hole offsets.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hfspec/spin_core.hpp"

namespace hfspec {

// Spin lines omega_ab = g_b - g_a between {3g, 4g} and {5g, 6g}, in the order
// w45, w35, w46, w36.
inline constexpr int kRhsLines = 4;
using RhsLines = std::array<double, kRhsLines>;

const std::array<const char*, kRhsLines>& rhs_line_labels();  // "w45", "w35", "w46", "w36"
int rhs_line_index(const std::string& label);                 // throws InputError

RhsLines rhs_lines(const LevelManifold& ground);

struct RhsLineSet {
  RhsLines subsite1{};
  RhsLines subsite2{};
  // (w36 - w35) - (w46 - w45) for subsite 1; zero up to round-off.
  double consistency = 0.0;
  bool ordered = true;  // w45 < w35 < w46 < w36 on both subsites
};

RhsLineSet rhs_lines(const SpinModel& model, const FieldVector& field);

struct SplitSlopes {
  RhsLines slope_kHz_per_mT{};  // d(subsite1 - subsite2)/dB_b
  RhsLines crossing_mT{};       // B_b where the fitted split vanishes
  RhsLines max_fit_residual_kHz{};
  std::vector<double> b_values;              // sampled B_b (mT)
  std::vector<RhsLines> splits_MHz;          // subsite1 - subsite2 at each sample
};

// Linear fit of the subsite splitting over B_b in [b0 - half_range, b0 + half_range]
// (`points` samples, the other components held at B0).
SplitSlopes subsite_split_slopes(const SpinModel& model, const FieldVector& b0,
                                 double half_range = 5.0, int points = 11);

enum class LineKind { hole, antihole };
const char* to_string(LineKind kind);
LineKind parse_line_kind(const std::string& text);

// Offset relative to the burn frequency of a burn on (i, j). Holes: i2 == i,
// offset e_j2 - e_j. Anti-holes: i2 != i, offset (g_i - g_i2) + (e_j2 - e_j).
struct CatalogLine {
  LineKind kind = LineKind::hole;
  double offset = 0.0;  // MHz
  int i = 0, j = 0, i2 = 0, j2 = 0;
};

double catalog_offset(const Manifolds& levels, LineKind kind, int i, int j, int i2, int j2);

struct ShbCatalog {
  std::vector<CatalogLine> holes;      // distinct (deduplicated) entries, sorted
  std::vector<CatalogLine> antiholes;
  int expected_holes = 0;       // distinct values expected from the level structure
  int expected_antiholes = 0;
  // Accidental coincidences within the dedupe tolerance; reported, not hidden.
  std::vector<std::pair<CatalogLine, CatalogLine>> collisions;
};

// All classes: every (j, j2) for holes and every (i != i2, j, j2) for
// anti-holes. Structurally identical values (all j == j2 holes give 0) count
// once; any further merge is reported as a collision.
ShbCatalog shb_catalog_all(const Manifolds& levels, double dedupe_tol = 1e-3);
// One burned class on transition t: 6 holes and 30 anti-holes.
ShbCatalog shb_catalog_single(const Manifolds& levels, Transition burned, double dedupe_tol = 1e-3);

// Every raw entry of the all-classes catalog (no deduplication).
std::vector<CatalogLine> shb_catalog_entries(const Manifolds& levels);

}  // namespace hfspec
