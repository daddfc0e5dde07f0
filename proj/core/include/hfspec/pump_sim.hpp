#pragma once

// Rate-free optical pumping of an inhomogeneously broadened ensemble. Every
// frequency class delta carries ground-state populations rho_i(delta); the
// optical line i_g <-> j_e of that class sits at T_ij(delta) = e_j - g_i + delta.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "hfspec/spin_core.hpp"

namespace hfspec {

// Uniform axis start + k * step, k = 0 .. size-1 (MHz).
struct FrequencyAxis {
  double start = 0.0;
  double step = 0.01;
  int size = 0;

  static FrequencyAxis span(double min, double max, double step);

  double operator[](int k) const { return start + step * k; }
  double stop() const { return (*this)[size - 1]; }
  // Nearest index, or -1 outside [start - step/2, stop + step/2].
  int nearest(double x) const;
  bool operator==(const FrequencyAxis&) const = default;
};

enum class Broadening { flat, gaussian };

struct BroadeningConfig {
  Broadening shape = Broadening::flat;
  double fwhm_MHz = 10000.0;  // gaussian only
  double center_MHz = 0.0;
};

// Inhomogeneous detuning classes with weights G(delta) >= 0.
class DetuningGrid {
 public:
  DetuningGrid(FrequencyAxis axis, const BroadeningConfig& broadening = {});

  // Smallest grid with the given step such that every line T_ij(delta) that
  // can land inside [probe_min, probe_max] (plus margin) has its class on the
  // grid. Class offsets span roughly max(e) + max(g), so the class range is
  // considerably wider than the probe window.
  static DetuningGrid covering(const Manifolds& levels, double probe_min, double probe_max,
                               double step, double margin = 1.0,
                               const BroadeningConfig& broadening = {});

  const FrequencyAxis& axis() const { return axis_; }
  int size() const { return axis_.size; }
  double step() const { return axis_.step; }
  double operator[](int k) const { return axis_[k]; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const BroadeningConfig& broadening() const { return broadening_; }

 private:
  FrequencyAxis axis_;
  BroadeningConfig broadening_;
  Eigen::VectorXd weights_;
};

// rho(k, i): population of ground level i in class k. Rows sum to 1.
using PopulationMatrix = Eigen::Matrix<double, Eigen::Dynamic, kLevels, Eigen::RowMajor>;

struct PopulationGrid {
  FrequencyAxis axis;
  PopulationMatrix rho;

  int size() const { return static_cast<int>(rho.rows()); }
  double max_sum_deviation() const;
};

PopulationGrid init_thermal(const DetuningGrid& grid);

// Ordered list of pump frequencies, each snapped onto the grid when built.
class PumpSequence {
 public:
  PumpSequence() = default;

  // Fixed-frequency burn.
  static PumpSequence burn(const FrequencyAxis& axis, double frequency);
  // Chirp over [center - width/2, center + width/2] at the grid step
  // (width 0 is a burn).
  static PumpSequence chirp(const FrequencyAxis& axis, double center, double width);

  PumpSequence& append(const PumpSequence& other);
  PumpSequence repeated(int times) const;
  // Every component moved by `offset` (frame change; no re-snapping).
  PumpSequence shifted(double offset) const;

  const std::vector<double>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  bool empty() const { return components_.empty(); }

 private:
  std::vector<double> components_;
};

struct PumpOptions {
  double efficiency = 1.0;   // fraction of the resonant population transferred
  double tolerance = 1e-9;   // fixed point: max |d rho| per pass
  int max_passes = 200;
};

struct PumpReport {
  int passes = 0;
  bool converged = false;
  double last_change = 0.0;
  long long skipped = 0;  // (component, transition) pairs whose class is off grid
};

// One pass over the sequence. Decay from j_e feeds ground level m with weight
// gamma(m, j) / sum_m gamma(m, j), so a fitted, approximately normalized
// matrix still conserves population exactly.
PumpReport apply_pump(PopulationGrid& pop, const PumpSequence& seq, const BranchingMatrix& gamma,
                      const Manifolds& levels, double efficiency = 1.0);

// Repeats apply_pump until the per-pass change drops below tolerance.
PumpReport pump_to_steady_state(PopulationGrid& pop, const PumpSequence& seq,
                                const BranchingMatrix& gamma, const Manifolds& levels,
                                const PumpOptions& options = {});

}  // namespace hfspec
