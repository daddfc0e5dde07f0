#pragma once

// Magnetic field vector from measured spin lines or hole/anti-hole offsets,
// by least squares against the spin Hamiltonian.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hfspec/line_predict.hpp"
#include "hfspec/spin_core.hpp"
#include "hfspec/table_io.hpp"

namespace hfspec {

enum class Subsite { merged, first, second };

struct RhsLine {
  int line = 0;  // index into rhs_line_labels()
  Subsite subsite = Subsite::merged;
  double frequency = 0.0;  // MHz
  double weight = 1.0;
};

struct ShbLine {
  LineKind kind = LineKind::hole;
  double offset = 0.0;  // MHz from the burn frequency
  std::optional<std::array<int, 4>> assignment;  // (i, j, i2, j2), zero-based
  double weight = 1.0;
};

struct FieldFitOptions {
  bool constrain_plane = false;   // forced on when any RHS line is merged
  int max_iterations = 200;
  double step_tolerance = 1e-6;   // mT
  double jacobian_step = 0.01;    // mT
  double ambiguity_tol = 0.02;    // MHz, SHB auto-assignment
  int max_reassignments = 20;
};

struct FieldFitResult {
  FieldVector field;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // mT^2
  Eigen::Vector3d std_error = Eigen::Vector3d::Zero();
  Spherical angles;
  Eigen::Vector3d angles_error = Eigen::Vector3d::Zero();  // (|B| mT, phi deg, theta deg)
  double rms_kHz = 0.0;
  std::vector<double> residuals_kHz;  // model - measured, per input line
  std::vector<double> weights;        // effective weights (0 for ambiguous)
  std::vector<std::array<int, 4>> assignments;  // SHB only
  std::vector<std::string> warnings;
  bool plane_constrained = false;
  bool sign_flipped = false;
  int iterations = 0;
  double condition_number = 0.0;
  std::string stop_reason;
};

// Throws InputError with too few lines, ConvergenceError after max iterations
// and RankError for a rank-deficient Jacobian.
FieldFitResult fit_field_rhs(const SpinModel& model, const std::vector<RhsLine>& lines,
                             const FieldVector& initial, const FieldFitOptions& options = {});

FieldFitResult fit_field_shb(const SpinModel& model, const std::vector<ShbLine>& lines,
                             const FieldVector& initial, const FieldFitOptions& options = {});

// Forward predictions used by the fits.
double predict_rhs(const SpinModel& model, const FieldVector& field, const RhsLine& line);
double predict_shb(const Manifolds& levels, const ShbLine& line);

// Nearest all-classes catalog entry of the right kind. Sets `ambiguous` when a
// second, different line lies within tol of the measurement.
std::array<int, 4> assign_shb_line(const Manifolds& levels, const ShbLine& line, double tol,
                                   bool& ambiguous);

// CSV ingestion: "label,freq_MHz,weight" (+ optional "subsite" column holding
// merged|1|2) and "kind,offset_MHz[,i,j,i2,j2],weight" (one-based levels).
std::vector<RhsLine> read_rhs_lines(const CsvTable& table);
std::vector<ShbLine> read_shb_lines(const CsvTable& table);

}  // namespace hfspec
