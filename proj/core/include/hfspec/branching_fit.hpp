#pragma once

// Branching matrix and electronic Rabi frequency from partially measured
// optical Rabi frequencies: Omega_ij = Omega_ge * sqrt(gamma_ij).

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hfspec/spin_core.hpp"
#include "hfspec/table_io.hpp"

namespace hfspec {

struct RabiRecord {
  Transition transition;
  double raw_kHz = 0.0;
  double err_kHz = 0.0;
  double power_W = 0.0;
  std::optional<double> calibrated_kHz;
  std::optional<double> calibrated_err_kHz;
};

// Columns transition,raw_kHz,err_kHz,power_W (optionally cal_kHz,cal_err_kHz).
std::vector<RabiRecord> read_rabi_records(const CsvTable& table);
std::string rabi_records_to_csv(const std::vector<RabiRecord>& records);

// Omega_cal = Omega_raw * sqrt(P_ref / P); errors scale by the same factor.
std::vector<RabiRecord> power_calibrate(const std::vector<RabiRecord>& records, Transition reference);

// Repeated transitions are replaced by their inverse-variance weighted mean.
std::vector<RabiRecord> merge_duplicates(const std::vector<RabiRecord>& records);

// Columns ground,1e_pct,...,6e_pct; one row per ground level 1g..6g, in
// percent.
Matrix6d read_branching_table(const CsvTable& table);
std::string branching_table_to_csv(const Matrix6d& gamma);

struct InvertibilityReport {
  int unknowns = 36;
  int equations = 0;
  int rank = 0;
  double condition_number = 0.0;
  bool invertible = false;
};

// 11 independent normalization rows (6 row sums, 5 column sums) plus one row
// per fixed element, over the 36 unknowns.
InvertibilityReport check_invertibility(const std::vector<Transition>& fixed);

struct GammaFitProblem {
  std::vector<RabiRecord> records;  // calibrated
  std::vector<Transition> zeros;
  Matrix6d initial = Matrix6d::Constant(1.0 / kLevels);
  double penalty_weight = 1e3;
  int max_iterations = 500;
};

struct GammaFitResult {
  Matrix6d gamma = Matrix6d::Zero();
  Matrix6d gamma_err = Matrix6d::Zero();
  double omega_kHz = 0.0;
  double omega_err_kHz = 0.0;
  Vector6d row_sums = Vector6d::Zero();
  Vector6d col_sums = Vector6d::Zero();
  double max_sum_deviation = 0.0;
  // Tied elements are exactly (Omega_cal / Omega)^2 ...
  std::vector<Transition> measured;
  std::vector<Transition> free;
  // ... and these were pinned at 0 or 1 (or Omega at its lower bound).
  std::vector<std::string> saturated;
  bool identifiable = true;  // Jacobian of the unsaturated parameters has full rank
  double condition_number = 0.0;
  // Omega range over which an exactly normalized solution exists inside the
  // bounds (empty when none does).
  std::optional<std::pair<double, double>> feasible_omega;
  int iterations = 0;
  std::string stop_reason;
};

// Parameters: Omega_ge plus the unfixed, non-zero elements. Measured elements
// follow Omega_ge as (Omega_cal / Omega_ge)^2. Errors are the calibrated
// Rabi errors propagated through the optimum.
GammaFitResult fit_gamma(const GammaFitProblem& problem);

struct OpticsConfig {
  double power_W = 0.390;
  double waist_m = 102e-6;
  double refractive_index = 1.8;
};

OpticsConfig read_optics(const std::string& json_text, const std::string& source = "<string>");

struct DipoleResult {
  double area_m2 = 0.0;
  double field_V_per_m = 0.0;
  double mu_Cm = 0.0;
  double mu_err_Cm = 0.0;
};

// A = pi w0^2, E = sqrt(2P / (A n eps0 c)), mu = hbar 2 pi Omega / E.
DipoleResult dipole_moment(double omega_kHz, double omega_err_kHz, const OpticsConfig& optics);

}  // namespace hfspec
