#include "hfspec/spin_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hfspec/error.hpp"

namespace hfspec {

namespace {

SpinOperators make_spin_operators() {
  SpinOperators ops;
  Matrix6c raise = Matrix6c::Zero();
  ops.z.setZero();
  for (int k = 0; k < kLevels; ++k) {
    const double m = kNuclearSpin - k;
    ops.z(k, k) = m;
    if (k > 0) {
      // <m+1| I+ |m>
      raise(k - 1, k) = std::sqrt(kNuclearSpin * (kNuclearSpin + 1) - m * (m + 1));
    }
  }
  const Matrix6c lower = raise.adjoint();
  ops.x = (raise + lower) * 0.5;
  ops.y = (raise - lower) * Complex(0.0, -0.5);
  return ops;
}

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

void check_level(int index, const char* what) {
  if (index < 0 || index >= kLevels) {
    throw std::out_of_range(std::string(what) + " level index " +
                            std::to_string(index) + " outside [0, 6)");
  }
}

}  // namespace

const Matrix6c& SpinOperators::operator[](int axis) const {
  switch (axis) {
    case 0: return x;
    case 1: return y;
    case 2: return z;
    default: throw std::out_of_range("spin axis must be 0, 1 or 2");
  }
}

const SpinOperators& spin_operators() {
  static const SpinOperators ops = make_spin_operators();
  return ops;
}

Eigen::Matrix3d euler_zyz(const Eigen::Vector3d& angles_deg) {
  using Eigen::AngleAxisd;
  using Eigen::Vector3d;
  return (AngleAxisd(deg2rad(angles_deg[0]), Vector3d::UnitZ()) *
          AngleAxisd(deg2rad(angles_deg[1]), Vector3d::UnitY()) *
          AngleAxisd(deg2rad(angles_deg[2]), Vector3d::UnitZ()))
      .toRotationMatrix();
}

Tensor3 Tensor3::from_matrix(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw InputError("tensor has non-finite elements");
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff() * 0.5;
  if (asym > 1e-9 * scale) {
    throw InputError("tensor is not symmetric (antisymmetric part " +
                     std::to_string(asym) + ")");
  }
  return Tensor3(0.5 * (m + m.transpose()));
}

Tensor3 Tensor3::from_principal(const Eigen::Vector3d& principal,
                                const Eigen::Vector3d& euler_deg) {
  if (!principal.allFinite() || !euler_deg.allFinite()) {
    throw InputError("principal values and Euler angles must be finite");
  }
  const Eigen::Matrix3d r = euler_zyz(euler_deg);
  const Eigen::Matrix3d m = r * principal.asDiagonal() * r.transpose();
  return Tensor3(0.5 * (m + m.transpose()));
}

Tensor3 Tensor3::rotated(const Eigen::Matrix3d& rotation) const {
  const Eigen::Matrix3d m = rotation * m_ * rotation.transpose();
  return Tensor3(0.5 * (m + m.transpose()));
}

Eigen::Vector3d Tensor3::principal_values() const {
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(m_).eigenvalues();
}

FieldVector FieldVector::from_spherical(double magnitude_mT, double phi_deg,
                                        double theta_deg) {
  const double phi = deg2rad(phi_deg);
  const double theta = deg2rad(theta_deg);
  return FieldVector(magnitude_mT * std::cos(phi) * std::sin(theta),
                     magnitude_mT * std::sin(phi) * std::sin(theta),
                     magnitude_mT * std::cos(theta));
}

Spherical spherical(const FieldVector& field) {
  const double r = field.magnitude();
  if (!(r > 0.0)) throw InputError("spherical angles undefined for zero field");
  Spherical s;
  s.magnitude = r;
  s.theta_deg = rad2deg(std::acos(std::clamp(field[2] / r, -1.0, 1.0)));
  const double rho = std::hypot(field[0], field[1]);
  if (rho <= 1e-15 * r) {
    s.phi_deg = 0.0;
  } else {
    double phi = rad2deg(std::atan2(field[1], field[0]));
    if (phi < 0.0) phi += 360.0;
    s.phi_deg = phi;
  }
  return s;
}

Matrix6c build_hamiltonian(const Tensor3& Q, const Tensor3& M,
                           const FieldVector& field) {
  const SpinOperators& I = spin_operators();
  const Eigen::Vector3d b = field.tesla();
  Matrix6c h = Matrix6c::Zero();
  for (int a = 0; a < 3; ++a) {
    for (int c = 0; c < 3; ++c) {
      if (Q(a, c) != 0.0) h.noalias() += Q(a, c) * (I[a] * I[c]);
    }
  }
  // B.M.I = sum_c (sum_a B_a M_ac) I_c
  const Eigen::Vector3d coupling = M.matrix().transpose() * b;
  for (int c = 0; c < 3; ++c) h += coupling[c] * I[c];
  // Symmetrize away round-off so downstream solvers see an exact Hermitian.
  return (h + h.adjoint()) * 0.5;
}

LevelManifold diagonalize(const Matrix6c& hamiltonian) {
  Eigen::SelfAdjointEigenSolver<Matrix6c> solver(hamiltonian);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("Hermitian eigensolver failed");
  }
  LevelManifold out;
  const Vector6d values = solver.eigenvalues();
  out.shift = values[0];
  out.energies = values.array() - values[0];
  out.states = solver.eigenvectors();
  for (int k = 0; k < kLevels; ++k) {
    auto col = out.states.col(k);
    int pivot = 0;
    double best = std::abs(col[0]);
    for (int n = 1; n < kLevels; ++n) {
      const double mag = std::abs(col[n]);
      if (mag > best * (1.0 + 1e-12) + 1e-15) {
        best = mag;
        pivot = n;
      }
    }
    const Complex phase = std::conj(col[pivot]) / std::abs(col[pivot]);
    col *= phase;
    col[pivot] = Complex(col[pivot].real(), 0.0);
  }
  return out;
}

LevelManifold solve_state(const StateTensors& tensors, const FieldVector& field) {
  return diagonalize(build_hamiltonian(tensors.Q, tensors.M, field));
}

Manifolds solve(const SpinModel& model, const FieldVector& field) {
  return {solve_state(model.ground, field), solve_state(model.excited, field)};
}

Transition Transition::parse(std::string_view label) {
  // <digit>g-<digit>e, whitespace tolerated around the dash
  auto fail = [&]() -> Transition {
    throw InputError("cannot parse transition label '" + std::string(label) +
                     "' (expected e.g. \"5g-6e\")");
  };
  std::string s;
  for (char c : label) {
    if (c != ' ' && c != '\t') s.push_back(c);
  }
  if (s.size() != 5 || s[1] != 'g' || s[2] != '-' || s[4] != 'e') return fail();
  const int i = s[0] - '0';
  const int j = s[3] - '0';
  if (i < 1 || i > kLevels || j < 1 || j > kLevels) return fail();
  return Transition{i - 1, j - 1};
}

std::string Transition::label() const {
  return std::to_string(ground + 1) + "g-" + std::to_string(excited + 1) + "e";
}

double transition_frequency(const Manifolds& levels, int ground, int excited,
                            double detuning) {
  check_level(ground, "ground");
  check_level(excited, "excited");
  return levels.excited.energies[excited] - levels.ground.energies[ground] +
         detuning;
}

double transition_frequency(const Manifolds& levels, Transition t,
                            double detuning) {
  return transition_frequency(levels, t.ground, t.excited, detuning);
}

Eigen::Matrix3d c2_about_b() {
  return Eigen::Vector3d(-1.0, -1.0, 1.0).asDiagonal();
}

SpinModel subsite_transform(const SpinModel& model) {
  const Eigen::Matrix3d r = c2_about_b();
  return {{model.ground.Q.rotated(r), model.ground.M.rotated(r)},
          {model.excited.Q.rotated(r), model.excited.M.rotated(r)}};
}

BranchingMatrix BranchingMatrix::identity() {
  return BranchingMatrix(Matrix6d::Identity());
}

BranchingMatrix BranchingMatrix::from_matrix(const Matrix6d& gamma) {
  if (!gamma.allFinite() || gamma.minCoeff() < 0.0 || gamma.maxCoeff() > 1.0) {
    throw InputError("branching ratios must lie in [0, 1]");
  }
  return BranchingMatrix(gamma);
}

double BranchingMatrix::max_sum_deviation() const {
  const double rows = (gamma_.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double cols = (gamma_.colwise().sum().array() - 1.0).abs().maxCoeff();
  return std::max(rows, cols);
}

BranchingMatrix branching_matrix(const LevelManifold& ground,
                                 const LevelManifold& excited) {
  // overlap(i, j) = <j_e|i_g>
  const Matrix6c overlap = ground.states.transpose() * excited.states.conjugate();
  Matrix6d gamma = overlap.cwiseAbs2();
  // |<j|i>|^2 can exceed 1 by round-off only.
  gamma = gamma.cwiseMin(1.0);
  return BranchingMatrix::from_matrix(gamma);
}

BranchingMatrix branching_matrix(const Manifolds& levels) {
  return branching_matrix(levels.ground, levels.excited);
}

}  // namespace hfspec
