#pragma once

// Effective nuclear-spin Hamiltonian for an I = 5/2 non-Kramers ion:
//
//   H = I.Q.I + B.M.I
//
// Q (MHz) and M (MHz/T) are 3x3 tensors in the crystal (D1, D2, b) frame, the
// field B is given in mT. Both electronic states (ground, excited) carry their
// own pair of tensors.

#include <array>
#include <complex>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace hfspec {

inline constexpr int kLevels = 6;
inline constexpr double kNuclearSpin = 2.5;

using Complex = std::complex<double>;
using Matrix6c = Eigen::Matrix<Complex, kLevels, kLevels>;
using Vector6c = Eigen::Matrix<Complex, kLevels, 1>;
using Matrix6d = Eigen::Matrix<double, kLevels, kLevels>;
using Vector6d = Eigen::Matrix<double, kLevels, 1>;

// Angular momentum matrices in the |m> basis ordered m = +5/2 ... -5/2.
struct SpinOperators {
  Matrix6c x;
  Matrix6c y;
  Matrix6c z;

  const Matrix6c& operator[](int axis) const;
};

const SpinOperators& spin_operators();

// Rotation R = Rz(alpha) Ry(beta) Rz(gamma), angles in degrees.
Eigen::Matrix3d euler_zyz(const Eigen::Vector3d& angles_deg);

// Real symmetric 3x3 tensor. Construction validates symmetry; the stored
// matrix is exactly symmetric.
class Tensor3 {
 public:
  Tensor3() : m_(Eigen::Matrix3d::Zero()) {}

  // Rejects matrices whose antisymmetric part exceeds 1e-9 relative to the
  // largest element.
  static Tensor3 from_matrix(const Eigen::Matrix3d& m);

  // R diag(principal) R^T with R = euler_zyz(euler_deg): the principal frame
  // is rotated into the crystal frame.
  static Tensor3 from_principal(const Eigen::Vector3d& principal,
                                const Eigen::Vector3d& euler_deg);

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int a, int b) const { return m_(a, b); }

  // R T R^T
  Tensor3 rotated(const Eigen::Matrix3d& rotation) const;

  Eigen::Vector3d principal_values() const;

  bool operator==(const Tensor3& other) const { return m_ == other.m_; }

 private:
  explicit Tensor3(const Eigen::Matrix3d& m) : m_(m) {}
  Eigen::Matrix3d m_;
};

struct StateTensors {
  Tensor3 Q;  // MHz
  Tensor3 M;  // MHz/T
};

struct SpinModel {
  StateTensors ground;
  StateTensors excited;
};

struct Spherical {
  double magnitude = 0.0;  // mT
  double phi_deg = 0.0;    // from D1 towards D2, in [0, 360)
  double theta_deg = 0.0;  // from b
};

// Magnetic field in the (D1, D2, b) frame, components in mT.
class FieldVector {
 public:
  FieldVector() : mT_(Eigen::Vector3d::Zero()) {}
  FieldVector(double d1, double d2, double b) : mT_(d1, d2, b) {}
  explicit FieldVector(const Eigen::Vector3d& mT) : mT_(mT) {}

  static FieldVector from_spherical(double magnitude_mT, double phi_deg,
                                    double theta_deg);

  const Eigen::Vector3d& mT() const { return mT_; }
  Eigen::Vector3d tesla() const { return mT_ * 1e-3; }
  double operator[](int axis) const { return mT_[axis]; }
  double magnitude() const { return mT_.norm(); }

 private:
  Eigen::Vector3d mT_;
};

// Throws InputError for the zero vector. phi is reported as 0 when the field
// lies along b.
Spherical spherical(const FieldVector& field);

// Energies ascending, shifted so that energies[0] == 0. Column k of `states`
// is the eigenvector of energies[k].
struct LevelManifold {
  Vector6d energies = Vector6d::Zero();
  Matrix6c states = Matrix6c::Identity();
  double shift = 0.0;  // lowest eigenvalue before shifting, MHz
};

struct Manifolds {
  LevelManifold ground;
  LevelManifold excited;
};

Matrix6c build_hamiltonian(const Tensor3& Q, const Tensor3& M,
                           const FieldVector& field);

// Phase convention: the largest-magnitude component of every eigenvector is
// real and positive (ties resolved towards the lowest index).
LevelManifold diagonalize(const Matrix6c& hamiltonian);

LevelManifold solve_state(const StateTensors& tensors, const FieldVector& field);
Manifolds solve(const SpinModel& model, const FieldVector& field);

// Optical transition |i_g> <-> |j_e>, zero-based level indices.
struct Transition {
  int ground = 0;
  int excited = 0;

  // "5g-6e" (one-based, as in level diagrams).
  static Transition parse(std::string_view label);
  std::string label() const;

  auto operator<=>(const Transition&) const = default;
};

// e_j - g_i + detuning (MHz). Throws std::out_of_range for bad indices.
double transition_frequency(const Manifolds& levels, int ground, int excited,
                            double detuning = 0.0);
double transition_frequency(const Manifolds& levels, Transition t,
                            double detuning = 0.0);

// pi rotation about b, relating the two magnetic subsites.
Eigen::Matrix3d c2_about_b();
SpinModel subsite_transform(const SpinModel& model);

// gamma(i, j) = |<j_e|i_g>|^2, rows = ground levels, columns = excited levels.
class BranchingMatrix {
 public:
  BranchingMatrix() : gamma_(Matrix6d::Constant(1.0 / kLevels)) {}

  static BranchingMatrix uniform() { return BranchingMatrix(); }
  static BranchingMatrix identity();
  // Accepts any matrix with entries in [0, 1]; sums are not enforced so that
  // fitted (approximately normalized) tables can be carried around too.
  static BranchingMatrix from_matrix(const Matrix6d& gamma);

  double operator()(int i, int j) const { return gamma_(i, j); }
  const Matrix6d& matrix() const { return gamma_; }

  // max over rows and columns of |sum - 1|
  double max_sum_deviation() const;

 private:
  explicit BranchingMatrix(const Matrix6d& gamma) : gamma_(gamma) {}
  Matrix6d gamma_;
};

BranchingMatrix branching_matrix(const LevelManifold& ground,
                                 const LevelManifold& excited);
BranchingMatrix branching_matrix(const Manifolds& levels);

}  // namespace hfspec
