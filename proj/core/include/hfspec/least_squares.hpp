#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace hfspec {

// Residual vector r(p); the optimizer minimizes |r|^2. Weights belong inside
// r (scale each entry by sqrt(w)).
using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LsqOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-6;    // |dp|_inf, parameter units
  double cost_tolerance = 1e-15;   // relative SSR change
  Eigen::VectorXd jacobian_step;   // central differences; empty -> 1e-6 * max(1, |p|)
  double initial_lambda = 1e-3;
  double condition_limit = 1e12;   // J condition number above which rank fails
  // Box bounds (empty = unbounded). Parameters pinned at a bound with the
  // gradient pointing outwards are frozen for that iteration.
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct LsqResult {
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd covariance;  // sigma^2 (J^T J)^-1, sigma^2 = SSR/(N-p)
  double ssr = 0.0;
  double sigma2 = 0.0;
  double condition_number = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string stop_reason;
};

Eigen::MatrixXd numerical_jacobian(const ResidualFn& f, const Eigen::VectorXd& p,
                                   const Eigen::VectorXd& step, int* evaluations = nullptr);

// Levenberg-Marquardt with Marquardt diagonal scaling. Never throws on
// non-convergence (inspect `converged`); throws RankError when the final
// Jacobian is rank deficient.
LsqResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd p0,
                              const LsqOptions& options = {});

// Condition number of J from its singular values (inf when rank deficient).
double condition_number(const Eigen::MatrixXd& j);

}  // namespace hfspec
