#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "hfspec/error.hpp"
#include "hfspec/least_squares.hpp"

namespace hfspec {
namespace {

TEST(LevenbergMarquardt, Rosenbrock) {
  const ResidualFn f = [](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(2);
    r << 10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0];
    return r;
  };
  LsqOptions opt;
  opt.max_iterations = 500;
  opt.step_tolerance = 1e-12;
  const LsqResult r = levenberg_marquardt(f, Eigen::Vector2d(-1.2, 1.0), opt);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.params[0], 1.0, 1e-8);
  EXPECT_NEAR(r.params[1], 1.0, 1e-8);
}

TEST(LevenbergMarquardt, LinearCovariance) {
  // y = a + b x with known residual variance.
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(5, 0.0, 4.0);
  Eigen::VectorXd y(5);
  y << 1.1, 2.9, 5.2, 6.8, 9.1;
  const ResidualFn f = [&](const Eigen::VectorXd& p) {
    return Eigen::VectorXd((p[0] + p[1] * x.array() - y.array()).matrix());
  };
  const LsqResult r = levenberg_marquardt(f, Eigen::Vector2d(0.0, 0.0));
  Eigen::MatrixXd a(5, 2);
  a.col(0).setOnes();
  a.col(1) = x;
  const Eigen::VectorXd p = a.colPivHouseholderQr().solve(y);
  EXPECT_NEAR(r.params[0], p[0], 1e-6);
  EXPECT_NEAR(r.params[1], p[1], 1e-6);
  const double s2 = (a * p - y).squaredNorm() / 3.0;
  const Eigen::MatrixXd cov = s2 * (a.transpose() * a).inverse();
  EXPECT_NEAR(r.covariance(1, 1), cov(1, 1), 1e-6 * cov(1, 1));
  EXPECT_NEAR(r.sigma2, s2, 1e-9);
}

TEST(LevenbergMarquardt, BoundsHoldAndFreeParametersStillMove) {
  // Unconstrained optimum (-3, 2); the first parameter is held at >= 0.
  const ResidualFn f = [](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(3);
    r << p[0] + 3.0, p[1] - 2.0, 0.1 * (p[0] + p[1] - 1.0);
    return r;
  };
  LsqOptions opt;
  opt.lower = Eigen::Vector2d(0.0, -std::numeric_limits<double>::infinity());
  opt.step_tolerance = 1e-12;
  const LsqResult r = levenberg_marquardt(f, Eigen::Vector2d(2.0, 0.0), opt);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.params[0], 0.0);
  // d/dp1 of (p1 - 2)^2 + 0.01 (p1 - 1)^2 = 0
  EXPECT_NEAR(r.params[1], (2.0 + 0.01) / 1.01, 1e-8);
}

TEST(LevenbergMarquardt, BoundSizeMismatchRejected) {
  const ResidualFn f = [](const Eigen::VectorXd& p) { return p; };
  LsqOptions opt;
  opt.lower = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(levenberg_marquardt(f, Eigen::Vector2d(1.0, 1.0), opt), InputError);
}

TEST(LevenbergMarquardt, RankDeficiencyThrows) {
  const ResidualFn f = [](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(3);
    r << p[0] + p[1] - 1.0, 2.0 * (p[0] + p[1]) - 2.0, p[0] + p[1];
    return r;
  };
  EXPECT_THROW(levenberg_marquardt(f, Eigen::Vector2d(0.3, 0.1)), RankError);
}

TEST(ConditionNumber, Diagonal) {
  EXPECT_NEAR(condition_number(Eigen::Vector3d(1.0, 10.0, 100.0).asDiagonal().toDenseMatrix()), 100.0, 1e-9);
}

}  // namespace
}  // namespace hfspec
