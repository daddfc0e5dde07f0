#include "hfspec/least_squares.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "hfspec/error.hpp"

namespace hfspec {

Eigen::MatrixXd numerical_jacobian(const ResidualFn& f, const Eigen::VectorXd& p,
                                   const Eigen::VectorXd& step, int* evaluations) {
  Eigen::MatrixXd j;
  Eigen::VectorXd x = p;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double h = step.size() == p.size() ? step[k] : 1e-6 * std::max(1.0, std::abs(p[k]));
    x[k] = p[k] + h;
    const Eigen::VectorXd plus = f(x);
    x[k] = p[k] - h;
    const Eigen::VectorXd minus = f(x);
    x[k] = p[k];
    if (j.size() == 0) j.resize(plus.size(), p.size());
    j.col(k) = (plus - minus) / (2.0 * h);
    if (evaluations) *evaluations += 2;
  }
  return j;
}

double condition_number(const Eigen::MatrixXd& j) {
  if (j.cols() == 0) return 1.0;
  if (j.rows() < j.cols()) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const auto& s = svd.singularValues();
  const double smax = s[0];
  const double smin = s[s.size() - 1];
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

namespace {

void clamp_to_box(Eigen::VectorXd& p, const LsqOptions& o) {
  if (o.lower.size() == p.size()) p = p.cwiseMax(o.lower);
  if (o.upper.size() == p.size()) p = p.cwiseMin(o.upper);
}

}  // namespace

LsqResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd p,
                              const LsqOptions& options) {
  LsqResult out;
  const Eigen::Index n = p.size();
  if ((options.lower.size() != 0 && options.lower.size() != n) ||
      (options.upper.size() != 0 && options.upper.size() != n)) {
    throw InputError("bound vectors must match the parameter count");
  }
  clamp_to_box(p, options);
  Eigen::VectorXd r = f(p);
  ++out.evaluations;
  double cost = r.squaredNorm();
  double lambda = options.initial_lambda;

  Eigen::MatrixXd j;
  for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
    j = numerical_jacobian(f, p, options.jacobian_step, &out.evaluations);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;

    // Active set: parameters on a bound that the descent direction -g would
    // push further out.
    std::vector<Eigen::Index> free;
    for (Eigen::Index k = 0; k < n; ++k) {
      const bool at_lower = options.lower.size() == n && p[k] <= options.lower[k] && g[k] > 0.0;
      const bool at_upper = options.upper.size() == n && p[k] >= options.upper[k] && g[k] < 0.0;
      if (!at_lower && !at_upper) free.push_back(k);
    }
    const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd jtj_f(nf, nf);
    Eigen::VectorXd g_f(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      g_f[a] = g[free[a]];
      for (Eigen::Index b = 0; b < nf; ++b) jtj_f(a, b) = jtj(free[a], free[b]);
    }
    if (nf == 0 || g_f.lpNorm<Eigen::Infinity>() == 0.0) {
      out.converged = true;
      out.stop_reason = "projected gradient is zero";
      break;
    }
    const Eigen::VectorXd scale = jtj_f.diagonal().cwiseMax(1e-300);

    bool accepted = false;
    Eigen::VectorXd taken;
    double new_cost = cost;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::MatrixXd a = jtj_f;
      a.diagonal() += lambda * scale;
      const Eigen::VectorXd dp_f = a.ldlt().solve(-g_f);
      Eigen::VectorXd trial = p;
      for (Eigen::Index k = 0; k < nf; ++k) trial[free[k]] += dp_f[k];
      clamp_to_box(trial, options);
      const Eigen::VectorXd rt = f(trial);
      ++out.evaluations;
      const double ct = rt.squaredNorm();
      if (std::isfinite(ct) && ct < cost) {
        taken = trial - p;
        p = trial;
        r = rt;
        new_cost = ct;
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
      // A step too small to matter that still fails to descend: at optimum.
      if ((trial - p).lpNorm<Eigen::Infinity>() < options.step_tolerance * 1e-3) break;
    }
    if (!accepted) {
      out.converged = true;
      out.stop_reason = "no descent direction (at optimum)";
      break;
    }
    const double rel = (cost - new_cost) / std::max(cost, 1e-300);
    cost = new_cost;
    if (taken.lpNorm<Eigen::Infinity>() < options.step_tolerance) {
      out.converged = true;
      out.stop_reason = "step below tolerance";
      ++out.iterations;
      break;
    }
    if (rel < options.cost_tolerance) {
      out.converged = true;
      out.stop_reason = "cost change below tolerance";
      ++out.iterations;
      break;
    }
  }
  if (!out.converged) out.stop_reason = "maximum iterations reached";

  out.params = p;
  out.residuals = r;
  out.ssr = cost;
  out.jacobian = numerical_jacobian(f, p, options.jacobian_step, &out.evaluations);
  out.condition_number = condition_number(out.jacobian);
  if (n > 0 && !(out.condition_number < options.condition_limit)) {
    throw RankError("Jacobian is rank deficient at the solution (condition number " +
                        std::to_string(out.condition_number) + ")",
                    out.condition_number);
  }
  const Eigen::Index dof = r.size() - n;
  out.sigma2 = dof > 0 ? cost / static_cast<double>(dof) : std::numeric_limits<double>::quiet_NaN();
  if (n > 0) {
    const Eigen::MatrixXd jtj = out.jacobian.transpose() * out.jacobian;
    out.covariance = out.sigma2 * jtj.inverse();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  }
  return out;
}

}  // namespace hfspec
