#include "hfspec/damped_cosine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "hfspec/error.hpp"
#include "hfspec/least_squares.hpp"

namespace hfspec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Best undamped sinusoid at fixed frequency: c + a cos + b sin.
Eigen::Vector3d linear_fit(const std::vector<TracePoint>& t, double f, double& ssr) {
  Eigen::MatrixXd a(t.size(), 3);
  Eigen::VectorXd y(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    a(k, 0) = 1.0;
    a(k, 1) = std::cos(kTwoPi * f * t[k].tau_us);
    a(k, 2) = std::sin(kTwoPi * f * t[k].tau_us);
    y[k] = t[k].od;
  }
  const Eigen::Vector3d x = a.colPivHouseholderQr().solve(y);
  ssr = (a * x - y).squaredNorm();
  return x;
}

}  // namespace

DampedCosineFit fit_damped_cosine(const std::vector<TracePoint>& input) {
  if (input.size() < 8) throw InputError("damped cosine fit needs at least 8 points");
  std::vector<TracePoint> t = input;
  std::sort(t.begin(), t.end(), [](const TracePoint& a, const TracePoint& b) { return a.tau_us < b.tau_us; });
  const double span = t.back().tau_us - t.front().tau_us;
  if (!(span > 0.0)) throw InputError("trace has no time span");
  double mean = 0.0;
  for (const auto& p : t) mean += p.od;
  mean /= static_cast<double>(t.size());
  double var = 0.0;
  for (const auto& p : t) var += (p.od - mean) * (p.od - mean);
  if (!(var > 1e-24 * std::max(1.0, mean * mean) * static_cast<double>(t.size()))) {
    throw InputError("trace is constant; no oscillation to fit");
  }

  // Periodogram scan up to the (mean-spacing) Nyquist frequency.
  const double nyquist = 0.5 * static_cast<double>(t.size() - 1) / span;
  const double df = 0.05 / span;
  double best_f = 0.0;
  double best_ssr = var;
  for (double f = 0.5 / span; f <= nyquist; f += df) {
    double ssr = 0.0;
    linear_fit(t, f, ssr);
    if (ssr < best_ssr) {
      best_ssr = ssr;
      best_f = f;
    }
  }
  if (best_f == 0.0 || best_ssr > 0.95 * var) throw InputError("no oscillation found in trace");
  double ssr = 0.0;
  const Eigen::Vector3d lin = linear_fit(t, best_f, ssr);

  // p = (A, 1/T, f, phi, c); decay rate parameterization keeps T = inf reachable.
  Eigen::VectorXd p0(5);
  p0 << std::hypot(lin[1], lin[2]), 0.0, best_f, std::atan2(-lin[2], lin[1]), lin[0];
  const ResidualFn f = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double x = t[k].tau_us;
      r[k] = p[0] * std::exp(-x * p[1]) * std::cos(kTwoPi * p[2] * x + p[3]) + p[4] - t[k].od;
    }
    return r;
  };
  LsqOptions opt;
  opt.max_iterations = 500;
  opt.step_tolerance = 1e-12;
  opt.jacobian_step = Eigen::VectorXd(5);
  opt.jacobian_step << 1e-7 * std::max(1.0, p0[0]), 1e-7 / span, 1e-7 / span, 1e-7, 1e-7 * std::max(1.0, std::abs(p0[4]));
  opt.lower = Eigen::VectorXd::Constant(5, -std::numeric_limits<double>::infinity());
  opt.lower[1] = 0.0;
  const LsqResult r = levenberg_marquardt(f, p0, opt);
  if (!r.converged) throw ConvergenceError("damped cosine fit did not converge");

  DampedCosineFit out;
  Eigen::VectorXd p = r.params;
  if (p[0] < 0.0) {
    p[0] = -p[0];
    p[3] += std::numbers::pi;
  }
  if (p[2] < 0.0) {
    p[2] = -p[2];
    p[3] = -p[3];
  }
  out.amplitude = p[0];
  out.decay_rate_per_us = p[1];
  out.decay_us = p[1] > 0.0 ? 1.0 / p[1] : std::numeric_limits<double>::infinity();
  out.frequency_kHz = 1e3 * p[2];
  out.phase_rad = std::remainder(p[3], kTwoPi);
  out.offset = p[4];
  out.iterations = r.iterations;
  out.rms = std::sqrt(r.ssr / static_cast<double>(t.size()));
  const double var_f = r.covariance.size() ? r.covariance(2, 2) : 0.0;
  out.frequency_err_kHz = 1e3 * std::sqrt(std::max(var_f, 0.0));
  out.ambiguous = !(out.frequency_err_kHz <= 0.5 * out.frequency_kHz);
  if (p[2] * span < 1.0) throw InputError("trace spans less than one oscillation period");
  return out;
}

}  // namespace hfspec
