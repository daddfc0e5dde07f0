#include "hfspec/branching_fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <nlohmann/json.hpp>

#include "hfspec/error.hpp"
#include "hfspec/least_squares.hpp"

namespace hfspec {

namespace {

constexpr double kEpsilon0 = 8.8541878128e-12;  // F/m
constexpr double kLightSpeed = 299792458.0;     // m/s
constexpr double kHbar = 1.054571817e-34;       // J s

int flat(Transition t) { return t.ground * kLevels + t.excited; }

}  // namespace

std::vector<RabiRecord> read_rabi_records(const CsvTable& table) {
  const std::size_t tr = table.column("transition");
  const std::size_t raw = table.column("raw_kHz");
  const std::size_t err = table.column("err_kHz");
  const std::size_t pw = table.column("power_W");
  const bool cal = table.has_column("cal_kHz");
  std::vector<RabiRecord> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string where = table.source + ":" + std::to_string(table.line_numbers[r]);
    RabiRecord rec;
    try {
      rec.transition = Transition::parse(table.text(r, tr));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    rec.raw_kHz = table.number(r, raw);
    rec.err_kHz = table.number(r, err);
    rec.power_W = table.number(r, pw);
    if (!(rec.raw_kHz > 0.0)) throw InputError(where + ": raw Rabi frequency must be positive");
    if (!(rec.err_kHz >= 0.0)) throw InputError(where + ": error must be non-negative");
    if (!(rec.power_W > 0.0)) throw InputError(where + ": power must be positive");
    if (cal && !table.text(r, table.column("cal_kHz")).empty()) {
      rec.calibrated_kHz = table.number(r, table.column("cal_kHz"));
      if (table.has_column("cal_err_kHz")) rec.calibrated_err_kHz = table.number(r, table.column("cal_err_kHz"));
    }
    out.push_back(rec);
  }
  return out;
}

std::string rabi_records_to_csv(const std::vector<RabiRecord>& records) {
  CsvWriter w({"transition", "raw_kHz", "err_kHz", "power_W", "cal_kHz", "cal_err_kHz"});
  for (const RabiRecord& r : records) {
    w.row({r.transition.label(), format_double(r.raw_kHz), format_double(r.err_kHz),
           format_double(r.power_W), r.calibrated_kHz ? format_double(*r.calibrated_kHz) : "",
           r.calibrated_err_kHz ? format_double(*r.calibrated_err_kHz) : ""});
  }
  return w.str();
}

Matrix6d read_branching_table(const CsvTable& table) {
  const std::size_t ground = table.column("ground");
  std::array<std::size_t, kLevels> cols{};
  for (int j = 0; j < kLevels; ++j) cols[j] = table.column(std::to_string(j + 1) + "e_pct");
  Matrix6d g = Matrix6d::Constant(-1.0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string where = table.source + ":" + std::to_string(table.line_numbers[r]);
    const std::string& label = table.text(r, ground);
    if (label.size() != 2 || label[1] != 'g' || label[0] < '1' || label[0] > '6') {
      throw InputError(where + ": ground level must be 1g..6g, got '" + label + "'");
    }
    const int i = label[0] - '1';
    if (g(i, 0) >= 0.0) throw InputError(where + ": duplicate row " + label);
    for (int j = 0; j < kLevels; ++j) {
      const double v = table.number(r, cols[j]);
      if (!(v >= 0.0 && v <= 100.0)) throw InputError(where + ": percentages must lie in [0, 100]");
      g(i, j) = v / 100.0;
    }
  }
  if (g.minCoeff() < 0.0) throw InputError(table.source + ": expected rows 1g..6g");
  return g;
}

std::string branching_table_to_csv(const Matrix6d& gamma) {
  std::vector<std::string> header{"ground"};
  for (int j = 0; j < kLevels; ++j) header.push_back(std::to_string(j + 1) + "e_pct");
  CsvWriter w(header);
  for (int i = 0; i < kLevels; ++i) {
    std::vector<std::string> row{std::to_string(i + 1) + "g"};
    for (int j = 0; j < kLevels; ++j) row.push_back(format_double(gamma(i, j) * 100.0));
    w.row(row);
  }
  return w.str();
}

std::vector<RabiRecord> power_calibrate(const std::vector<RabiRecord>& records, Transition reference) {
  const auto ref = std::find_if(records.begin(), records.end(),
                                [&](const RabiRecord& r) { return r.transition == reference; });
  if (ref == records.end()) {
    throw InputError("reference transition " + reference.label() + " is not among the records");
  }
  const double p_ref = ref->power_W;
  std::vector<RabiRecord> out = records;
  for (RabiRecord& r : out) {
    if (!(r.power_W > 0.0) || !(p_ref > 0.0)) throw InputError("powers must be positive");
    const double factor = std::sqrt(p_ref / r.power_W);
    r.calibrated_kHz = r.raw_kHz * factor;
    r.calibrated_err_kHz = r.err_kHz * factor;
  }
  return out;
}

std::vector<RabiRecord> merge_duplicates(const std::vector<RabiRecord>& records) {
  std::vector<RabiRecord> out;
  std::map<int, std::size_t> seen;
  std::map<int, std::pair<double, double>> sums;  // sum w x, sum w
  for (const RabiRecord& r : records) {
    if (!r.calibrated_kHz) throw InputError("records must be power calibrated before merging");
    const double e = r.calibrated_err_kHz.value_or(0.0);
    if (!(e > 0.0)) throw InputError(r.transition.label() + ": calibrated error must be positive");
    const double w = 1.0 / (e * e);
    const int key = flat(r.transition);
    if (!seen.count(key)) {
      seen[key] = out.size();
      out.push_back(r);
    }
    sums[key].first += w * *r.calibrated_kHz;
    sums[key].second += w;
  }
  for (auto& [key, index] : seen) {
    out[index].calibrated_kHz = sums[key].first / sums[key].second;
    out[index].calibrated_err_kHz = 1.0 / std::sqrt(sums[key].second);
  }
  return out;
}

InvertibilityReport check_invertibility(const std::vector<Transition>& fixed) {
  std::vector<Eigen::RowVectorXd> rows;
  for (int i = 0; i < kLevels; ++i) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(36);
    for (int j = 0; j < kLevels; ++j) r[i * kLevels + j] = 1.0;
    rows.push_back(r);
  }
  // The last column sum follows from the others and the row sums.
  for (int j = 0; j + 1 < kLevels; ++j) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(36);
    for (int i = 0; i < kLevels; ++i) r[i * kLevels + j] = 1.0;
    rows.push_back(r);
  }
  for (const Transition& t : fixed) {
    if (t.ground < 0 || t.ground >= kLevels || t.excited < 0 || t.excited >= kLevels) {
      throw InputError("fixed element out of range");
    }
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(36);
    r[flat(t)] = 1.0;
    rows.push_back(r);
  }
  Eigen::MatrixXd a(rows.size(), 36);
  for (std::size_t k = 0; k < rows.size(); ++k) a.row(static_cast<Eigen::Index>(k)) = rows[k];
  InvertibilityReport rep;
  rep.equations = static_cast<int>(rows.size());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  const double tol = 1e-10 * s[0];
  rep.rank = static_cast<int>((s.array() > tol).count());
  rep.invertible = rep.rank == 36;
  rep.condition_number = rep.invertible ? s[0] / s[35] : std::numeric_limits<double>::infinity();
  return rep;
}

GammaFitResult fit_gamma(const GammaFitProblem& problem) {
  const std::vector<RabiRecord> records = merge_duplicates(problem.records);
  std::vector<int> kind(36, 0);  // 0 free, 1 measured, 2 zero
  std::vector<double> cal(36, 0.0);
  std::vector<double> cal_err(36, 0.0);
  GammaFitResult out;
  std::vector<Transition> fixed;
  for (const RabiRecord& r : records) {
    if (!r.calibrated_kHz || !r.calibrated_err_kHz) {
      throw InputError(r.transition.label() + " has no calibrated Rabi frequency");
    }
    kind[flat(r.transition)] = 1;
    cal[flat(r.transition)] = *r.calibrated_kHz;
    cal_err[flat(r.transition)] = *r.calibrated_err_kHz;
    out.measured.push_back(r.transition);
    fixed.push_back(r.transition);
  }
  for (const Transition& z : problem.zeros) {
    if (kind[flat(z)] == 1) throw InputError(z.label() + " is both measured and held at zero");
    kind[flat(z)] = 2;
    fixed.push_back(z);
  }
  if (records.empty()) throw InputError("no Rabi records to fit");
  const InvertibilityReport inv = check_invertibility(fixed);
  if (!inv.invertible) {
    throw RankError("fixed elements and normalization leave the branching matrix undetermined (rank " +
                        std::to_string(inv.rank) + " of 36)",
                    inv.condition_number);
  }
  std::vector<int> free_index;
  for (int k = 0; k < 36; ++k) {
    if (kind[k] == 0) {
      free_index.push_back(k);
      out.free.push_back(Transition{k / kLevels, k % kLevels});
    }
  }
  const int nf = static_cast<int>(free_index.size());
  const int np = 1 + nf;
  double omega_min = 0.0;
  for (const RabiRecord& r : records) omega_min = std::max(omega_min, *r.calibrated_kHz);

  // gamma(theta, data)
  auto assemble = [&](const Eigen::VectorXd& p, const std::vector<double>& c) {
    Matrix6d g = Matrix6d::Zero();
    for (int k = 0; k < 36; ++k) {
      if (kind[k] == 1) g(k / kLevels, k % kLevels) = (c[k] / p[0]) * (c[k] / p[0]);
    }
    for (int n = 0; n < nf; ++n) g(free_index[n] / kLevels, free_index[n] % kLevels) = p[1 + n];
    return g;
  };
  const double sqrt_w = std::sqrt(problem.penalty_weight);
  auto residuals = [&](const Eigen::VectorXd& p, const std::vector<double>& c) {
    const Matrix6d g = assemble(p, c);
    Eigen::VectorXd r(records.size() + 12);
    Eigen::Index k = 0;
    for (const RabiRecord& rec : records) {
      const int f = flat(rec.transition);
      r[k++] = (p[0] * std::sqrt(g(f / kLevels, f % kLevels)) - c[f]) / cal_err[f];
    }
    for (int i = 0; i < kLevels; ++i) r[k++] = sqrt_w * (g.row(i).sum() - 1.0);
    for (int j = 0; j < kLevels; ++j) r[k++] = sqrt_w * (g.col(j).sum() - 1.0);
    return r;
  };

  Eigen::VectorXd p0(np);
  p0[0] = omega_min;
  for (int n = 0; n < nf; ++n) {
    p0[1 + n] = std::clamp(problem.initial(free_index[n] / kLevels, free_index[n] % kLevels), 0.0, 1.0);
  }
  LsqOptions opt;
  opt.max_iterations = problem.max_iterations;
  opt.step_tolerance = 1e-10;
  opt.condition_limit = std::numeric_limits<double>::infinity();
  opt.jacobian_step = Eigen::VectorXd::Constant(np, 1e-7);
  opt.jacobian_step[0] = 1e-4 * omega_min;
  opt.lower = Eigen::VectorXd::Zero(np);
  opt.upper = Eigen::VectorXd::Ones(np);
  opt.lower[0] = omega_min;
  opt.upper[0] = std::numeric_limits<double>::infinity();
  const ResidualFn f = [&](const Eigen::VectorXd& p) { return residuals(p, cal); };
  const LsqResult r = levenberg_marquardt(f, p0, opt);
  if (!r.converged) {
    throw ConvergenceError("branching fit did not converge after " + std::to_string(r.iterations) +
                           " iterations");
  }
  out.iterations = r.iterations;
  out.stop_reason = r.stop_reason;
  const Eigen::VectorXd& p = r.params;
  out.omega_kHz = p[0];
  out.gamma = assemble(p, cal);
  out.row_sums = out.gamma.rowwise().sum();
  out.col_sums = out.gamma.colwise().sum().transpose();
  out.max_sum_deviation = std::max((out.row_sums.array() - 1.0).abs().maxCoeff(),
                                   (out.col_sums.array() - 1.0).abs().maxCoeff());

  // Parameters sitting on a bound do not respond to the data.
  std::vector<int> active;
  if (p[0] > omega_min * (1.0 + 1e-9)) {
    active.push_back(0);
  } else {
    out.saturated.push_back("Omega at lower bound (largest measured element = 1)");
  }
  for (int n = 1; n < np; ++n) {
    if (p[n] <= 1e-9 || p[n] >= 1.0 - 1e-9) {
      out.saturated.push_back(out.free[n - 1].label() + (p[n] <= 1e-9 ? " = 0" : " = 1"));
    } else {
      active.push_back(n);
    }
  }

  // Implicit-function propagation of the calibrated errors: d theta =
  // -(J^T J)^+ J^T (dr/dc) dc over the unsaturated parameters.
  const Eigen::MatrixXd& jt_full = r.jacobian;
  const int na = static_cast<int>(active.size());
  Eigen::MatrixXd jt(jt_full.rows(), na);
  for (int a = 0; a < na; ++a) jt.col(a) = jt_full.col(active[a]);
  const int nm = static_cast<int>(records.size());
  Eigen::MatrixXd jc(jt_full.rows(), nm);
  for (int m = 0; m < nm; ++m) {
    const int fm = flat(records[m].transition);
    const double h = 1e-6 * std::max(1.0, cal[fm]);
    std::vector<double> up = cal;
    std::vector<double> dn = cal;
    up[fm] += h;
    dn[fm] -= h;
    jc.col(m) = (residuals(p, up) - residuals(p, dn)) / (2.0 * h);
  }
  Eigen::MatrixXd sens = Eigen::MatrixXd::Zero(na, nm);
  if (na > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jt, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double tol = 1e-9 * std::max(s[0], 1e-300);
    out.identifiable = (s.array() > tol).count() == na;
    out.condition_number = s[na - 1] > tol ? s[0] / s[na - 1] : std::numeric_limits<double>::infinity();
    Eigen::VectorXd sinv = s;
    for (Eigen::Index k = 0; k < s.size(); ++k) sinv[k] = s[k] > tol ? 1.0 / s[k] : 0.0;
    const Eigen::MatrixXd pinv = svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
    sens = -pinv * jc;
  }
  Eigen::VectorXd var_c(nm);
  for (int m = 0; m < nm; ++m) var_c[m] = cal_err[flat(records[m].transition)] * cal_err[flat(records[m].transition)];
  const Eigen::MatrixXd cov = sens * var_c.asDiagonal() * sens.transpose();

  // Full parameter covariance (zero rows for saturated parameters) and the
  // cross terms with the data, needed by the tied elements.
  Eigen::MatrixXd cov_p = Eigen::MatrixXd::Zero(np, np);
  Eigen::MatrixXd cov_pc = Eigen::MatrixXd::Zero(np, nm);
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < na; ++b) cov_p(active[a], active[b]) = cov(a, b);
    cov_pc.row(active[a]) = sens.row(a) * var_c.asDiagonal();
  }
  out.omega_err_kHz = std::sqrt(std::max(cov_p(0, 0), 0.0));
  for (int n = 0; n < nf; ++n) {
    out.gamma_err(free_index[n] / kLevels, free_index[n] % kLevels) = std::sqrt(std::max(cov_p(1 + n, 1 + n), 0.0));
  }
  for (int m = 0; m < nm; ++m) {
    const int fm = flat(records[m].transition);
    const double w = p[0];
    const double dg_dc = 2.0 * cal[fm] / (w * w);
    const double dg_dw = -2.0 * cal[fm] * cal[fm] / (w * w * w);
    const double var = dg_dc * dg_dc * var_c[m] + dg_dw * dg_dw * cov_p(0, 0) +
                       2.0 * dg_dc * dg_dw * cov_pc(0, m);
    out.gamma_err(fm / kLevels, fm % kLevels) = std::sqrt(std::max(var, 0.0));
  }

  // Exactly normalized solutions: with u = 1 / Omega^2 every measured element
  // is c^2 u, and the free elements solve a linear system x(u) = x0 + u x1.
  if (nf == 11) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(11, nf);
    Eigen::VectorXd b0 = Eigen::VectorXd::Ones(11);
    Eigen::VectorXd b1 = Eigen::VectorXd::Zero(11);
    for (int n = 0; n < nf; ++n) {
      const int i = free_index[n] / kLevels;
      const int j = free_index[n] % kLevels;
      a(i, n) = 1.0;
      if (j + 1 < kLevels) a(kLevels + j, n) = 1.0;
    }
    for (int k = 0; k < 36; ++k) {
      if (kind[k] != 1) continue;
      const int i = k / kLevels;
      const int j = k % kLevels;
      b1[i] += cal[k] * cal[k];
      if (j + 1 < kLevels) b1[kLevels + j] += cal[k] * cal[k];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.isInvertible()) {
      const Eigen::VectorXd x0 = lu.solve(b0);
      const Eigen::VectorXd x1 = lu.solve(-b1);
      double lo = 0.0;
      double hi = 1.0 / (omega_min * omega_min);
      for (int n = 0; n < nf; ++n) {
        // 0 <= x0 + u x1 <= 1
        for (const double bound : {0.0, 1.0}) {
          const double num = bound - x0[n];
          if (x1[n] == 0.0) {
            if ((bound == 0.0 && x0[n] < 0.0) || (bound == 1.0 && x0[n] > 1.0)) hi = -1.0;
            continue;
          }
          const double u = num / x1[n];
          const bool upper = (bound == 0.0) == (x1[n] < 0.0);
          if (upper) hi = std::min(hi, u);
          else lo = std::max(lo, u);
        }
      }
      if (hi >= lo && hi > 0.0) {
        out.feasible_omega = std::make_pair(1.0 / std::sqrt(hi),
                                            lo > 0.0 ? 1.0 / std::sqrt(lo) : std::numeric_limits<double>::infinity());
      }
    }
  }
  return out;
}

OpticsConfig read_optics(const std::string& json_text, const std::string& source) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(source + ": JSON syntax error: " + e.what());
  }
  OpticsConfig o;
  auto get = [&](const char* key, double& target) {
    if (!root.contains(key)) throw InputError(source + ": missing '" + key + "'");
    if (!root.at(key).is_number()) throw InputError(source + ": '" + key + "' must be a number");
    target = root.at(key).get<double>();
    if (!(target > 0.0)) throw InputError(source + ": '" + key + "' must be positive");
  };
  get("power_W", o.power_W);
  get("waist_m", o.waist_m);
  get("refractive_index", o.refractive_index);
  return o;
}

DipoleResult dipole_moment(double omega_kHz, double omega_err_kHz, const OpticsConfig& optics) {
  if (!(optics.power_W > 0.0) || !(optics.waist_m > 0.0) || !(optics.refractive_index > 0.0)) {
    throw InputError("optics parameters must be positive");
  }
  DipoleResult d;
  d.area_m2 = std::numbers::pi * optics.waist_m * optics.waist_m;
  d.field_V_per_m = std::sqrt(2.0 * optics.power_W /
                              (d.area_m2 * optics.refractive_index * kEpsilon0 * kLightSpeed));
  const double per_kHz = kHbar * 2.0 * std::numbers::pi * 1e3 / d.field_V_per_m;
  d.mu_Cm = per_kHz * omega_kHz;
  d.mu_err_Cm = per_kHz * omega_err_kHz;
  return d;
}

}  // namespace hfspec
