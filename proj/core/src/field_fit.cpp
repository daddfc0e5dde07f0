#include "hfspec/field_fit.hpp"

#include <cmath>
#include <limits>

#include "hfspec/error.hpp"
#include "hfspec/least_squares.hpp"

namespace hfspec {

namespace {

FieldVector field_from(const Eigen::VectorXd& p) {
  return p.size() == 2 ? FieldVector(p[0], p[1], 0.0) : FieldVector(p[0], p[1], p[2]);
}

// Jacobian of (|B|, phi, theta) with respect to the components.
Eigen::Matrix3d spherical_jacobian(const FieldVector& b) {
  Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
  const double h = 1e-6 * std::max(1.0, b.magnitude());
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d up = b.mT();
    Eigen::Vector3d dn = b.mT();
    up[k] += h;
    dn[k] -= h;
    const Spherical a = spherical(FieldVector(up));
    const Spherical c = spherical(FieldVector(dn));
    double dphi = a.phi_deg - c.phi_deg;
    if (dphi > 180.0) dphi -= 360.0;
    if (dphi < -180.0) dphi += 360.0;
    j(0, k) = (a.magnitude - c.magnitude) / (2 * h);
    j(1, k) = dphi / (2 * h);
    j(2, k) = (a.theta_deg - c.theta_deg) / (2 * h);
  }
  return j;
}

LsqOptions lsq_options(const FieldFitOptions& options, int n) {
  LsqOptions o;
  o.max_iterations = options.max_iterations;
  o.step_tolerance = options.step_tolerance;
  o.jacobian_step = Eigen::VectorXd::Constant(n, options.jacobian_step);
  return o;
}

void finish(FieldFitResult& out, const LsqResult& r, const FieldVector& initial, bool plane,
            const std::vector<double>& raw_residuals_MHz, const std::vector<double>& weights) {
  FieldVector b = field_from(r.params);
  // H(-B) and H(B) share their spectrum; keep the half-space of the start.
  if (b.mT().dot(initial.mT()) < 0.0) {
    b = FieldVector(-b.mT());
    out.sign_flipped = true;
  }
  if (plane) b = FieldVector(b[0], b[1], 0.0);
  out.field = b;
  out.plane_constrained = plane;
  out.iterations = r.iterations;
  out.condition_number = r.condition_number;
  out.stop_reason = r.stop_reason;
  out.covariance.setZero();
  const int n = static_cast<int>(r.params.size());
  if (r.covariance.size() > 0 && std::isfinite(r.sigma2)) {
    out.covariance.topLeftCorner(n, n) = r.covariance;
  } else {
    out.covariance.topLeftCorner(n, n).setConstant(std::numeric_limits<double>::quiet_NaN());
    out.warnings.push_back("no residual degrees of freedom; covariance undefined");
  }
  out.std_error = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  if (b.magnitude() > 0.0) {
    out.angles = spherical(b);
    const Eigen::Matrix3d js = spherical_jacobian(b);
    out.angles_error = (js * out.covariance * js.transpose()).diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  double sw = 0.0, swr = 0.0;
  out.residuals_kHz.clear();
  for (std::size_t k = 0; k < raw_residuals_MHz.size(); ++k) {
    out.residuals_kHz.push_back(1e3 * raw_residuals_MHz[k]);
    sw += weights[k];
    swr += weights[k] * raw_residuals_MHz[k] * raw_residuals_MHz[k];
  }
  out.weights = weights;
  out.rms_kHz = sw > 0.0 ? 1e3 * std::sqrt(swr / sw) : 0.0;
}

Eigen::VectorXd start_vector(const FieldVector& initial, bool plane) {
  Eigen::VectorXd p(plane ? 2 : 3);
  p[0] = initial[0];
  p[1] = initial[1];
  if (!plane) p[2] = initial[2];
  return p;
}

}  // namespace

double predict_rhs(const SpinModel& model, const FieldVector& field, const RhsLine& line) {
  const StateTensors& g = line.subsite == Subsite::second ? subsite_transform(model).ground : model.ground;
  return rhs_lines(solve_state(g, field))[line.line];
}

double predict_shb(const Manifolds& levels, const ShbLine& line) {
  if (!line.assignment) throw InputError("SHB line has no assignment");
  const auto& a = *line.assignment;
  return catalog_offset(levels, line.kind, a[0], a[1], a[2], a[3]);
}

FieldFitResult fit_field_rhs(const SpinModel& model, const std::vector<RhsLine>& lines,
                             const FieldVector& initial, const FieldFitOptions& options) {
  bool plane = options.constrain_plane;
  bool second = false;
  for (const RhsLine& l : lines) {
    if (l.line < 0 || l.line >= kRhsLines) throw InputError("spin line index out of range");
    if (!(l.weight >= 0.0)) throw InputError("line weights must be non-negative");
    plane = plane || l.subsite == Subsite::merged;
    second = second || l.subsite == Subsite::second;
  }
  const int n = plane ? 2 : 3;
  if (static_cast<int>(lines.size()) < n) {
    throw InputError("field fit needs at least " + std::to_string(n) + " lines, got " +
                     std::to_string(lines.size()));
  }
  const SpinModel other = second ? subsite_transform(model) : model;
  auto predict = [&](const FieldVector& b, std::vector<double>& out) {
    const RhsLines s1 = rhs_lines(solve_state(model.ground, b));
    const RhsLines s2 = second ? rhs_lines(solve_state(other.ground, b)) : s1;
    out.resize(lines.size());
    for (std::size_t k = 0; k < lines.size(); ++k) {
      out[k] = (lines[k].subsite == Subsite::second ? s2 : s1)[lines[k].line] - lines[k].frequency;
    }
  };
  const ResidualFn f = [&](const Eigen::VectorXd& p) {
    std::vector<double> raw;
    predict(field_from(p), raw);
    Eigen::VectorXd r(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) r[k] = std::sqrt(lines[k].weight) * raw[k];
    return r;
  };
  const LsqResult r = levenberg_marquardt(f, start_vector(initial, plane), lsq_options(options, n));
  if (!r.converged) {
    throw ConvergenceError("field fit did not converge after " + std::to_string(r.iterations) +
                           " iterations");
  }
  FieldFitResult out;
  std::vector<double> raw;
  predict(field_from(r.params), raw);
  std::vector<double> w;
  for (const RhsLine& l : lines) w.push_back(l.weight);
  finish(out, r, initial, plane, raw, w);
  return out;
}

std::array<int, 4> assign_shb_line(const Manifolds& levels, const ShbLine& line, double tol,
                                   bool& ambiguous) {
  double best = std::numeric_limits<double>::infinity();
  double best_offset = 0.0;
  std::array<int, 4> pick{};
  const std::vector<CatalogLine> entries = shb_catalog_entries(levels);
  for (const CatalogLine& c : entries) {
    if (c.kind != line.kind) continue;
    const double d = std::abs(c.offset - line.offset);
    if (d < best) {
      best = d;
      best_offset = c.offset;
      pick = {c.i, c.j, c.i2, c.j2};
    }
  }
  ambiguous = false;
  for (const CatalogLine& c : entries) {
    if (c.kind != line.kind) continue;
    // Structurally identical entries (same offset to round-off) are one line.
    if (std::abs(c.offset - best_offset) < 1e-9) continue;
    if (std::abs(c.offset - line.offset) <= tol) ambiguous = true;
  }
  return pick;
}

FieldFitResult fit_field_shb(const SpinModel& model, const std::vector<ShbLine>& lines,
                             const FieldVector& initial, const FieldFitOptions& options) {
  const bool plane = options.constrain_plane;
  const int n = plane ? 2 : 3;
  for (const ShbLine& l : lines) {
    if (!(l.weight >= 0.0)) throw InputError("line weights must be non-negative");
  }
  std::vector<ShbLine> work = lines;
  std::vector<double> weights(lines.size());
  FieldVector current = initial;
  FieldFitResult out;
  LsqResult r;
  for (int round = 0; round <= options.max_reassignments; ++round) {
    const Manifolds levels = solve(model, current);
    bool changed = false;
    out.warnings.clear();
    for (std::size_t k = 0; k < lines.size(); ++k) {
      weights[k] = lines[k].weight;
      if (lines[k].assignment) continue;
      bool ambiguous = false;
      const auto a = assign_shb_line(levels, lines[k], options.ambiguity_tol, ambiguous);
      if (!work[k].assignment || *work[k].assignment != a) changed = true;
      work[k].assignment = a;
      if (ambiguous) {
        weights[k] = 0.0;
        out.warnings.push_back("ambiguous assignment for " + std::string(to_string(lines[k].kind)) +
                               " at " + format_double(lines[k].offset) + " MHz; weight set to 0");
      }
    }
    int active = 0;
    for (double w : weights) active += w > 0.0;
    if (active < n) {
      throw InputError("field fit needs at least " + std::to_string(n) +
                       " unambiguous lines, got " + std::to_string(active));
    }
    if (round > 0 && !changed) break;
    const ResidualFn f = [&](const Eigen::VectorXd& p) {
      const Manifolds lv = solve(model, field_from(p));
      Eigen::VectorXd res(work.size());
      for (std::size_t k = 0; k < work.size(); ++k) {
        res[k] = std::sqrt(weights[k]) * (predict_shb(lv, work[k]) - work[k].offset);
      }
      return res;
    };
    r = levenberg_marquardt(f, start_vector(current, plane), lsq_options(options, n));
    if (!r.converged) {
      throw ConvergenceError("field fit did not converge after " + std::to_string(r.iterations) +
                             " iterations");
    }
    current = field_from(r.params);
    if (round == options.max_reassignments) {
      throw ConvergenceError("SHB line assignment did not settle after " +
                             std::to_string(options.max_reassignments) + " rounds");
    }
  }
  const Manifolds levels = solve(model, current);
  std::vector<double> raw;
  for (const ShbLine& l : work) raw.push_back(predict_shb(levels, l) - l.offset);
  const std::vector<std::string> warnings = out.warnings;
  out.warnings.clear();
  finish(out, r, initial, plane, raw, weights);
  out.warnings.insert(out.warnings.end(), warnings.begin(), warnings.end());
  for (const ShbLine& l : work) out.assignments.push_back(*l.assignment);
  return out;
}

std::vector<RhsLine> read_rhs_lines(const CsvTable& table) {
  const std::size_t label = table.column("label");
  const std::size_t freq = table.column("freq_MHz");
  const bool has_weight = table.has_column("weight");
  const bool has_subsite = table.has_column("subsite");
  std::vector<RhsLine> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    RhsLine l;
    try {
      l.line = rhs_line_index(table.text(r, label));
    } catch (const InputError& e) {
      throw InputError(table.source + ":" + std::to_string(table.line_numbers[r]) + ": " + e.what());
    }
    l.frequency = table.number(r, freq);
    l.weight = has_weight ? table.number(r, table.column("weight")) : 1.0;
    if (has_subsite) {
      const std::string s = table.text(r, table.column("subsite"));
      if (s == "merged" || s.empty()) l.subsite = Subsite::merged;
      else if (s == "1") l.subsite = Subsite::first;
      else if (s == "2") l.subsite = Subsite::second;
      else throw InputError(table.source + ":" + std::to_string(table.line_numbers[r]) +
                            ": subsite must be merged, 1 or 2");
    }
    out.push_back(l);
  }
  return out;
}

std::vector<ShbLine> read_shb_lines(const CsvTable& table) {
  const std::size_t kind = table.column("kind");
  const std::size_t offset = table.column("offset_MHz");
  const bool assigned = table.has_column("i");
  const bool has_weight = table.has_column("weight");
  std::vector<ShbLine> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    ShbLine l;
    const std::string where = table.source + ":" + std::to_string(table.line_numbers[r]);
    try {
      l.kind = parse_line_kind(table.text(r, kind));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    l.offset = table.number(r, offset);
    l.weight = has_weight ? table.number(r, table.column("weight")) : 1.0;
    if (assigned && !table.text(r, table.column("i")).empty()) {
      std::array<int, 4> a{};
      const char* names[] = {"i", "j", "i2", "j2"};
      for (int k = 0; k < 4; ++k) {
        a[k] = parse_int(table.text(r, table.column(names[k])), where + ": " + names[k]) - 1;
        if (a[k] < 0 || a[k] >= kLevels) throw InputError(where + ": level index out of range");
      }
      l.assignment = a;
    }
    out.push_back(l);
  }
  return out;
}

}  // namespace hfspec
