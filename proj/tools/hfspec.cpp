// hfspec: command-line front end. Every subcommand computes all of its
// outputs in memory first and writes them (plus manifest.json) only after it
// succeeded, so a failed run leaves nothing behind.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hfspec/branching_fit.hpp"
#include "hfspec/damped_cosine.hpp"
#include "hfspec/error.hpp"
#include "hfspec/field_fit.hpp"
#include "hfspec/line_predict.hpp"
#include "hfspec/manifest.hpp"
#include "hfspec/model_io.hpp"
#include "hfspec/scheme.hpp"
#include "hfspec/spectrum.hpp"
#include "hfspec/table_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hfspec;

namespace {

struct Globals {
  std::string config;
  std::string field;
  std::string out;
  int threads = 0;
  bool verbose = false;
};

class Run {
 public:
  Run(std::string command, const Globals& g) : command_(std::move(command)), manifest_(command_), globals_(g) {}

  RunManifest& manifest() { return manifest_; }

  void emit(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  void log(const std::string& text) const {
    if (globals_.verbose) std::cerr << command_ << ": " << text << "\n";
  }

  SpinModel model() {
    if (globals_.config.empty()) throw InputError("--config <tensors.json> is required for " + command_);
    SpinModel m = load_spin_model(globals_.config);
    manifest_.add_input("config", globals_.config);
    return m;
  }

  FieldVector field() {
    if (globals_.field.empty()) throw InputError("--field \"bx,by,bz\" is required for " + command_);
    manifest_.set("field_mT", globals_.field);
    return parse_field(globals_.field);
  }

  CsvTable csv(const std::string& role, const std::string& path) {
    CsvTable t = read_csv(path);
    manifest_.add_input(role, path);
    return t;
  }

  std::string text(const std::string& role, const std::string& path) {
    std::string s = read_text_file(path);
    manifest_.add_input(role, path);
    return s;
  }

  fs::path finish() {
    const std::string stamp = utc_timestamp();
    fs::path dir = globals_.out;
    if (dir.empty()) {
      std::string compact;
      for (const char c : stamp)
        if (c != '-' && c != ':') compact += c;
      dir = fs::path("out") / (command_ + "-" + compact);
    }
    fs::create_directories(dir);
    for (const auto& [name, content] : files_) {
      write_text_file(dir / name, content);
      manifest_.add_output(dir / name);
    }
    manifest_.set_timestamp(stamp);
    write_text_file(dir / "manifest.json", manifest_.to_json());
    return dir;
  }

 private:
  std::string command_;
  RunManifest manifest_;
  const Globals& globals_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string num(double v) { return format_double(v); }

std::string level_label(int k, char state) { return std::to_string(k + 1) + state; }

json vec_json(const auto& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

json mat_json(const auto& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r)));
  return rows;
}

BranchingMatrix gamma_source(Run& run, const std::string& source, const Manifolds& levels) {
  if (source == "tensors") return branching_matrix(levels);
  if (source == "uniform") return BranchingMatrix::uniform();
  return BranchingMatrix::from_matrix(read_branching_table(run.csv("gamma", source)));
}

// levels -----------------------------------------------------------------

void cmd_levels(Run& run) {
  const Manifolds lv = solve(run.model(), run.field());
  CsvWriter levels({"level", "energy_MHz"});
  for (int k = 0; k < kLevels; ++k) levels.row({level_label(k, 'g'), num(lv.ground.energies[k])});
  for (int k = 0; k < kLevels; ++k) levels.row({level_label(k, 'e'), num(lv.excited.energies[k])});
  CsvWriter lines({"transition", "freq_MHz"});
  for (int i = 0; i < kLevels; ++i)
    for (int j = 0; j < kLevels; ++j) lines.row({Transition{i, j}.label(), num(transition_frequency(lv, i, j))});
  run.emit("levels.csv", levels.str());
  run.emit("transitions.csv", lines.str());
  std::cout << levels.str();
}

// branching --------------------------------------------------------------

void cmd_branching(Run& run) {
  const BranchingMatrix g = branching_matrix(solve(run.model(), run.field()));
  const std::string csv = branching_table_to_csv(g.matrix());
  run.emit("branching.csv", csv);
  std::cout << csv;
}

// simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string scheme;
  std::string gamma = "tensors";
  SimulationConfig config;
  double threshold = 1e-3;
  double merge = 0.0;
};

void cmd_simulate(Run& run, SimulateArgs a, int threads) {
  const SpinModel model = run.model();
  const Manifolds lv = solve(model, run.field());
  const Scheme scheme = parse_scheme(run.text("scheme", a.scheme), a.scheme);
  const BranchingMatrix gamma = gamma_source(run, a.gamma, lv);
  a.config.threads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  RunManifest& m = run.manifest();
  m.set("gamma", a.gamma);
  m.set("probe_min_MHz", a.config.probe_min);
  m.set("probe_max_MHz", a.config.probe_max);
  m.set("step_MHz", a.config.step);
  m.set("lorentz_fwhm_MHz", a.config.lorentz_fwhm);
  m.set("target_od", a.config.target_od);
  m.set("pump_tolerance", a.config.pump.tolerance);
  m.set("pump_max_passes", static_cast<long long>(a.config.pump.max_passes));
  m.set("extrema_threshold", a.threshold);
  m.set("extrema_merge_MHz", a.merge);

  run.log("running " + std::to_string(scheme.stages.size()) + " stages");
  const SimulationResult r = run_scheme(scheme, lv, gamma, a.config);

  CsvWriter spectra({"freq_MHz", "unpumped_od", "before_od", "after_od", "difference_od"});
  for (int k = 0; k < r.after.axis.size; ++k) {
    spectra.row({num(r.after.axis[k]), num(r.unpumped.od[k]), num(r.before.od[k]), num(r.after.od[k]),
                 num(r.difference.od[k])});
  }
  const ExtremaSet ext = count_extrema(r.difference, a.threshold, a.merge);
  CsvWriter extrema({"kind", "freq_MHz", "delta_od"});
  for (const Extremum& e : ext.holes) extrema.row({"hole", num(e.frequency), num(e.value)});
  for (const Extremum& e : ext.antiholes) extrema.row({"antihole", num(e.frequency), num(e.value)});

  json summary;
  summary["reference"] = scheme.reference.label();
  summary["reference_MHz"] = transition_frequency(lv, scheme.reference);
  summary["chi"] = r.after.chi;
  summary["stages"] = json::array();
  for (const StageReport& s : r.stages) {
    summary["stages"].push_back({{"name", s.name},
                                 {"components", s.components},
                                 {"passes", s.pump.passes},
                                 {"converged", s.pump.converged},
                                 {"last_change", s.pump.last_change},
                                 {"skipped", s.pump.skipped}});
  }
  summary["holes"] = ext.holes.size();
  summary["antiholes"] = ext.antiholes.size();
  const int c = r.after.axis.nearest(0.0);
  if (c >= 0) {
    summary["od_at_reference"] = {{"unpumped", r.unpumped.od[c]}, {"after", r.after.od[c]}};
  }
  run.emit("spectra.csv", spectra.str());
  run.emit("extrema.csv", extrema.str());
  run.emit("summary.json", summary.dump(2) + "\n");
  std::cout << "holes " << ext.holes.size() << ", anti-holes " << ext.antiholes.size() << "\n";
  for (std::size_t k = 0; k < r.stages.size(); ++k) {
    if (scheme.stages[k].steady_state && !r.stages[k].pump.converged) {
      std::cerr << "warning: stage " << r.stages[k].name << " did not reach a fixed point\n";
    }
  }
}

// shb-catalog ------------------------------------------------------------

void cmd_shb_catalog(Run& run, const std::string& burn, double dedupe) {
  const Manifolds lv = solve(run.model(), run.field());
  run.manifest().set("dedupe_MHz", dedupe);
  ShbCatalog cat;
  if (burn.empty()) {
    cat = shb_catalog_all(lv, dedupe);
  } else {
    run.manifest().set("burn", burn);
    cat = shb_catalog_single(lv, Transition::parse(burn), dedupe);
  }
  // Same layout as SHB measurement input, so a catalog can be fed back to
  // fit-field directly.
  CsvWriter out({"kind", "offset_MHz", "i", "j", "i2", "j2", "weight"});
  for (const auto* list : {&cat.holes, &cat.antiholes}) {
    for (const CatalogLine& l : *list) {
      out.row({to_string(l.kind), num(l.offset), std::to_string(l.i + 1), std::to_string(l.j + 1),
               std::to_string(l.i2 + 1), std::to_string(l.j2 + 1), "1"});
    }
  }
  json summary{{"holes", cat.holes.size()},
               {"antiholes", cat.antiholes.size()},
               {"expected_holes", cat.expected_holes},
               {"expected_antiholes", cat.expected_antiholes},
               {"collisions", cat.collisions.size()}};
  run.emit("catalog.csv", out.str());
  run.emit("summary.json", summary.dump(2) + "\n");
  std::cout << cat.holes.size() << " holes, " << cat.antiholes.size() << " anti-holes";
  if (!cat.collisions.empty()) std::cout << " (" << cat.collisions.size() << " coincidences merged)";
  std::cout << "\n";
}

// rhs-lines --------------------------------------------------------------

void cmd_rhs_lines(Run& run) {
  const RhsLineSet s = rhs_lines(run.model(), run.field());
  CsvWriter out({"label", "freq_MHz", "weight", "subsite"});
  for (int k = 0; k < kRhsLines; ++k) out.row({rhs_line_labels()[k], num(s.subsite1[k]), "1", "1"});
  for (int k = 0; k < kRhsLines; ++k) out.row({rhs_line_labels()[k], num(s.subsite2[k]), "1", "2"});
  run.emit("rhs_lines.csv", out.str());
  if (!s.ordered) std::cerr << "warning: lines are not in the order w45 < w35 < w46 < w36\n";
  std::cout << out.str();
}

// fit-field --------------------------------------------------------------

void cmd_fit_field(Run& run, const std::string& mode, const std::string& data, const std::string& init,
                   bool plane) {
  const SpinModel model = run.model();
  const std::string start = init.empty() ? std::string() : init;
  FieldVector initial;
  if (!start.empty()) {
    initial = parse_field(start);
    run.manifest().set("init_mT", start);
  } else {
    initial = run.field();
  }
  FieldFitOptions opt;
  opt.constrain_plane = plane;
  run.manifest().set("mode", mode);
  run.manifest().set("plane", plane);
  FieldFitResult r;
  const CsvTable table = run.csv("data", data);
  if (mode == "rhs") {
    r = fit_field_rhs(model, read_rhs_lines(table), initial, opt);
  } else if (mode == "shb") {
    r = fit_field_shb(model, read_shb_lines(table), initial, opt);
  } else {
    throw InputError("--mode must be rhs or shb");
  }
  run.log(r.stop_reason + " after " + std::to_string(r.iterations) + " iterations");
  json out;
  out["field_mT"] = vec_json(r.field.mT());
  out["std_error_mT"] = vec_json(r.std_error);
  out["covariance_mT2"] = mat_json(r.covariance);
  out["magnitude_mT"] = r.angles.magnitude;
  out["phi_deg"] = r.angles.phi_deg;
  out["theta_deg"] = r.angles.theta_deg;
  out["angles_error"] = {{"magnitude_mT", r.angles_error[0]}, {"phi_deg", r.angles_error[1]},
                         {"theta_deg", r.angles_error[2]}};
  out["rms_kHz"] = r.rms_kHz;
  out["residuals_kHz"] = r.residuals_kHz;
  out["weights"] = r.weights;
  if (!r.assignments.empty()) {
    json a = json::array();
    for (const auto& x : r.assignments) a.push_back({x[0] + 1, x[1] + 1, x[2] + 1, x[3] + 1});
    out["assignments"] = a;
  }
  out["plane_constrained"] = r.plane_constrained;
  out["sign_flipped"] = r.sign_flipped;
  out["iterations"] = r.iterations;
  out["condition_number"] = r.condition_number;
  out["stop_reason"] = r.stop_reason;
  out["warnings"] = r.warnings;
  run.emit("fit_field.json", out.dump(2) + "\n");
  for (const std::string& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::printf("B = (%.3f, %.3f, %.3f) +- (%.3f, %.3f, %.3f) mT, rms %.2f kHz\n", r.field[0], r.field[1], r.field[2],
              r.std_error[0], r.std_error[1], r.std_error[2], r.rms_kHz);
}

// calibrate / fit-gamma --------------------------------------------------

std::vector<RabiRecord> load_records(Run& run, const std::string& data, const std::string& reference) {
  auto records = read_rabi_records(run.csv("data", data));
  if (!reference.empty()) {
    run.manifest().set("reference", reference);
    records = power_calibrate(records, Transition::parse(reference));
  }
  return records;
}

void cmd_calibrate(Run& run, const std::string& data, const std::string& reference) {
  if (reference.empty()) throw InputError("--reference <transition> is required");
  const std::string csv = rabi_records_to_csv(load_records(run, data, reference));
  run.emit("calibrated.csv", csv);
  std::cout << csv;
}

struct GammaArgs {
  std::string data;
  std::string reference;
  std::string zeros;
  std::string initial;
  std::string optics;
  double penalty = 1e3;
};

void cmd_fit_gamma(Run& run, const GammaArgs& a) {
  GammaFitProblem p;
  p.records = load_records(run, a.data, a.reference);
  if (!a.zeros.empty()) {
    const CsvTable z = run.csv("zeros", a.zeros);
    const std::size_t col = z.column("transition");
    for (std::size_t r = 0; r < z.rows.size(); ++r) p.zeros.push_back(Transition::parse(z.text(r, col)));
  }
  if (!a.initial.empty()) p.initial = read_branching_table(run.csv("initial", a.initial));
  p.penalty_weight = a.penalty;
  run.manifest().set("penalty_weight", a.penalty);
  run.manifest().set("max_iterations", static_cast<long long>(p.max_iterations));

  const GammaFitResult r = fit_gamma(p);
  run.log(r.stop_reason + " after " + std::to_string(r.iterations) + " iterations");
  auto labels = [](const std::vector<Transition>& ts) {
    json a = json::array();
    for (const Transition& t : ts) a.push_back(t.label());
    return a;
  };
  json out;
  out["omega_kHz"] = r.omega_kHz;
  out["omega_err_kHz"] = r.omega_err_kHz;
  out["gamma"] = mat_json(r.gamma);
  out["gamma_err"] = mat_json(r.gamma_err);
  out["row_sums"] = vec_json(r.row_sums);
  out["col_sums"] = vec_json(r.col_sums);
  out["max_sum_deviation"] = r.max_sum_deviation;
  out["measured"] = labels(r.measured);
  out["free"] = labels(r.free);
  out["saturated"] = r.saturated;
  out["identifiable"] = r.identifiable;
  out["condition_number"] = r.condition_number;
  out["feasible_omega_kHz"] =
      r.feasible_omega ? json{r.feasible_omega->first, r.feasible_omega->second} : json(nullptr);
  out["iterations"] = r.iterations;
  out["stop_reason"] = r.stop_reason;
  if (!a.optics.empty()) {
    const OpticsConfig o = read_optics(run.text("optics", a.optics), a.optics);
    const DipoleResult d = dipole_moment(r.omega_kHz, r.omega_err_kHz, o);
    out["dipole"] = {{"area_m2", d.area_m2},
                     {"field_V_per_m", d.field_V_per_m},
                     {"mu_Cm", d.mu_Cm},
                     {"mu_err_Cm", d.mu_err_Cm}};
  }
  run.emit("fit_gamma.json", out.dump(2) + "\n");
  run.emit("gamma.csv", branching_table_to_csv(r.gamma));
  run.emit("gamma_err.csv", branching_table_to_csv(r.gamma_err));
  std::printf("Omega = %.1f +- %.1f kHz, max row/col sum deviation %.3f\n", r.omega_kHz, r.omega_err_kHz,
              r.max_sum_deviation);
  if (!r.identifiable) std::cerr << "warning: Omega and the free elements are not jointly identifiable\n";
  if (!r.saturated.empty()) std::cerr << "warning: " << r.saturated.size() << " parameters at a bound\n";
}

// fit-rabi-trace ---------------------------------------------------------

void cmd_fit_rabi_trace(Run& run, const std::string& data) {
  const CsvTable t = run.csv("data", data);
  const std::size_t tau = t.column("tau_us");
  const std::size_t od = t.column("od");
  std::vector<TracePoint> trace;
  for (std::size_t r = 0; r < t.rows.size(); ++r) trace.push_back({t.number(r, tau), t.number(r, od)});
  const DampedCosineFit f = fit_damped_cosine(trace);
  json out{{"frequency_kHz", f.frequency_kHz},
           {"frequency_err_kHz", f.frequency_err_kHz},
           {"amplitude", f.amplitude},
           {"decay_us", f.decay_us},
           {"decay_rate_per_us", f.decay_rate_per_us},
           {"phase_rad", f.phase_rad},
           {"offset", f.offset},
           {"rms", f.rms},
           {"ambiguous", f.ambiguous},
           {"iterations", f.iterations}};
  run.emit("rabi_trace.json", out.dump(2) + "\n");
  std::printf("f = %.2f +- %.2f kHz\n", f.frequency_kHz, f.frequency_err_kHz);
  if (f.ambiguous) std::cerr << "warning: frequency error exceeds half the frequency\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperfine spectroscopy toolkit: spin levels, optical pumping, field and branching fits"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Spin tensor configuration (JSON)");
  app.add_option("--field", g.field, "Magnetic field \"bx,by,bz\" in mT (D1, D2, b)");
  app.add_option("--out", g.out, "Output directory (default ./out/<command>-<timestamp>/)");
  app.add_option("--threads", g.threads, "Worker threads for spectrum synthesis (default: all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--verbose,-v", g.verbose, "Progress messages on stderr");

  auto* levels = app.add_subcommand("levels", "Energy levels and optical transition frequencies");
  auto* branching = app.add_subcommand("branching", "Branching matrix |<j_e|i_g>|^2");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a pump scheme and synthesize spectra");
  simulate->add_option("--scheme", sim.scheme, "Pump scheme (JSON)")->required();
  simulate->add_option("--gamma", sim.gamma, "tensors | uniform | branching table CSV");
  simulate->add_option("--probe-min", sim.config.probe_min, "Probe window start, MHz from the reference line");
  simulate->add_option("--probe-max", sim.config.probe_max, "Probe window end, MHz from the reference line");
  simulate->add_option("--step", sim.config.step, "Grid step (MHz)")->check(CLI::PositiveNumber);
  simulate->add_option("--fwhm", sim.config.lorentz_fwhm, "Homogeneous Lorentzian FWHM (MHz)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--od", sim.config.target_od, "Peak OD of the unpumped spectrum");
  simulate->add_option("--threshold", sim.threshold, "Extremum threshold (OD)");
  simulate->add_option("--merge", sim.merge, "Merge extrema closer than this (MHz)");

  std::string burn;
  double dedupe = 1e-3;
  auto* catalog = app.add_subcommand("shb-catalog", "Hole and anti-hole offsets");
  catalog->add_option("--burn", burn, "Single burned transition, e.g. 5g-6e (default: all classes)");
  catalog->add_option("--dedupe", dedupe, "Distinct-value tolerance (MHz)");

  auto* rhs = app.add_subcommand("rhs-lines", "Raman heterodyne spin lines for both subsites");

  std::string mode;
  std::string data;
  std::string init;
  bool plane = false;
  auto* fit_field = app.add_subcommand("fit-field", "Field vector from RHS lines or SHB offsets");
  fit_field->add_option("--mode", mode, "rhs | shb")->required()->check(CLI::IsMember({"rhs", "shb"}));
  fit_field->add_option("--data", data, "Measured lines (CSV)")->required();
  fit_field->add_option("--init", init, "Initial field \"bx,by,bz\" (default: --field)");
  fit_field->add_flag("--plane", plane, "Constrain B_b = 0");

  GammaArgs ga;
  auto* fit_gamma_cmd = app.add_subcommand("fit-gamma", "Branching matrix and Omega_ge from Rabi frequencies");
  fit_gamma_cmd->add_option("--data", ga.data, "Rabi table (CSV, kHz)")->required();
  fit_gamma_cmd->add_option("--reference", ga.reference, "Recalibrate to this transition's power");
  fit_gamma_cmd->add_option("--zeros", ga.zeros, "Elements held at zero (CSV column 'transition')");
  fit_gamma_cmd->add_option("--initial", ga.initial, "Initial branching table (CSV, percent)");
  fit_gamma_cmd->add_option("--optics", ga.optics, "Beam parameters (JSON) for the dipole moment");
  fit_gamma_cmd->add_option("--penalty", ga.penalty, "Normalization penalty weight")->check(CLI::PositiveNumber);

  std::string reference;
  auto* calibrate = app.add_subcommand("calibrate", "Scale Rabi frequencies to a common power");
  calibrate->add_option("--data", data, "Rabi table (CSV, kHz)")->required();
  calibrate->add_option("--reference", reference, "Transition whose power is the reference")->required();

  auto* trace = app.add_subcommand("fit-rabi-trace", "Damped-cosine fit of a Rabi oscillation trace");
  trace->add_option("--data", data, "Trace (CSV: tau_us,od)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  Run run(sub->get_name(), g);
  run.manifest().set("threads", static_cast<long long>(g.threads));
  try {
    if (sub == levels) cmd_levels(run);
    else if (sub == branching) cmd_branching(run);
    else if (sub == simulate) cmd_simulate(run, sim, g.threads);
    else if (sub == catalog) cmd_shb_catalog(run, burn, dedupe);
    else if (sub == rhs) cmd_rhs_lines(run);
    else if (sub == fit_field) cmd_fit_field(run, mode, data, init, plane);
    else if (sub == fit_gamma_cmd) cmd_fit_gamma(run, ga);
    else if (sub == calibrate) cmd_calibrate(run, data, reference);
    else if (sub == trace) cmd_fit_rabi_trace(run, data);
    const fs::path dir = run.finish();
    if (g.verbose) std::cerr << "outputs in " << dir.string() << "\n";
    return 0;
  } catch (const RankError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
