#include "hfspec/scheme.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "hfspec/error.hpp"
#include "hfspec/table_io.hpp"

namespace hfspec {

namespace {

using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& source, const std::string& key, const std::string& msg) {
  throw InputError(source + ": " + key + ": " + msg);
}

double number_or(const ordered_json& node, const char* key, double fallback,
                 const std::string& source, const std::string& path) {
  if (!node.contains(key)) return fallback;
  if (!node.at(key).is_number()) fail(source, path + "." + key, "expected a number");
  return node.at(key).get<double>();
}

Spectrum restrict_to(const Spectrum& s, double lo, double hi) {
  int first = -1;
  int last = -1;
  for (int k = 0; k < s.axis.size; ++k) {
    if (s.axis[k] >= lo - 1e-9 && s.axis[k] <= hi + 1e-9) {
      if (first < 0) first = k;
      last = k;
    }
  }
  Spectrum out = s;
  if (first < 0) {
    out.axis.size = 0;
    out.od.resize(0);
    return out;
  }
  out.axis.start = s.axis[first];
  out.axis.size = last - first + 1;
  out.od = s.od.segment(first, out.axis.size);
  return out;
}

}  // namespace

Scheme parse_scheme(std::string_view json_text, const std::string& source) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text.begin(), json_text.end());
  } catch (const ordered_json::parse_error& e) {
    throw InputError(source + ": JSON syntax error: " + e.what());
  }
  if (!root.is_object()) fail(source, "<root>", "expected a JSON object");
  Scheme scheme;
  if (root.contains("reference")) {
    if (!root.at("reference").is_string()) fail(source, "reference", "expected a transition label");
    scheme.reference = Transition::parse(root.at("reference").get<std::string>());
  }
  if (!root.contains("stages") || !root.at("stages").is_array()) fail(source, "stages", "expected an array");
  int s = 0;
  for (const auto& node : root.at("stages")) {
    const std::string path = "stages[" + std::to_string(s++) + "]";
    if (!node.is_object()) fail(source, path, "expected an object");
    SchemeStage stage;
    stage.name = node.value("name", "stage" + std::to_string(s));
    if (node.contains("steady_state")) {
      if (!node.at("steady_state").is_boolean()) fail(source, path + ".steady_state", "expected true/false");
      stage.steady_state = node.at("steady_state").get<bool>();
    }
    if (!node.contains("entries") || !node.at("entries").is_array()) fail(source, path + ".entries", "expected an array");
    int e = 0;
    for (const auto& en : node.at("entries")) {
      const std::string epath = path + ".entries[" + std::to_string(e++) + "]";
      if (!en.is_object()) fail(source, epath, "expected an object");
      SchemeEntry entry;
      if (en.contains("transition")) {
        if (!en.at("transition").is_string()) fail(source, epath + ".transition", "expected a label such as \"5g-6e\"");
        try {
          entry.transition = Transition::parse(en.at("transition").get<std::string>());
        } catch (const InputError& err) {
          fail(source, epath + ".transition", err.what());
        }
      } else if (!en.contains("center_MHz")) {
        fail(source, epath, "needs 'transition' or 'center_MHz'");
      }
      entry.center_MHz = number_or(en, "center_MHz", 0.0, source, epath);
      entry.sweep_MHz = number_or(en, "sweep_MHz", 0.0, source, epath);
      if (entry.sweep_MHz < 0.0) fail(source, epath + ".sweep_MHz", "must be non-negative");
      const double repeat = number_or(en, "repeat", 1.0, source, epath);
      if (repeat < 1.0 || repeat != std::floor(repeat)) fail(source, epath + ".repeat", "must be a positive integer");
      entry.repeat = static_cast<int>(repeat);
      stage.entries.push_back(entry);
    }
    scheme.stages.push_back(std::move(stage));
  }
  return scheme;
}

Scheme load_scheme(const std::filesystem::path& path) {
  return parse_scheme(read_text_file(path), path.string());
}

std::string scheme_to_json(const Scheme& scheme) {
  ordered_json root;
  root["reference"] = scheme.reference.label();
  root["stages"] = ordered_json::array();
  for (const SchemeStage& stage : scheme.stages) {
    ordered_json s;
    s["name"] = stage.name;
    s["steady_state"] = stage.steady_state;
    s["entries"] = ordered_json::array();
    for (const SchemeEntry& e : stage.entries) {
      ordered_json en;
      if (e.transition) en["transition"] = e.transition->label();
      en["center_MHz"] = e.center_MHz;
      en["sweep_MHz"] = e.sweep_MHz;
      en["repeat"] = e.repeat;
      s["entries"].push_back(en);
    }
    root["stages"].push_back(s);
  }
  return root.dump(2) + "\n";
}

double entry_center(const SchemeEntry& entry, const Manifolds& levels, Transition reference) {
  double center = entry.center_MHz;
  if (entry.transition) {
    center += transition_frequency(levels, *entry.transition) - transition_frequency(levels, reference);
  }
  return center;
}

SchemeFrame::SchemeFrame(const Manifolds& levels, Transition reference, const SimulationConfig& config)
    : origin_(transition_frequency(levels, reference)),
      grid_(DetuningGrid::covering(levels, origin_ + config.probe_min, origin_ + config.probe_max,
                                   config.step, 5.0, config.broadening)) {
  FrequencyAxis rel = FrequencyAxis::span(config.probe_min, config.probe_max, config.step);
  probe_ = rel;
  probe_.start = origin_ + rel.start;
}

FrequencyAxis SchemeFrame::relative_probe() const {
  FrequencyAxis a = probe_;
  a.start = probe_.start - origin_;
  return a;
}

PumpSequence SchemeFrame::stage_sequence(const SchemeStage& stage, const Manifolds& levels,
                                         Transition reference) const {
  // Chirps are discretized at the grid step in the relative frame and then
  // moved to absolute frequency.
  FrequencyAxis rel = probe_;
  rel.start = 0.0;
  PumpSequence seq;
  for (const SchemeEntry& e : stage.entries) {
    PumpSequence pulse = PumpSequence::chirp(rel, entry_center(e, levels, reference), e.sweep_MHz);
    seq.append(pulse.repeated(e.repeat));
  }
  return seq.shifted(origin_);
}

SimulationResult run_scheme(const Scheme& scheme, const Manifolds& levels,
                            const BranchingMatrix& gamma, const SimulationConfig& config) {
  const SchemeFrame frame(levels, scheme.reference, config);
  SynthesisOptions opts;
  opts.lorentz_fwhm = config.lorentz_fwhm;
  opts.threads = config.threads;
  opts.chi = normalization_chi(frame.grid(), gamma, levels, frame.probe(), opts, config.target_od);

  auto relative = [&](Spectrum s) {
    s.axis = frame.relative_probe();
    return s;
  };

  SimulationResult out;
  out.population = init_thermal(frame.grid());
  out.unpumped = relative(synthesize_spectrum(out.population, frame.grid(), gamma, levels, frame.probe(), opts));
  out.before = out.unpumped;

  int last_shb = -1;
  for (std::size_t s = 0; s < scheme.stages.size(); ++s) {
    if (scheme.stages[s].name == "shb") last_shb = static_cast<int>(s);
  }
  for (std::size_t s = 0; s < scheme.stages.size(); ++s) {
    const SchemeStage& stage = scheme.stages[s];
    if (static_cast<int>(s) == last_shb) {
      out.before = relative(synthesize_spectrum(out.population, frame.grid(), gamma, levels, frame.probe(), opts));
    }
    const PumpSequence seq = frame.stage_sequence(stage, levels, scheme.reference);
    StageReport report;
    report.name = stage.name;
    report.components = seq.size();
    if (stage.steady_state) {
      report.pump = pump_to_steady_state(out.population, seq, gamma, levels, config.pump);
    } else {
      report.pump = apply_pump(out.population, seq, gamma, levels, config.pump.efficiency);
    }
    out.stages.push_back(report);
  }
  out.after = scheme.stages.empty()
                  ? out.unpumped
                  : relative(synthesize_spectrum(out.population, frame.grid(), gamma, levels, frame.probe(), opts));
  out.difference = shb_difference(out.before, out.after);
  return out;
}

Scheme cc_sp_scheme(const std::vector<Transition>& cc, Transition reference, double sweep) {
  Scheme scheme;
  scheme.reference = reference;
  SchemeStage clean{"class_clean", {}, true};
  SchemeStage polarize{"spin_polarize", {}, true};
  for (const Transition& t : cc) {
    SchemeEntry e;
    e.transition = t;
    e.sweep_MHz = sweep;
    clean.entries.push_back(e);
    if (t != reference) polarize.entries.push_back(e);
  }
  scheme.stages = {clean, polarize};
  return scheme;
}

std::vector<TrenchProfile> trench_bandwidth_scan(const std::vector<Transition>& cc,
                                                 Transition reference,
                                                 const std::vector<double>& sweeps,
                                                 const BranchingMatrix& gamma,
                                                 const Manifolds& levels,
                                                 const SimulationConfig& config,
                                                 const StepDetection& detection) {
  std::vector<TrenchProfile> out;
  for (const double sweep : sweeps) {
    if (!(sweep >= 0.0)) throw InputError("sweep widths must be non-negative");
    const SimulationResult sim = run_scheme(cc_sp_scheme(cc, reference, sweep), levels, gamma, config);
    TrenchProfile p;
    p.sweep = sweep;
    const double half = 0.5 * sweep;
    p.spectrum = restrict_to(sim.after, -half - 1.0, half + 1.0);
    const int c = sim.after.axis.nearest(0.0);
    p.center_od = c >= 0 ? sim.after.od[c] / config.target_od : 0.0;

    const Spectrum inner = restrict_to(sim.after, -half + detection.edge_margin, half - detection.edge_margin);
    const int lag = static_cast<int>(std::lround(detection.window / inner.axis.step));
    for (int k = 0; k + lag < inner.axis.size; ++k) {
      const double jump = std::abs(inner.od[k + lag] - inner.od[k]) / config.target_od;
      if (jump > p.max_jump) {
        p.max_jump = jump;
        p.jump_position = inner.axis[k] + 0.5 * detection.window;
      }
    }
    p.step = p.max_jump > detection.threshold;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace hfspec
