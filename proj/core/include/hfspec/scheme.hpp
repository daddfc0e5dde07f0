#pragma once

// Pump schemes: named stages of chirped pump pulses, run against a spin model
// and turned into spectra. All frequencies in a scheme are relative to the
// reference transition of the selected class (T_ref(0) = 0).

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hfspec/pump_sim.hpp"
#include "hfspec/spectrum.hpp"
#include "hfspec/spin_core.hpp"

namespace hfspec {

// Pulse centred on `transition` (if given) shifted by center_MHz, swept over
// sweep_MHz, emitted `repeat` times in a row.
struct SchemeEntry {
  std::optional<Transition> transition;
  double center_MHz = 0.0;
  double sweep_MHz = 0.0;
  int repeat = 1;
};

struct SchemeStage {
  std::string name;
  std::vector<SchemeEntry> entries;
  bool steady_state = true;  // repeat the stage to its fixed point, else one pass
};

struct Scheme {
  Transition reference{4, 5};
  std::vector<SchemeStage> stages;
};

// {
//   "reference": "5g-6e",
//   "stages": [
//     {"name": "class_clean", "entries": [{"transition": "5g-6e", "sweep_MHz": 2.2}, ...]},
//     {"name": "shb", "steady_state": false, "entries": [{"center_MHz": 0.0}]}
//   ]
// }
Scheme parse_scheme(std::string_view json_text, const std::string& source = "<string>");
Scheme load_scheme(const std::filesystem::path& path);
std::string scheme_to_json(const Scheme& scheme);

// Pump frequency of an entry's centre relative to the reference transition.
double entry_center(const SchemeEntry& entry, const Manifolds& levels, Transition reference);

struct SimulationConfig {
  double probe_min = -150.0;  // MHz, relative to the reference transition
  double probe_max = 150.0;
  double step = 0.01;
  double lorentz_fwhm = 0.05;
  double target_od = 1.0;
  BroadeningConfig broadening;
  PumpOptions pump;
  int threads = 1;
};

// The scheme's pump frequencies and probe axis live in the relative frame;
// classes are laid out on a grid wide enough to cover the whole probe window.
class SchemeFrame {
 public:
  SchemeFrame(const Manifolds& levels, Transition reference, const SimulationConfig& config);

  double origin() const { return origin_; }  // absolute frequency of relative 0
  const DetuningGrid& grid() const { return grid_; }
  const FrequencyAxis& probe() const { return probe_; }  // absolute
  FrequencyAxis relative_probe() const;

  PumpSequence stage_sequence(const SchemeStage& stage, const Manifolds& levels,
                              Transition reference) const;

 private:
  double origin_;
  DetuningGrid grid_;
  FrequencyAxis probe_;
};

struct StageReport {
  std::string name;
  std::size_t components = 0;
  PumpReport pump;
};

struct SimulationResult {
  Spectrum unpumped;
  Spectrum before;      // spectrum entering the last "shb" stage (or unpumped)
  Spectrum after;       // final spectrum
  Spectrum difference;  // after - before
  std::vector<StageReport> stages;
  PopulationGrid population;
};

// Spectra carry relative probe axes and are scaled so the unpumped spectrum
// peaks at config.target_od.
SimulationResult run_scheme(const Scheme& scheme, const Manifolds& levels,
                            const BranchingMatrix& gamma, const SimulationConfig& config);

// Standard class-cleaning plus spin-polarization scheme: every CC transition
// chirped over `sweep`, then the same set without the reference transition.
Scheme cc_sp_scheme(const std::vector<Transition>& cc, Transition reference, double sweep);

struct StepDetection {
  double threshold = 0.05;   // fraction of the unpumped OD
  double window = 0.2;       // MHz between compared points
  double edge_margin = 0.2;  // MHz excluded at both trench walls
};

struct TrenchProfile {
  double sweep = 0.0;
  Spectrum spectrum;  // relative axis, restricted to the trench +- 1 MHz
  double center_od = 0.0;
  double max_jump = 0.0;       // largest |f(x + window) - f(x)| inside the trench
  double jump_position = 0.0;  // x of that jump
  bool step = false;
};

// Runs CC + SP for each sweep width and inspects the zero-frequency trench.
std::vector<TrenchProfile> trench_bandwidth_scan(const std::vector<Transition>& cc,
                                                 Transition reference,
                                                 const std::vector<double>& sweeps,
                                                 const BranchingMatrix& gamma,
                                                 const Manifolds& levels,
                                                 const SimulationConfig& config,
                                                 const StepDetection& detection = {});

}  // namespace hfspec
