#include "hfspec/pump_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hfspec/error.hpp"

namespace hfspec {

FrequencyAxis FrequencyAxis::span(double min, double max, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw InputError("grid step must be positive");
  if (!(max >= min)) throw InputError("grid range is empty");
  // Align on integer multiples of the step so that independently built grids
  // with the same step share their points.
  const long long first = static_cast<long long>(std::floor(min / step + 1e-9));
  const long long last = static_cast<long long>(std::ceil(max / step - 1e-9));
  FrequencyAxis a;
  a.start = static_cast<double>(first) * step;
  a.step = step;
  a.size = static_cast<int>(last - first + 1);
  return a;
}

int FrequencyAxis::nearest(double x) const {
  const double k = std::round((x - start) / step);
  if (!(k >= 0.0) || k >= size) return -1;
  return static_cast<int>(k);
}

DetuningGrid::DetuningGrid(FrequencyAxis axis, const BroadeningConfig& broadening)
    : axis_(axis), broadening_(broadening), weights_(axis.size) {
  if (axis.size < 1) throw InputError("detuning grid needs at least one point");
  if (!(axis.step > 0.0)) throw InputError("detuning grid step must be positive");
  if (broadening.shape == Broadening::flat) {
    weights_.setOnes();
  } else {
    if (!(broadening.fwhm_MHz > 0.0)) throw InputError("broadening FWHM must be positive");
    const double sigma = broadening.fwhm_MHz / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
    for (int k = 0; k < axis.size; ++k) {
      const double x = (axis[k] - broadening.center_MHz) / sigma;
      weights_[k] = std::exp(-0.5 * x * x);
    }
  }
}

DetuningGrid DetuningGrid::covering(const Manifolds& levels, double probe_min, double probe_max,
                                    double step, double margin,
                                    const BroadeningConfig& broadening) {
  double lo = 0.0;
  double hi = 0.0;
  for (int i = 0; i < kLevels; ++i) {
    for (int j = 0; j < kLevels; ++j) {
      const double off = transition_frequency(levels, i, j);
      if (i == 0 && j == 0) lo = hi = off;
      lo = std::min(lo, off);
      hi = std::max(hi, off);
    }
  }
  return DetuningGrid(FrequencyAxis::span(probe_min - hi - margin, probe_max - lo + margin, step),
                      broadening);
}

double PopulationGrid::max_sum_deviation() const {
  if (rho.rows() == 0) return 0.0;
  return (rho.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

PopulationGrid init_thermal(const DetuningGrid& grid) {
  PopulationGrid pop;
  pop.axis = grid.axis();
  pop.rho = PopulationMatrix::Constant(grid.size(), kLevels, 1.0 / kLevels);
  return pop;
}

PumpSequence PumpSequence::burn(const FrequencyAxis& axis, double frequency) {
  PumpSequence s;
  s.components_.push_back(std::round(frequency / axis.step) * axis.step);
  return s;
}

PumpSequence PumpSequence::chirp(const FrequencyAxis& axis, double center, double width) {
  if (!(width >= 0.0)) throw InputError("sweep width must be non-negative");
  PumpSequence s;
  const long long first = std::llround((center - 0.5 * width) / axis.step);
  const long long last = std::llround((center + 0.5 * width) / axis.step);
  for (long long k = first; k <= last; ++k) s.components_.push_back(static_cast<double>(k) * axis.step);
  return s;
}

PumpSequence& PumpSequence::append(const PumpSequence& other) {
  components_.insert(components_.end(), other.components_.begin(), other.components_.end());
  return *this;
}

PumpSequence PumpSequence::repeated(int times) const {
  if (times < 0) throw InputError("repeat count must be non-negative");
  PumpSequence s;
  for (int r = 0; r < times; ++r) s.append(*this);
  return s;
}

PumpSequence PumpSequence::shifted(double offset) const {
  PumpSequence s = *this;
  for (double& c : s.components_) c += offset;
  return s;
}

namespace {

struct DecayTable {
  Matrix6d feed;     // feed(m, j): share of j_e decay landing in m_g
  Matrix6d offsets;  // e_j - g_i
};

DecayTable decay_table(const BranchingMatrix& gamma, const Manifolds& levels) {
  DecayTable t;
  for (int j = 0; j < kLevels; ++j) {
    const double col = gamma.matrix().col(j).sum();
    if (!(col > 0.0)) throw InputError("branching column " + std::to_string(j + 1) + " sums to zero");
    t.feed.col(j) = gamma.matrix().col(j) / col;
  }
  for (int i = 0; i < kLevels; ++i) {
    for (int j = 0; j < kLevels; ++j) t.offsets(i, j) = transition_frequency(levels, i, j);
  }
  return t;
}

PumpReport pump_pass(PopulationGrid& pop, const PumpSequence& seq, const DecayTable& t,
                     double efficiency) {
  PumpReport report;
  const PopulationMatrix before = pop.rho;
  const FrequencyAxis& axis = pop.axis;
  for (const double p : seq.components()) {
    for (int i = 0; i < kLevels; ++i) {
      for (int j = 0; j < kLevels; ++j) {
        const int k = axis.nearest(p - t.offsets(i, j));
        if (k < 0) {
          ++report.skipped;
          continue;
        }
        auto row = pop.rho.row(k);
        const double moved = efficiency * row[i];
        if (moved == 0.0) continue;
        row[i] -= moved;
        for (int m = 0; m < kLevels; ++m) row[m] += moved * t.feed(m, j);
      }
    }
  }
  report.passes = 1;
  report.last_change = pop.rho.size() ? (pop.rho - before).cwiseAbs().maxCoeff() : 0.0;
  return report;
}

}  // namespace

PumpReport apply_pump(PopulationGrid& pop, const PumpSequence& seq, const BranchingMatrix& gamma,
                      const Manifolds& levels, double efficiency) {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw InputError("pump efficiency must lie in [0, 1]");
  return pump_pass(pop, seq, decay_table(gamma, levels), efficiency);
}

PumpReport pump_to_steady_state(PopulationGrid& pop, const PumpSequence& seq,
                                const BranchingMatrix& gamma, const Manifolds& levels,
                                const PumpOptions& options) {
  if (!(options.efficiency >= 0.0 && options.efficiency <= 1.0)) {
    throw InputError("pump efficiency must lie in [0, 1]");
  }
  if (options.max_passes < 1) throw InputError("max_passes must be at least 1");
  const DecayTable t = decay_table(gamma, levels);
  PumpReport total;
  for (int pass = 0; pass < options.max_passes; ++pass) {
    const PumpReport r = pump_pass(pop, seq, t, options.efficiency);
    total.passes = pass + 1;
    total.skipped += r.skipped;
    total.last_change = r.last_change;
    if (r.last_change < options.tolerance) {
      total.converged = true;
      break;
    }
  }
  return total;
}

}  // namespace hfspec
