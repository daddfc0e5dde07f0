#pragma once

#include <string>
#include <vector>

namespace hfspec {

struct TracePoint {
  double tau_us = 0.0;
  double od = 0.0;
};

// od(tau) = A exp(-tau / T) cos(2 pi f tau + phi) + c
struct DampedCosineFit {
  double frequency_kHz = 0.0;
  double frequency_err_kHz = 0.0;
  double amplitude = 0.0;
  double decay_us = 0.0;  // T
  double decay_rate_per_us = 0.0;  // 1 / T
  double phase_rad = 0.0;
  double offset = 0.0;
  double rms = 0.0;
  bool ambiguous = false;  // frequency error above half the frequency
  int iterations = 0;
};

// Needs >= 8 points spanning at least one period of the fitted oscillation.
// Throws InputError for constant or too short traces, ConvergenceError when
// the fit fails.
DampedCosineFit fit_damped_cosine(const std::vector<TracePoint>& trace);

}  // namespace hfspec
