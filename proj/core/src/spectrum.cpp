#include "hfspec/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <thread>

#include <unsupported/Eigen/FFT>

#include "hfspec/error.hpp"

namespace hfspec {

namespace {

void check_sampling(const FrequencyAxis& probe, double fwhm) {
  if (!(fwhm > 0.0)) throw InputError("Lorentzian FWHM must be positive");
  if (probe.size < 1) throw InputError("probe axis is empty");
  if (probe.step > fwhm / 3.0 * (1.0 + 1e-9)) {
    throw InputError("probe grid undersamples the line shape: step " + std::to_string(probe.step) +
                     " MHz exceeds FWHM/3 = " + std::to_string(fwhm / 3.0) + " MHz");
  }
}

void check_population(const PopulationGrid& pop, const DetuningGrid& grid) {
  if (!(pop.axis == grid.axis())) throw InputError("population grid does not match detuning grid");
}

Matrix6d line_offsets(const Manifolds& levels) {
  Matrix6d off;
  for (int i = 0; i < kLevels; ++i) {
    for (int j = 0; j < kLevels; ++j) off(i, j) = transition_frequency(levels, i, j);
  }
  return off;
}

std::size_t fft_length(std::size_t n) {
  std::size_t l = 1;
  while (l < n) l <<= 1;
  return l;
}

// Runs body(i) for i in [0, count) on up to `threads` workers.
template <class Body>
void parallel_for(int count, int threads, Body body) {
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> workers;
  for (int t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      for (int i = t; i < count; i += threads) body(i);
    });
  }
}

Spectrum synthesize_fft(const PopulationGrid& pop, const DetuningGrid& grid,
                        const BranchingMatrix& gamma, const Manifolds& levels,
                        const FrequencyAxis& probe, const SynthesisOptions& options) {
  using cvec = std::vector<std::complex<double>>;
  const Matrix6d off = line_offsets(levels);
  const long nc = grid.size();
  const long np = probe.size;
  const long nk = nc + np - 1;
  const std::size_t len = fft_length(static_cast<std::size_t>(nk));
  const double h = grid.step();
  const double shift = probe.start - grid.axis().start;

  std::vector<cvec> products(kLevels);
  parallel_for(kLevels, options.threads, [&](int i) {
    Eigen::FFT<double> fft;
    std::vector<double> s(len, 0.0);
    bool any = false;
    for (long c = 0; c < nc; ++c) {
      s[c] = grid.weights()[c] * pop.rho(c, i);
      any = any || s[c] != 0.0;
    }
    if (!any) return;
    std::vector<double> k(len, 0.0);
    for (long t = 0; t < nk; ++t) {
      const double lag = static_cast<double>(t - (nc - 1)) * h + shift;
      double v = 0.0;
      for (int j = 0; j < kLevels; ++j) {
        if (gamma(i, j) != 0.0) v += gamma(i, j) * lorentzian(lag - off(i, j), options.lorentz_fwhm);
      }
      k[t] = v;
    }
    cvec fs;
    cvec fk;
    fft.fwd(fs, s);
    fft.fwd(fk, k);
    for (std::size_t n = 0; n < fs.size(); ++n) fs[n] *= fk[n];
    products[i] = std::move(fs);
  });

  cvec sum(len, {0.0, 0.0});
  for (const auto& p : products) {
    if (p.empty()) continue;
    for (std::size_t n = 0; n < len; ++n) sum[n] += p[n];
  }
  Eigen::FFT<double> fft;
  std::vector<double> z;
  fft.inv(z, sum);

  Spectrum out;
  out.axis = probe;
  out.chi = options.chi;
  out.lorentz_fwhm = options.lorentz_fwhm;
  out.od.resize(np);
  for (long m = 0; m < np; ++m) out.od[m] = options.chi * z[static_cast<std::size_t>(m + nc - 1)];
  return out;
}

}  // namespace

double lorentzian(double x, double fwhm) {
  const double hw = 0.5 * fwhm;
  return hw * hw / (x * x + hw * hw);
}

Spectrum synthesize_spectrum_direct(const PopulationGrid& pop, const DetuningGrid& grid,
                                    const BranchingMatrix& gamma, const Manifolds& levels,
                                    const FrequencyAxis& probe, const SynthesisOptions& options) {
  check_sampling(probe, options.lorentz_fwhm);
  check_population(pop, grid);
  const Matrix6d off = line_offsets(levels);
  Spectrum out;
  out.axis = probe;
  out.chi = options.chi;
  out.lorentz_fwhm = options.lorentz_fwhm;
  out.od = Eigen::VectorXd::Zero(probe.size);
  for (int c = 0; c < grid.size(); ++c) {
    const double w = grid.weights()[c];
    if (w == 0.0) continue;
    for (int i = 0; i < kLevels; ++i) {
      const double r = pop.rho(c, i);
      if (r == 0.0) continue;
      for (int j = 0; j < kLevels; ++j) {
        const double a = w * r * gamma(i, j);
        if (a == 0.0) continue;
        const double line = off(i, j) + grid[c];
        for (int m = 0; m < probe.size; ++m) out.od[m] += a * lorentzian(probe[m] - line, options.lorentz_fwhm);
      }
    }
  }
  out.od *= options.chi;
  return out;
}

Spectrum synthesize_spectrum(const PopulationGrid& pop, const DetuningGrid& grid,
                             const BranchingMatrix& gamma, const Manifolds& levels,
                             const FrequencyAxis& probe, const SynthesisOptions& options) {
  check_sampling(probe, options.lorentz_fwhm);
  check_population(pop, grid);
  if (std::abs(probe.step - grid.step()) <= 1e-12 * grid.step()) {
    return synthesize_fft(pop, grid, gamma, levels, probe, options);
  }
  return synthesize_spectrum_direct(pop, grid, gamma, levels, probe, options);
}

double normalization_chi(const DetuningGrid& grid, const BranchingMatrix& gamma,
                         const Manifolds& levels, const FrequencyAxis& probe,
                         const SynthesisOptions& options, double target_od) {
  SynthesisOptions raw = options;
  raw.chi = 1.0;
  const Spectrum s = synthesize_spectrum(init_thermal(grid), grid, gamma, levels, probe, raw);
  const double peak = s.od.maxCoeff();
  if (!(peak > 0.0)) throw InputError("unpumped spectrum is identically zero in the probe window");
  return target_od / peak;
}

Spectrum shb_difference(const Spectrum& before, const Spectrum& after) {
  if (!(before.axis == after.axis) || before.od.size() != after.od.size()) {
    throw InputError("spectra are sampled on different probe grids");
  }
  Spectrum d = after;
  d.od = after.od - before.od;
  return d;
}

ExtremaSet count_extrema(const Spectrum& diff, double threshold, double merge_tol) {
  if (!(threshold > 0.0)) throw InputError("extremum threshold must be positive");
  const Eigen::VectorXd& v = diff.od;
  const long n = v.size();
  std::vector<Extremum> holes;
  std::vector<Extremum> anti;
  for (long k = 1; k + 1 < n; ++k) {
    if (v[k] < -threshold && v[k] < v[k - 1] && v[k] <= v[k + 1]) holes.push_back({diff.axis[k], v[k]});
    if (v[k] > threshold && v[k] > v[k - 1] && v[k] >= v[k + 1]) anti.push_back({diff.axis[k], v[k]});
  }
  auto merge = [merge_tol](const std::vector<Extremum>& in) {
    std::vector<Extremum> out;
    for (const Extremum& e : in) {
      if (!out.empty() && e.frequency - out.back().frequency < merge_tol) {
        if (std::abs(e.value) > std::abs(out.back().value)) out.back() = e;
      } else {
        out.push_back(e);
      }
    }
    return out;
  };
  return {merge(holes), merge(anti)};
}

double resonant_od(const BranchingMatrix& gamma, const Vector6d& rho, Transition t) {
  if (t.ground < 0 || t.ground >= kLevels || t.excited < 0 || t.excited >= kLevels) {
    throw InputError("transition index out of range");
  }
  return gamma(t.ground, t.excited) * rho[t.ground];
}

double resonant_od(const BranchingMatrix& gamma, const Matrix6d& resonant_populations) {
  return gamma.matrix().cwiseProduct(resonant_populations).sum();
}

}  // namespace hfspec
