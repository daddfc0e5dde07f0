#pragma once

// Absorption spectrum of a pumped ensemble:
//
//   f(x) = chi * sum_delta G(delta) sum_ij gamma_ij rho_i(delta) H(x - T_ij(delta))
//
// with H a peak-normalized Lorentzian.

#include <vector>

#include <Eigen/Dense>

#include "hfspec/pump_sim.hpp"
#include "hfspec/spin_core.hpp"

namespace hfspec {

struct Spectrum {
  FrequencyAxis axis;
  Eigen::VectorXd od;
  double chi = 1.0;
  double lorentz_fwhm = 0.0;
};

// (fwhm/2)^2 / (x^2 + (fwhm/2)^2)
double lorentzian(double x, double fwhm);

struct SynthesisOptions {
  double lorentz_fwhm = 0.05;  // MHz
  double chi = 1.0;
  int threads = 1;
};

// Convolution by FFT when the probe step equals the class step (exact up to
// round-off), otherwise a direct sum. Throws InputError when the probe step
// exceeds fwhm/3.
Spectrum synthesize_spectrum(const PopulationGrid& pop, const DetuningGrid& grid,
                             const BranchingMatrix& gamma, const Manifolds& levels,
                             const FrequencyAxis& probe, const SynthesisOptions& options = {});

// Brute-force double sum over every class and line. Reference implementation
// for small grids.
Spectrum synthesize_spectrum_direct(const PopulationGrid& pop, const DetuningGrid& grid,
                                    const BranchingMatrix& gamma, const Manifolds& levels,
                                    const FrequencyAxis& probe, const SynthesisOptions& options = {});

// chi such that the thermal (unpumped) spectrum peaks at target_od.
double normalization_chi(const DetuningGrid& grid, const BranchingMatrix& gamma,
                         const Manifolds& levels, const FrequencyAxis& probe,
                         const SynthesisOptions& options = {}, double target_od = 1.0);

// after - before; holes negative, anti-holes positive.
Spectrum shb_difference(const Spectrum& before, const Spectrum& after);

struct Extremum {
  double frequency = 0.0;
  double value = 0.0;  // signed OD change
};

struct ExtremaSet {
  std::vector<Extremum> holes;      // local minima below -threshold
  std::vector<Extremum> antiholes;  // local maxima above +threshold
};

// Extrema closer than merge_tol are merged into the stronger one. Sorted by
// frequency.
ExtremaSet count_extrema(const Spectrum& diff, double threshold, double merge_tol = 0.0);

// gamma_ij * rho_i: OD at the centre of a cleaned, polarized trench as a
// fraction of the unpumped OD.
double resonant_od(const BranchingMatrix& gamma, const Vector6d& rho, Transition t);
// General resonant sum sum_ij gamma_ij R_ij, where R_ij is the population of
// ground level i in the class that (i, j) brings into resonance. Thermal
// populations (R = 1/6) give exactly 1.
double resonant_od(const BranchingMatrix& gamma, const Matrix6d& resonant_populations);

}  // namespace hfspec
