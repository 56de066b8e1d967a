#pragma once

#include <string>
#include <vector>

#include "cherenkov/dispersion.hpp"
#include "cherenkov/grid.hpp"
#include "cherenkov/materials.hpp"

namespace cherenkov::spectrum {

using dispersion::ElectronKinematics;

struct BeamGeometry {
  double x0_nm = 40.0;      // centroid to surface
  double sigma_nm = 30.0;   // transverse Gaussian std
  double leff_um = 100.0;   // effective interaction length
  double lmax_um = 250.0;   // maximal interaction length

  void validate() const;
};

struct SpectrumOptions {
  double calibration = 1.0;     // global prefactor; 1 = bare aloof-loss formula
  double rel_tol = 1e-6;        // adaptive quadrature, relative to the row integral
  double kappa_cutoff = 14.0;   // integrate while kappa * x0 < cutoff
  std::size_t initial_panels = 128;
  unsigned threads = 1;
};

/// Emission probability density per eV per electron on an energy grid.
struct LossSpectrum {
  GridFunction density;
  ElectronKinematics kin{};
  BeamGeometry beam{};
  std::string stack_hash;
  double calibration = 1.0;

  const UniformGrid& grid() const { return density.grid; }
  /// Mean number of emitted quanta, sum(Gamma) * step.
  double lambda() const { return density.integral(); }
};

/// Energy grid used for guided-mode spectra unless configured otherwise.
UniformGrid default_energy_grid();

/// Aloof-trajectory loss probability of an electron moving parallel to the
/// stack at height x0 over length L:
///   Gamma(E) = cal * 2 alpha L / (pi beta^2 hbar c)
///              * int_0^inf dk_y (kappa / k_par^2) Im r_p(k_par, E) exp(-2 kappa x0),
/// k_par^2 = (E / hbar v)^2 + k_y^2, kappa^2 = k_par^2 - (E / hbar c)^2.
/// Only the p-polarized response enters.
LossSpectrum loss_density(const materials::LayerStack& stack, const ElectronKinematics& kin, const BeamGeometry& beam,
                          const UniformGrid& e_grid, const SpectrumOptions& options = {});

/// Single-energy value of the loss density (1/eV).
double loss_density_at(const dispersion::ResolvedStack& resolved, const ElectronKinematics& kin, double x0_nm,
                       double leff_um, const SpectrumOptions& options = {});

/// f_PQP = Gamma / lambda, unit area. Throws DegenerateSpectrumError when lambda == 0.
GridFunction spectral_density(const LossSpectrum& spec);

struct CouplingResult {
  double g_qu = 0.0;
  double lambda = 0.0;
  double kappa_peak = 0.0;  // 1/nm, field decay constant at the peak with k_y = 0
};

CouplingResult coupling_strength(const LossSpectrum& spec);

/// Decay constant of the electron's own evanescent field, sqrt((E/hbar v)^2 - (E/hbar c)^2).
double field_decay_constant(double energy_ev, const ElectronKinematics& kin);

struct CouplingSweep {
  std::vector<double> x0_nm;
  std::vector<double> leff_um;
};

struct CouplingSurface {
  std::vector<double> x0_nm;
  std::vector<double> leff_um;
  std::vector<std::vector<double>> g;        // [x0][leff]
  std::vector<double> kappa_peak;            // per x0, at the smallest leff
  std::vector<double> semilog_slope_x0;      // per leff: least-squares d ln g / d x0
  std::vector<double> loglog_slope_leff;     // per x0: least-squares d ln g / d ln L
  std::vector<LossSpectrum> spectra_first_leff;  // per x0, kept for peak-shape tables
};

/// g_qu over an (x0, L_eff) sweep; each point is a fresh loss_density.
CouplingSurface coupling_scaling(const materials::LayerStack& stack, const ElectronKinematics& kin,
                                 const BeamGeometry& beam, const CouplingSweep& sweep, const UniformGrid& e_grid,
                                 const SpectrumOptions& options = {});

inline constexpr double beam_min_distance_nm = 5.0;

/// g_qu averaged over x ~ Normal(x0, sigma^2) truncated to x > 5 nm and
/// renormalized. sigma = 0 returns the pointwise coupling.
CouplingResult average_over_beam(const materials::LayerStack& stack, const ElectronKinematics& kin,
                                 const BeamGeometry& beam, const UniformGrid& e_grid,
                                 const SpectrumOptions& options = {}, std::size_t nodes = 41);

/// Gaussian smoothing with kernel area 1 on the function's own grid; mass
/// leaving the grid is lost. fwhm = 0 is the identity.
GridFunction gaussian_smooth(const GridFunction& f, double fwhm_ev);

/// Sub-threshold loss spectrum (non-propagating surface plasmon) smoothed by
/// a Gaussian ZLP. Throws ThresholdWarning if the electron phase-matches the ridge.
LossSpectrum sp_reference_spectrum(const materials::LayerStack& stack, double sub_threshold_kev, double zlp_fwhm_ev,
                                   const BeamGeometry& beam, const UniformGrid& e_grid,
                                   const SpectrumOptions& options = {});

/// Photons per eV per nm of path in a transparent bulk medium:
///   (alpha / hbar c) (1 - 1 / (beta^2 n^2)) where beta n > 1, else 0.
GridFunction frank_tamm_3d(const materials::DielectricModel& medium, const ElectronKinematics& kin,
                           const UniformGrid& e_grid);

struct PeakShape {
  double peak_energy_ev = 0.0;   // parabolic refinement of the grid maximum
  double peak_value = 0.0;
  double half_width_low = 0.0;   // eV from peak down to half maximum, low side
  double half_width_high = 0.0;  // high side
  double fwhm() const { return half_width_low + half_width_high; }
};

/// Peak location and half-maximum crossings (linear interpolation).
PeakShape analyze_peak(const GridFunction& f);

}  // namespace cherenkov::spectrum
