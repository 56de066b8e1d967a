#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cherenkov/grid.hpp"
#include "cherenkov/materials.hpp"

namespace cherenkov::dispersion {

using Complex = std::complex<double>;

struct ElectronKinematics {
  double kinetic_kev;
  double beta;   // v / c
  double gamma;  // Lorentz factor

  /// Wavenumber (1/nm) of the electron line k = omega / v at photon energy E.
  double line_k(double energy_ev) const;
};

/// Relativistic kinematics for kinetic energy T (keV). Throws RangeError for T <= 0.
ElectronKinematics electron_kinematics(double kinetic_kev);

/// Normal wavevector sqrt(eps k0^2 - k_par^2) on the decaying branch
/// (Im >= 0; Re >= 0 when purely real).
Complex normal_wavevector(Complex eps, double k0, double k_par);

/// Permittivities of every medium at one photon energy.
struct ResolvedStack {
  double energy_ev;
  std::vector<Complex> eps;           // superstrate, layers..., substrate
  std::vector<double> thickness_nm;   // one per layer
};

ResolvedStack resolve(const materials::LayerStack& stack, double energy_ev);

/// p-polarized amplitude reflection coefficient seen from the superstrate,
/// by interface recursion (no growing exponentials).
Complex reflection_coefficient_p(const ResolvedStack& stack, double k_par);
Complex reflection_coefficient_p(const materials::LayerStack& stack, double k_par, double energy_ev);

/// Same quantity from the product of 2x2 interface and propagation matrices.
/// Cross-check of the recursion; overflows for thick absorbing layers.
Complex reflection_coefficient_p_matrix(const ResolvedStack& stack, double k_par);

/// Im r_p over a (energy, k_par) grid; rows are energies.
struct DispersionMap {
  UniformGrid k_grid;  // 1/nm
  UniformGrid e_grid;  // eV
  Eigen::MatrixXd values;
};

struct DispersionGrids {
  double k_min = 1e-3;
  double k_max = 0.08;
  std::size_t k_points = 800;
  double e_min = 1.6;
  double e_max = 2.6;
  std::size_t e_points = 500;

  UniformGrid k_grid() const { return UniformGrid::linspace(k_min, k_max, k_points); }
  UniformGrid e_grid() const { return UniformGrid::linspace(e_min, e_max, e_points); }
};

DispersionMap dispersion_map(const materials::LayerStack& stack, const UniformGrid& k_grid, const UniformGrid& e_grid,
                             unsigned threads = 1);

inline constexpr double ridge_noise_floor = 1e-3;

struct RidgePoint {
  double energy_ev = 0.0;
  double k_per_nm = 0.0;   // refined argmax of Im r_p
  double max_value = 0.0;  // Im r_p at the grid maximum
  bool present = false;
};

/// Per-energy maximizing wavevector of Im r_p; the guided-mode dispersion.
struct ModeRidge {
  std::vector<RidgePoint> points;

  bool empty() const;
  std::size_t present_count() const;
  /// Linear interpolation between neighbouring present rows.
  std::optional<double> k_at(double energy_ev) const;
};

ModeRidge extract_ridge(const DispersionMap& map, double noise_floor = ridge_noise_floor);

struct PhaseMatchResult {
  double peak_energy_ev;
  double k_match_per_nm;
  double phase_velocity;  // fraction of c
};

/// Lowest-energy crossing of the electron line with the ridge.
/// Throws BelowThresholdError when the line never meets the ridge.
PhaseMatchResult phase_match(const ModeRidge& ridge, const ElectronKinematics& kin, double tolerance_ev = 1e-4);

/// Emission angle phi = arccos(v_p / v_e) at the given energy.
double emission_angle(double energy_ev, const ModeRidge& ridge, const ElectronKinematics& kin);

}  // namespace cherenkov::dispersion
