#pragma once

namespace cherenkov::constants {

inline constexpr double pi = 3.14159265358979323846;

/// hbar * c in eV nm; converts photon energies to vacuum wavenumbers.
inline constexpr double hbar_c_ev_nm = 197.3269804;

/// Fine-structure constant.
inline constexpr double alpha = 1.0 / 137.035999084;

/// Electron rest energy in keV.
inline constexpr double electron_rest_kev = 510.999;

/// FWHM of a Gaussian divided by its standard deviation, 2 sqrt(2 ln 2).
inline constexpr double fwhm_per_sigma = 2.3548200450309493;

}  // namespace cherenkov::constants
