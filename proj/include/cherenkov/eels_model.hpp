#pragma once

#include <variant>
#include <vector>

#include "cherenkov/grid.hpp"

namespace cherenkov::eels {

/// Loss-axis grid used by every EELS routine: u in [-3, 12] eV, 0.01 eV channels.
UniformGrid default_loss_grid();

/// Index of the u = 0 channel. Throws GridMismatchError when 0 is not on the grid.
std::size_t zero_index(const UniformGrid& grid);

struct GaussianZlp {
  double fwhm_ev = 0.5;
};

/// Measured profile on its own grid, in loss coordinates.
struct TabulatedZlp {
  GridFunction profile;
};

struct ZLPModel {
  std::variant<GaussianZlp, TabulatedZlp> shape = GaussianZlp{};

  static ZLPModel gaussian(double fwhm_ev) { return {GaussianZlp{fwhm_ev}}; }
  static ZLPModel tabulated(GridFunction profile) { return {TabulatedZlp{std::move(profile)}}; }
};

/// Unit-area zero-loss peak sampled on the grid. Gaussian FWHM must lie in
/// [0.1, 2.0] eV and the grid must reach +-4 FWHM around zero.
GridFunction make_zlp(const UniformGrid& grid, const ZLPModel& model);

/// Linear convolution on a shared grid containing u = 0:
///   (f * g)(u_k) = step * sum_j f(u_j) g(u_k - u_j),
/// cropped to the grid.
GridFunction convolve(const GridFunction& f, const GridFunction& g);

/// Unit-area spike at energy e, split linearly between the two nearest channels.
GridFunction delta_pqp(const UniformGrid& grid, double energy_ev);

/// Resample a photon-energy spectral density onto the loss grid (zero outside
/// its support) and renormalize to unit area.
GridFunction pqp_on_loss_grid(const GridFunction& f_pqp, const UniformGrid& loss_grid);

/// Smallest n_max with a Poisson tail below 1e-6 for every lambda: ceil(lambda + 8 sqrt(lambda) + 8).
std::size_t default_n_max(double lambda);

inline constexpr double poisson_tail_tolerance = 1e-6;

/// w_n = exp(-lambda) lambda^n / n!, n = 0..n_max. Throws TruncationError when
/// the tail beyond n_max exceeds 1e-6.
std::vector<double> poisson_weights(double lambda, std::size_t n_max);

struct EELSModelParams {
  double lambda = 0.0;
  double s = 1.0;          // detection probability
  double p = 1.0;          // interaction probability
  std::size_t n_max = 0;   // 0 picks default_n_max(lambda)

  void validate() const;
  std::size_t resolved_n_max() const { return n_max == 0 ? default_n_max(lambda) : n_max; }
};

struct SimulatedEELS {
  GridFunction density;  // dP/du, 1/eV
  EELSModelParams params;
  double leaked_mass = 0.0;  // probability that fell beyond the grid
};

/// Recorded spectrum
///   dP/du = p sum_n w_n f_n(u) + (1 - p) f_0(u),  f_n = f_{n-1} * f_PQP.
/// The detection probability s is validated and echoed only; it cancels in the
/// unit-area spectrum.
SimulatedEELS forward_eels(const EELSModelParams& params, const GridFunction& f0, const GridFunction& f_pqp);

namespace detail {
/// Full linear convolution of a and b (length a + b - 1) through a real FFT.
std::vector<double> fft_convolve_full(const std::vector<double>& a, const std::vector<double>& b);
}  // namespace detail

}  // namespace cherenkov::eels
