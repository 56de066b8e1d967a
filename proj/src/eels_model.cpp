#include "cherenkov/eels_model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cherenkov/constants.hpp"
#include "cherenkov/errors.hpp"
#include "fft.hpp"

namespace cherenkov::eels {

UniformGrid default_loss_grid() { return UniformGrid::from_step(-3.0, 12.0, 0.01); }

std::size_t zero_index(const UniformGrid& grid) {
  const double r = -grid.start() / grid.step();
  const double ri = std::round(r);
  if (std::abs(r - ri) > 1e-6 || ri < 0.0 || ri >= static_cast<double>(grid.size())) {
    throw GridMismatchError(fmt::format("loss grid starting at {} with step {} has no channel at u = 0",
                                        grid.start(), grid.step()));
  }
  return static_cast<std::size_t>(ri);
}

GridFunction make_zlp(const UniformGrid& grid, const ZLPModel& model) {
  GridFunction out(grid);
  if (const auto* g = std::get_if<GaussianZlp>(&model.shape)) {
    if (!(g->fwhm_ev >= 0.1 && g->fwhm_ev <= 2.0)) {
      throw RangeError(fmt::format("Gaussian ZLP FWHM {} eV outside [0.1, 2.0]", g->fwhm_ev));
    }
    if (grid.start() > -4.0 * g->fwhm_ev || grid.back() < 4.0 * g->fwhm_ev) {
      throw RangeError(fmt::format("loss grid [{}, {}] does not cover +-4 FWHM of a {} eV ZLP", grid.start(),
                                   grid.back(), g->fwhm_ev));
    }
    const double sigma = g->fwhm_ev / constants::fwhm_per_sigma;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double u = grid[i];
      out.values[i] = std::exp(-0.5 * u * u / (sigma * sigma));
    }
  } else {
    const auto& prof = std::get<TabulatedZlp>(model.shape).profile;
    out = resample(prof, grid);
    for (auto& v : out.values) v = std::max(0.0, v);
  }
  const double area = out.integral();
  if (!(area > 0.0)) throw DegenerateSpectrumError("ZLP has no area on the loss grid");
  out *= 1.0 / area;
  return out;
}

GridFunction convolve(const GridFunction& f, const GridFunction& g) {
  if (!f.grid.same_as(g.grid)) throw GridMismatchError("convolve: operands live on different grids");
  const std::size_t z = zero_index(f.grid);
  const auto full = detail::fft_convolve_full(f.values, g.values);
  GridFunction out(f.grid);
  for (std::size_t k = 0; k < out.size(); ++k) out.values[k] = f.step() * full[k + z];
  return out;
}

GridFunction delta_pqp(const UniformGrid& grid, double energy_ev) {
  if (!grid.contains(energy_ev)) throw RangeError(fmt::format("delta at {} eV lies outside the grid", energy_ev));
  GridFunction out(grid);
  const double t = (energy_ev - grid.start()) / grid.step();
  auto i = static_cast<std::size_t>(std::floor(t));
  double w = t - static_cast<double>(i);
  if (w < 1e-9) w = 0.0;
  if (w > 1.0 - 1e-9) {
    ++i;
    w = 0.0;
  }
  if (i >= grid.size()) i = grid.size() - 1;
  out.values[i] = (1.0 - w) / grid.step();
  if (w > 0.0) out.values[i + 1] = w / grid.step();
  return out;
}

GridFunction pqp_on_loss_grid(const GridFunction& f_pqp, const UniformGrid& loss_grid) {
  auto out = resample(f_pqp, loss_grid);
  const double area = out.integral();
  if (!(area > 0.0)) throw DegenerateSpectrumError("f_PQP has no support on the loss grid");
  out *= 1.0 / area;
  return out;
}

std::size_t default_n_max(double lambda) {
  if (!(lambda >= 0.0)) throw RangeError("lambda must be non-negative");
  return static_cast<std::size_t>(std::ceil(lambda + 8.0 * std::sqrt(lambda) + 8.0));
}

std::vector<double> poisson_weights(double lambda, std::size_t n_max) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw RangeError("lambda must be finite and non-negative");
  std::vector<double> w(n_max + 1, 0.0);
  if (lambda == 0.0) {
    w[0] = 1.0;
    return w;
  }
  double sum = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) {
    const double dn = static_cast<double>(n);
    w[n] = std::exp(-lambda + dn * std::log(lambda) - std::lgamma(dn + 1.0));
    sum += w[n];
  }
  if (1.0 - sum > poisson_tail_tolerance) {
    throw TruncationError(
        fmt::format("Poisson tail {:.3g} beyond n_max = {} exceeds {} for lambda = {}", 1.0 - sum, n_max,
                    poisson_tail_tolerance, lambda));
  }
  return w;
}

void EELSModelParams::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw RangeError("lambda must be finite and non-negative");
  if (!(s >= 0.0 && s <= 1.0)) throw RangeError("detection probability s must lie in [0, 1]");
  if (!(p >= 0.0 && p <= 1.0)) throw RangeError("interaction probability p must lie in [0, 1]");
}

SimulatedEELS forward_eels(const EELSModelParams& params, const GridFunction& f0, const GridFunction& f_pqp) {
  params.validate();
  if (!f0.grid.same_as(f_pqp.grid)) throw GridMismatchError("forward_eels: f0 and f_PQP grids differ");
  const std::size_t n_max = params.resolved_n_max();
  const auto w = poisson_weights(params.lambda, n_max);
  const std::size_t m = f0.size();
  const std::size_t z = zero_index(f0.grid);
  const double step = f0.step();

  SimulatedEELS out{GridFunction(f0.grid), params, 0.0};
  out.params.n_max = n_max;

  const double c0 = 1.0 - params.p * (1.0 - w[0]);
  for (std::size_t k = 0; k < m; ++k) out.density.values[k] = c0 * f0.values[k];

  if (params.p > 0.0 && params.lambda > 0.0) {
    // f_PQP rotated to put u = 0 at index 0, padded to (n_max + 1) m points.
    const std::size_t len = fft::next_pow2((n_max + 1) * m);
    std::vector<double> pqp(len, 0.0);
    for (std::size_t i = 0; i < m; ++i) pqp[(i + len - z) % len] = step * f_pqp.values[i];
    const auto a = fft::forward(f0.values, len);
    const auto b = fft::forward(pqp, len);
    std::vector<fft::Complex> acc(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) {
      // Horner: sum_{n>=1} w_n b^n.
      fft::Complex s = 0.0;
      for (std::size_t n = n_max; n >= 1; --n) s = (s + w[n]) * b[k];
      acc[k] = a[k] * s;
    }
    const auto lobes = fft::inverse(acc, len);
    for (std::size_t k = 0; k < m; ++k) out.density.values[k] += params.p * lobes[k];
  }
  for (auto& v : out.density.values) {
    if (v < 0.0 && v > -1e-13) v = 0.0;
  }
  out.leaked_mass = 1.0 - out.density.integral();
  return out;
}

}  // namespace cherenkov::eels
