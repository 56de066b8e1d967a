#include "cherenkov/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cherenkov/constants.hpp"
#include "cherenkov/errors.hpp"
#include "cherenkov/parallel.hpp"

namespace cherenkov::spectrum {

using constants::hbar_c_ev_nm;
using constants::pi;

void BeamGeometry::validate() const {
  if (!(x0_nm > 0.0) || !std::isfinite(x0_nm)) throw RangeError("impact parameter must be positive");
  if (!(sigma_nm >= 0.0)) throw RangeError("beam sigma must be non-negative");
  if (!(leff_um > 0.0) || !(leff_um <= lmax_um)) throw RangeError("need 0 < L_eff <= L_max");
}

UniformGrid default_energy_grid() { return UniformGrid::from_step(1.4, 3.4, 0.01); }

namespace {

// Adaptive Simpson on one panel. fa, fm, fb are the end and midpoint values.
template <typename F>
double simpson_refine(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                      int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double h = b - a;
  const double left = h / 12.0 * (fa + 4.0 * flm + fm);
  const double right = h / 12.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson over [a, b]: a uniform panel pass sets the scale, then every
// panel refines to its share of rel_tol * |integral|.
template <typename F>
double adaptive_simpson(const F& f, double a, double b, double rel_tol, std::size_t panels) {
  const double h = (b - a) / static_cast<double>(panels);
  std::vector<double> nodes(2 * panels + 1);
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = f(a + 0.5 * h * static_cast<double>(i));
  std::vector<double> coarse(panels);
  double total = 0.0, total_abs = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    coarse[p] = h / 6.0 * (nodes[2 * p] + 4.0 * nodes[2 * p + 1] + nodes[2 * p + 2]);
    total += coarse[p];
    total_abs += std::abs(coarse[p]);
  }
  if (total_abs == 0.0) return 0.0;
  const double tol = rel_tol * std::max(std::abs(total), 1e-3 * total_abs) / static_cast<double>(panels);
  double acc = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    acc += simpson_refine(f, lo, lo + h, nodes[2 * p], nodes[2 * p + 1], nodes[2 * p + 2], coarse[p], tol, 40);
  }
  return acc;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

}  // namespace

double field_decay_constant(double energy_ev, const ElectronKinematics& kin) {
  const double k0 = energy_ev / hbar_c_ev_nm;
  return k0 / (kin.beta * kin.gamma);
}

double loss_density_at(const dispersion::ResolvedStack& resolved, const ElectronKinematics& kin, double x0_nm,
                       double leff_um, const SpectrumOptions& options) {
  const double e = resolved.energy_ev;
  const double k0 = e / hbar_c_ev_nm;
  const double q = kin.line_k(e);
  const double kappa_max = options.kappa_cutoff / x0_nm;
  const double kpar_max = std::sqrt(kappa_max * kappa_max + k0 * k0);
  if (kpar_max <= q) return 0.0;

  // k_par = q cosh t, k_y = q sinh t, dk_y = k_par dt.
  const double t_max = std::acosh(kpar_max / q);
  auto integrand = [&](double t) {
    const double kpar = q * std::cosh(t);
    const double kappa = std::sqrt(std::max(0.0, kpar * kpar - k0 * k0));
    const double im_rp = dispersion::reflection_coefficient_p(resolved, kpar).imag();
    return (kappa / kpar) * im_rp * std::exp(-2.0 * kappa * x0_nm);
  };
  const double integral = adaptive_simpson(integrand, 0.0, t_max, options.rel_tol, options.initial_panels);
  const double length_nm = leff_um * 1e3;
  const double prefactor = 2.0 * constants::alpha * length_nm / (pi * kin.beta * kin.beta * hbar_c_ev_nm);
  return options.calibration * prefactor * integral;
}

LossSpectrum loss_density(const materials::LayerStack& stack, const ElectronKinematics& kin, const BeamGeometry& beam,
                          const UniformGrid& e_grid, const SpectrumOptions& options) {
  beam.validate();
  LossSpectrum out{GridFunction(e_grid), kin, beam, stack.hash(), options.calibration};
  parallel_for(e_grid.size(), options.threads, [&](std::size_t i) {
    const auto resolved = dispersion::resolve(stack, e_grid[i]);
    out.density.values[i] = loss_density_at(resolved, kin, beam.x0_nm, beam.leff_um, options);
  });
  return out;
}

GridFunction spectral_density(const LossSpectrum& spec) {
  const double lambda = spec.lambda();
  if (!(lambda > 0.0)) throw DegenerateSpectrumError("spectral density of a spectrum with lambda = 0");
  GridFunction f = spec.density;
  f *= 1.0 / lambda;
  return f;
}

CouplingResult coupling_strength(const LossSpectrum& spec) {
  CouplingResult r;
  r.lambda = spec.lambda();
  r.g_qu = std::sqrt(r.lambda);
  const double peak = spec.density.grid[spec.density.argmax()];
  r.kappa_peak = field_decay_constant(peak, spec.kin);
  return r;
}

CouplingSurface coupling_scaling(const materials::LayerStack& stack, const ElectronKinematics& kin,
                                 const BeamGeometry& beam, const CouplingSweep& sweep, const UniformGrid& e_grid,
                                 const SpectrumOptions& options) {
  if (sweep.x0_nm.empty() || sweep.leff_um.empty()) throw RangeError("coupling sweep needs x0 and L_eff values");
  for (double x : sweep.x0_nm) {
    if (!(x > 0.0)) throw RangeError("sweep impact parameters must be positive");
  }
  for (double l : sweep.leff_um) {
    if (!(l > 0.0)) throw RangeError("sweep interaction lengths must be positive");
  }
  const std::size_t nx = sweep.x0_nm.size(), nl = sweep.leff_um.size();
  CouplingSurface s;
  s.x0_nm = sweep.x0_nm;
  s.leff_um = sweep.leff_um;
  s.g.assign(nx, std::vector<double>(nl, 0.0));
  s.kappa_peak.assign(nx, 0.0);
  s.spectra_first_leff.resize(nx);

  auto inner = options;
  inner.threads = 1;
  parallel_for(nx * nl, options.threads, [&](std::size_t idx) {
    const std::size_t ix = idx / nl, il = idx % nl;
    BeamGeometry b = beam;
    b.x0_nm = sweep.x0_nm[ix];
    b.leff_um = sweep.leff_um[il];
    b.lmax_um = std::max(b.lmax_um, b.leff_um);
    auto spec = loss_density(stack, kin, b, e_grid, inner);
    const auto c = coupling_strength(spec);
    s.g[ix][il] = c.g_qu;
    if (il == 0) {
      s.kappa_peak[ix] = c.kappa_peak;
      s.spectra_first_leff[ix] = std::move(spec);
    }
  });

  for (std::size_t il = 0; il < nl; ++il) {
    std::vector<double> lg(nx);
    for (std::size_t ix = 0; ix < nx; ++ix) lg[ix] = std::log(s.g[ix][il]);
    s.semilog_slope_x0.push_back(nx > 1 ? fit_slope(s.x0_nm, lg) : 0.0);
  }
  std::vector<double> ll(nl);
  for (std::size_t il = 0; il < nl; ++il) ll[il] = std::log(s.leff_um[il]);
  for (std::size_t ix = 0; ix < nx; ++ix) {
    std::vector<double> lg(nl);
    for (std::size_t il = 0; il < nl; ++il) lg[il] = std::log(s.g[ix][il]);
    s.loglog_slope_leff.push_back(nl > 1 ? fit_slope(ll, lg) : 0.0);
  }
  return s;
}

CouplingResult average_over_beam(const materials::LayerStack& stack, const ElectronKinematics& kin,
                                 const BeamGeometry& beam, const UniformGrid& e_grid, const SpectrumOptions& options,
                                 std::size_t nodes) {
  if (!(beam.x0_nm > 0.0)) throw RangeError("average_over_beam: impact parameter must be positive");
  if (!(beam.sigma_nm >= 0.0)) throw RangeError("average_over_beam: sigma must be non-negative");
  const auto centroid = coupling_strength(loss_density(stack, kin, beam, e_grid, options));
  if (beam.sigma_nm == 0.0) return centroid;
  nodes = std::max<std::size_t>(nodes, 33);
  if (nodes % 2 == 0) ++nodes;

  const double lo = std::max(beam_min_distance_nm, beam.x0_nm - 6.0 * beam.sigma_nm);
  const double hi = beam.x0_nm + 6.0 * beam.sigma_nm;
  if (!(hi > lo)) throw RangeError("average_over_beam: beam lies entirely inside the surface exclusion zone");

  const UniformGrid xs = UniformGrid::linspace(lo, hi, nodes);
  std::vector<double> g(nodes), w(nodes);
  auto inner = options;
  inner.threads = 1;
  parallel_for(nodes, options.threads, [&](std::size_t i) {
    BeamGeometry b = beam;
    b.x0_nm = xs[i];
    g[i] = coupling_strength(loss_density(stack, kin, b, e_grid, inner)).g_qu;
    const double z = (xs[i] - beam.x0_nm) / beam.sigma_nm;
    const double trap = (i == 0 || i + 1 == nodes) ? 0.5 : 1.0;
    w[i] = trap * std::exp(-0.5 * z * z);
  });
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    num += w[i] * g[i];
    den += w[i];
  }
  CouplingResult r;
  r.g_qu = num / den;
  r.lambda = r.g_qu * r.g_qu;
  r.kappa_peak = centroid.kappa_peak;
  return r;
}

GridFunction gaussian_smooth(const GridFunction& f, double fwhm_ev) {
  if (fwhm_ev < 0.0) throw RangeError("negative smoothing width");
  if (fwhm_ev == 0.0) return f;
  const double sigma = fwhm_ev / constants::fwhm_per_sigma;
  const double dx = f.step();
  const auto half = static_cast<std::ptrdiff_t>(std::ceil(6.0 * sigma / dx));
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  double area = 0.0;
  for (std::ptrdiff_t m = -half; m <= half; ++m) {
    const double x = static_cast<double>(m) * dx;
    kernel[static_cast<std::size_t>(m + half)] = std::exp(-0.5 * x * x / (sigma * sigma));
    area += kernel[static_cast<std::size_t>(m + half)] * dx;
  }
  for (auto& k : kernel) k /= area;
  GridFunction out(f.grid);
  const auto n = static_cast<std::ptrdiff_t>(f.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t m = -half; m <= half; ++m) {
      const std::ptrdiff_t j = i - m;
      if (j >= 0 && j < n) acc += f.values[static_cast<std::size_t>(j)] * kernel[static_cast<std::size_t>(m + half)];
    }
    out.values[static_cast<std::size_t>(i)] = acc * dx;
  }
  return out;
}

LossSpectrum sp_reference_spectrum(const materials::LayerStack& stack, double sub_threshold_kev, double zlp_fwhm_ev,
                                   const BeamGeometry& beam, const UniformGrid& e_grid,
                                   const SpectrumOptions& options) {
  const auto kin = dispersion::electron_kinematics(sub_threshold_kev);
  dispersion::DispersionGrids dg;
  dg.e_min = e_grid.start();
  dg.e_max = e_grid.back();
  dg.e_points = std::max<std::size_t>(2, std::min<std::size_t>(e_grid.size(), 201));
  const auto ridge = dispersion::extract_ridge(dispersion::dispersion_map(stack, dg.k_grid(), dg.e_grid(),
                                                                          options.threads));
  for (const auto& p : ridge.points) {
    if (p.present && p.k_per_nm >= kin.line_k(p.energy_ev)) {
      throw ThresholdWarning(fmt::format("{} keV electron phase-matches the guided mode at {:.3f} eV; the reference "
                                         "would not isolate the surface plasmon",
                                         sub_threshold_kev, p.energy_ev));
    }
  }
  auto spec = loss_density(stack, kin, beam, e_grid, options);
  spec.density = gaussian_smooth(spec.density, zlp_fwhm_ev);
  return spec;
}

GridFunction frank_tamm_3d(const materials::DielectricModel& medium, const ElectronKinematics& kin,
                           const UniformGrid& e_grid) {
  GridFunction out(e_grid);
  for (std::size_t i = 0; i < e_grid.size(); ++i) {
    const auto eps = materials::evaluate_permittivity(medium, e_grid[i]);
    if (std::abs(eps.imag()) > 1e-9 * std::max(1.0, std::abs(eps))) {
      throw UnsupportedInputError(fmt::format("Frank-Tamm reference needs a transparent medium; Im eps = {} at {} eV",
                                              eps.imag(), e_grid[i]));
    }
    if (eps.real() <= 0.0) continue;
    const double bn = kin.beta * std::sqrt(eps.real());
    if (bn > 1.0) out.values[i] = constants::alpha / hbar_c_ev_nm * (1.0 - 1.0 / (bn * bn));
  }
  return out;
}

PeakShape analyze_peak(const GridFunction& f) {
  PeakShape s;
  const std::size_t im = f.argmax();
  const double dx = f.step();
  s.peak_value = f.values[im];
  s.peak_energy_ev = f.grid[im];
  if (im > 0 && im + 1 < f.size()) {
    const double ym = f.values[im - 1], y0 = f.values[im], yp = f.values[im + 1];
    const double den = ym - 2.0 * y0 + yp;
    if (den < 0.0) s.peak_energy_ev += std::clamp(0.5 * (ym - yp) / den, -0.5, 0.5) * dx;
  }
  const double half = 0.5 * s.peak_value;
  double lo_x = f.grid.start(), hi_x = f.grid.back();
  for (std::size_t i = im; i-- > 0;) {
    if (f.values[i] <= half) {
      const double t = (half - f.values[i]) / (f.values[i + 1] - f.values[i]);
      lo_x = f.grid[i] + t * dx;
      break;
    }
  }
  for (std::size_t i = im + 1; i < f.size(); ++i) {
    if (f.values[i] <= half) {
      const double t = (f.values[i - 1] - half) / (f.values[i - 1] - f.values[i]);
      hi_x = f.grid[i - 1] + t * dx;
      break;
    }
  }
  s.half_width_low = s.peak_energy_ev - lo_x;
  s.half_width_high = hi_x - s.peak_energy_ev;
  return s;
}

}  // namespace cherenkov::spectrum
