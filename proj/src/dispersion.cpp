#include "cherenkov/dispersion.hpp"

#include <cmath>

#include <fmt/format.h>

#include "cherenkov/constants.hpp"
#include "cherenkov/errors.hpp"
#include "cherenkov/parallel.hpp"

namespace cherenkov::dispersion {

using constants::hbar_c_ev_nm;

double ElectronKinematics::line_k(double energy_ev) const { return energy_ev / (hbar_c_ev_nm * beta); }

ElectronKinematics electron_kinematics(double kinetic_kev) {
  if (!(kinetic_kev > 0.0) || !std::isfinite(kinetic_kev)) {
    throw RangeError(fmt::format("electron kinetic energy must be positive, got {} keV", kinetic_kev));
  }
  const double gamma = 1.0 + kinetic_kev / constants::electron_rest_kev;
  const double beta = std::sqrt(1.0 - 1.0 / (gamma * gamma));
  return {kinetic_kev, beta, gamma};
}

Complex normal_wavevector(Complex eps, double k0, double k_par) {
  Complex kz = std::sqrt(eps * (k0 * k0) - Complex(k_par * k_par, 0.0));
  if (kz.imag() < 0.0 || (kz.imag() == 0.0 && kz.real() < 0.0)) kz = -kz;
  return kz;
}

ResolvedStack resolve(const materials::LayerStack& stack, double energy_ev) {
  ResolvedStack r;
  r.energy_ev = energy_ev;
  r.eps.reserve(stack.layers.size() + 2);
  r.eps.push_back(materials::evaluate_permittivity(stack.superstrate, energy_ev));
  for (const auto& l : stack.layers) {
    r.eps.push_back(materials::evaluate_permittivity(l.material, energy_ev));
    r.thickness_nm.push_back(l.thickness_nm);
  }
  r.eps.push_back(materials::evaluate_permittivity(stack.substrate, energy_ev));
  return r;
}

namespace {

// Fresnel p coefficient for the interface between media i and j.
Complex interface_rp(Complex eps_i, Complex kz_i, Complex eps_j, Complex kz_j) {
  const Complex num = eps_j * kz_i - eps_i * kz_j;
  const Complex den = eps_j * kz_i + eps_i * kz_j;
  if (num == 0.0) return 0.0;
  return num / den;
}

}  // namespace

Complex reflection_coefficient_p(const ResolvedStack& s, double k_par) {
  const double k0 = s.energy_ev / hbar_c_ev_nm;
  const std::size_t media = s.eps.size();
  std::vector<Complex> kz(media);
  for (std::size_t i = 0; i < media; ++i) kz[i] = normal_wavevector(s.eps[i], k0, k_par);

  const Complex iu{0.0, 1.0};
  Complex r = interface_rp(s.eps[media - 2], kz[media - 2], s.eps[media - 1], kz[media - 1]);
  for (std::size_t i = media - 2; i-- > 0;) {
    const Complex r_top = interface_rp(s.eps[i], kz[i], s.eps[i + 1], kz[i + 1]);
    const Complex phase = std::exp(2.0 * iu * kz[i + 1] * s.thickness_nm[i]);
    r = (r_top + r * phase) / (1.0 + r_top * r * phase);
  }
  return r;
}

Complex reflection_coefficient_p(const materials::LayerStack& stack, double k_par, double energy_ev) {
  if (!(k_par >= 0.0)) throw RangeError("k_par must be non-negative");
  return reflection_coefficient_p(resolve(stack, energy_ev), k_par);
}

Complex reflection_coefficient_p_matrix(const ResolvedStack& s, double k_par) {
  // Forward/backward magnetic-field amplitudes; interface matching of H_y and
  // E_x = (k_z / eps) (a - b).
  const double k0 = s.energy_ev / hbar_c_ev_nm;
  const std::size_t media = s.eps.size();
  const Complex iu{0.0, 1.0};
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
  for (std::size_t i = 0; i + 1 < media; ++i) {
    const Complex eta_i = normal_wavevector(s.eps[i], k0, k_par) / s.eps[i];
    const Complex kz_j = normal_wavevector(s.eps[i + 1], k0, k_par);
    const Complex ratio = (kz_j / s.eps[i + 1]) / eta_i;
    Eigen::Matrix2cd d;
    d << 0.5 * (1.0 + ratio), 0.5 * (1.0 - ratio), 0.5 * (1.0 - ratio), 0.5 * (1.0 + ratio);
    m = m * d;
    if (i + 1 < media - 1) {
      const double thick = s.thickness_nm[i];
      Eigen::Matrix2cd p;
      p << std::exp(-iu * kz_j * thick), 0.0, 0.0, std::exp(iu * kz_j * thick);
      m = m * p;
    }
  }
  return m(1, 0) / m(0, 0);
}

DispersionMap dispersion_map(const materials::LayerStack& stack, const UniformGrid& k_grid, const UniformGrid& e_grid,
                             unsigned threads) {
  DispersionMap map{k_grid, e_grid, Eigen::MatrixXd(e_grid.size(), k_grid.size())};
  parallel_for(e_grid.size(), threads, [&](std::size_t i) {
    const auto resolved = resolve(stack, e_grid[i]);
    for (std::size_t j = 0; j < k_grid.size(); ++j) {
      map.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          reflection_coefficient_p(resolved, k_grid[j]).imag();
    }
  });
  return map;
}

bool ModeRidge::empty() const { return present_count() == 0; }

std::size_t ModeRidge::present_count() const {
  std::size_t n = 0;
  for (const auto& p : points) n += p.present ? 1 : 0;
  return n;
}

std::optional<double> ModeRidge::k_at(double energy_ev) const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!p.present) continue;
    if (std::abs(p.energy_ev - energy_ev) <= 1e-12 * std::max(1.0, energy_ev)) return p.k_per_nm;
    if (i + 1 < points.size() && points[i + 1].present && energy_ev > p.energy_ev &&
        energy_ev < points[i + 1].energy_ev) {
      const auto& q = points[i + 1];
      const double t = (energy_ev - p.energy_ev) / (q.energy_ev - p.energy_ev);
      return (1.0 - t) * p.k_per_nm + t * q.k_per_nm;
    }
  }
  return std::nullopt;
}

ModeRidge extract_ridge(const DispersionMap& map, double noise_floor) {
  ModeRidge ridge;
  const auto nk = static_cast<Eigen::Index>(map.k_grid.size());
  ridge.points.reserve(map.e_grid.size());
  for (Eigen::Index i = 0; i < map.values.rows(); ++i) {
    RidgePoint pt;
    pt.energy_ev = map.e_grid[static_cast<std::size_t>(i)];
    // Strict '>' keeps the smallest k on ties.
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < nk; ++j) {
      if (map.values(i, j) > map.values(i, best)) best = j;
    }
    pt.max_value = map.values(i, best);
    pt.present = pt.max_value >= noise_floor;
    double k = map.k_grid[static_cast<std::size_t>(best)];
    if (best > 0 && best + 1 < nk) {
      const double ym = map.values(i, best - 1), y0 = map.values(i, best), yp = map.values(i, best + 1);
      const double denom = ym - 2.0 * y0 + yp;
      if (denom < 0.0) {
        const double shift = 0.5 * (ym - yp) / denom;
        k += std::clamp(shift, -0.5, 0.5) * map.k_grid.step();
      }
    }
    pt.k_per_nm = k;
    ridge.points.push_back(pt);
  }
  return ridge;
}

PhaseMatchResult phase_match(const ModeRidge& ridge, const ElectronKinematics& kin, double tolerance_ev) {
  if (ridge.empty()) throw BelowThresholdError("phase_match: ridge is empty");
  auto mismatch = [&](double e, double k) { return k - kin.line_k(e); };
  const auto& pts = ridge.points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!pts[i].present) continue;
    const double f0 = mismatch(pts[i].energy_ev, pts[i].k_per_nm);
    if (f0 == 0.0) {
      return {pts[i].energy_ev, pts[i].k_per_nm, pts[i].energy_ev / (hbar_c_ev_nm * pts[i].k_per_nm)};
    }
    if (i + 1 >= pts.size() || !pts[i + 1].present) continue;
    const double f1 = mismatch(pts[i + 1].energy_ev, pts[i + 1].k_per_nm);
    if ((f0 < 0.0) == (f1 < 0.0)) continue;
    // Bisection on the piecewise-linear ridge.
    double lo = pts[i].energy_ev, hi = pts[i + 1].energy_ev, flo = f0;
    while (hi - lo > tolerance_ev) {
      const double mid = 0.5 * (lo + hi);
      const double fm = mismatch(mid, *ridge.k_at(mid));
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    const double e = 0.5 * (lo + hi);
    const double k = *ridge.k_at(e);
    return {e, k, e / (hbar_c_ev_nm * k)};
  }
  throw BelowThresholdError(
      fmt::format("{} keV electron (beta={:.5f}) never reaches the ridge phase velocity", kin.kinetic_kev, kin.beta));
}

double emission_angle(double energy_ev, const ModeRidge& ridge, const ElectronKinematics& kin) {
  const auto k = ridge.k_at(energy_ev);
  if (!k) throw RangeError(fmt::format("ridge not defined at {} eV", energy_ev));
  const double vp = energy_ev / (hbar_c_ev_nm * *k);
  const double ratio = vp / kin.beta;
  if (ratio > 1.0 + 1e-12) {
    throw BelowThresholdError(fmt::format("phase velocity {:.5f} c exceeds electron velocity at {} eV", vp, energy_ev));
  }
  return std::acos(std::min(1.0, ratio));
}

}  // namespace cherenkov::dispersion
