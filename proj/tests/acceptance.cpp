// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cherenkov/constants.hpp"
#include "cherenkov/dispersion.hpp"
#include "cherenkov/eels_model.hpp"
#include "cherenkov/inversion.hpp"
#include "cherenkov/quantum.hpp"
#include "cherenkov/spectrum.hpp"

using namespace cherenkov;
using Complex = std::complex<double>;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double poisson(double lambda, std::size_t n) {
  return std::exp(-lambda + static_cast<double>(n) * std::log(lambda) - std::lgamma(static_cast<double>(n) + 1.0));
}

Outcome redshift() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto stack = materials::build_experiment_stack();
  std::vector<double> peaks;
  for (double t : {93.0, 120.0, 160.0, 200.0}) {
    const auto spec = spectrum::loss_density(stack, dispersion::electron_kinematics(t), {},
                                             spectrum::default_energy_grid());
    peaks.push_back(spectrum::analyze_peak(spec.density).peak_energy_ev);
  }
  const double secs = seconds_since(t0);
  bool ok = secs < 120.0;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    if (peaks[i] < 2.03 || peaks[i] > 2.35) ok = false;
    if (i > 0 && !(peaks[i] < peaks[i - 1])) ok = false;
  }
  return {ok, fmt::format("peaks at 93/120/160/200 keV = {:.4f}, {:.4f}, {:.4f}, {:.4f} eV; window [2.03, 2.35]; {:.1f} s",
                          peaks[0], peaks[1], peaks[2], peaks[3], secs)};
}

Outcome coupling_range() {
  const auto stack = materials::build_experiment_stack();
  const spectrum::CouplingSweep sweep{{20, 30, 40, 50, 60, 70, 80, 90, 100}, {10, 25, 50, 100, 150, 200, 250}};
  const auto surf = spectrum::coupling_scaling(stack, dispersion::electron_kinematics(200.0), {}, sweep,
                                               spectrum::default_energy_grid());
  double gmin = 1e300, gmax = 0.0;
  for (const auto& row : surf.g) {
    for (double g : row) {
      gmin = std::min(gmin, g);
      gmax = std::max(gmax, g);
    }
  }
  const bool spans = gmin <= 0.5 && gmax >= 1.0;
  double worst_loglog = 0.0;
  for (double s : surf.loglog_slope_leff) worst_loglog = std::max(worst_loglog, std::abs(s - 0.5));
  double kappa = 0.0;
  for (double k : surf.kappa_peak) kappa += k;
  kappa /= static_cast<double>(surf.kappa_peak.size());
  double worst_semilog = 0.0, semilog = 0.0;
  for (double s : surf.semilog_slope_x0) {
    const double rel = std::abs(s - (-kappa)) / kappa;
    if (rel >= worst_semilog) {
      worst_semilog = rel;
      semilog = s;
    }
  }
  const bool ok = spans && worst_loglog <= 0.01 && worst_semilog <= 0.05;
  return {ok, fmt::format("g_qu in [{:.3f}, {:.3f}] (covers [0.5, 1.0]: {}); log-log slope max |s - 0.5| = {:.2e}; "
                          "semilog slope {:.5f} /nm vs -kappa_peak {:.5f} /nm ({:.1f}% off, tolerance 5%)",
                          gmin, gmax, spans ? "yes" : "no", worst_loglog, semilog, -kappa, 100.0 * worst_semilog)};
}

Outcome forward_model() {
  const auto grid = eels::default_loss_grid();
  const auto out = eels::forward_eels({1.0, 1.0, 1.0, 0}, eels::delta_pqp(grid, 0.0), eels::delta_pqp(grid, 2.1));
  const double expected[] = {0.36788, 0.36788, 0.18394, 0.06131};
  double worst = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    const double lo = (static_cast<double>(n) - 0.5) * 2.1;
    worst = std::max(worst, std::abs(out.density.integral(lo, lo + 2.1) - expected[n]));
  }

  const auto smooth = eels::forward_eels({1.0, 1.0, 1.0, 0}, eels::make_zlp(grid, eels::ZLPModel::gaussian(0.5)),
                                         eels::delta_pqp(grid, 2.1));
  std::vector<double> peaks;
  const auto& v = smooth.density.values;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > 1e-3 * v[smooth.density.argmax()]) peaks.push_back(grid[i]);
  }
  double worst_spacing = 0.0;
  for (std::size_t k = 1; k < peaks.size(); ++k) worst_spacing = std::max(worst_spacing, std::abs(peaks[k] - peaks[k - 1] - 2.1));
  const bool ok = worst <= 1e-4 && peaks.size() >= 3 && worst_spacing <= 0.01 + 1e-12;
  return {ok, fmt::format("max lobe-area error {:.2e}; {} resolved peaks; max spacing error {:.4f} eV", worst,
                          peaks.size(), worst_spacing)};
}

Outcome fit_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto stack = materials::build_experiment_stack();
  const auto loss = eels::default_loss_grid();
  const auto zlp = eels::make_zlp(loss, eels::ZLPModel::gaussian(0.5));
  const auto family = inversion::PqpFamily::compute(stack, dispersion::electron_kinematics(200.0), {},
                                                    UniformGrid::from_step(5.0, 200.0, 2.5),
                                                    spectrum::default_energy_grid(), loss);
  bool ok = true;
  std::string detail;
  for (double lambda : {0.3, 1.0, 2.0}) {
    auto meas = eels::forward_eels({lambda, 1.0, 0.7, 0}, zlp, family.at(40.0)).density;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 0.01);
    for (auto& x : meas.values) x = std::max(0.0, x * (1.0 + n(rng)));
    const auto a = inversion::fit_quantum_coupling(meas, family, zlp);
    const auto b = inversion::fit_quantum_coupling(meas, family, zlp);
    const bool same = a.lambda_hat == b.lambda_hat && a.sp_hat == b.sp_hat && a.x0_hat_nm == b.x0_hat_nm;
    const double rel = std::abs(a.lambda_hat - lambda) / lambda;
    const bool this_ok = rel <= 0.02 && std::abs(a.x0_hat_nm - 40.0) <= 10.0 && same;
    ok = ok && this_ok;
    detail += fmt::format("lambda {} -> {:.4f} ({:.2f}%), x0 {:.1f} nm, sp {:.4f}{}; ", lambda, a.lambda_hat,
                          100.0 * rel, a.x0_hat_nm, a.sp_hat, same ? "" : ", NOT deterministic");
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 300.0;
  return {ok, detail + fmt::format("{:.1f} s", secs)};
}

Outcome quantum_regimes() {
  const Complex g(1.0, 0.0);
  const auto rho1 = quantum::photon_marginal(quantum::simulate(g, quantum::ElectronPreparation::single_rung()));
  double diag_err = 0.0;
  for (Eigen::Index n = 0; n < rho1.rows(); ++n) {
    diag_err = std::max(diag_err, std::abs(rho1(n, n).real() - poisson(1.0, static_cast<std::size_t>(n))));
  }
  const double off1 = quantum::max_off_diagonal(rho1);
  const auto rho32 = quantum::photon_marginal(quantum::simulate(g, quantum::ElectronPreparation::flat_comb(32)));
  const double fid = quantum::best_coherent_fit(rho32, 1.0).fidelity;
  const double pur32 = quantum::purity(rho32);
  bool monotone = true;
  double last = 0.0;
  for (std::size_t k : {1u, 2u, 4u, 8u, 16u, 32u}) {
    const double p = quantum::purity(quantum::photon_marginal(quantum::simulate(g, quantum::ElectronPreparation::flat_comb(k))));
    if (p < last) monotone = false;
    last = p;
  }
  const auto s = quantum::build_scattering_matrix(g, 30, 17);
  const auto d = s.dense();
  const Eigen::MatrixXcd sds = d.adjoint() * d;
  const auto& t = s.truncation();
  double unitarity = 0.0;
  for (std::size_t j1 = 4; j1 + 4 < t.rungs; ++j1) {
    for (std::size_t n1 = 4; n1 + 4 <= t.photons; ++n1) {
      for (std::size_t j2 = 4; j2 + 4 < t.rungs; ++j2) {
        for (std::size_t n2 = 4; n2 + 4 <= t.photons; ++n2) {
          const auto a = static_cast<Eigen::Index>(t.index(j1, n1)), b = static_cast<Eigen::Index>(t.index(j2, n2));
          unitarity = std::max(unitarity, std::abs(sds(a, b) - (a == b ? 1.0 : 0.0)));
        }
      }
    }
  }
  const bool ok = off1 < 1e-10 && diag_err < 1e-6 && fid >= 0.9 && pur32 > 0.8 && monotone && unitarity < 1e-8;
  return {ok, fmt::format("K=1 off-diagonal {:.1e}, Poisson error {:.1e}; K=32 fidelity {:.4f}, purity {:.4f}; "
                          "purity monotone: {}; interior unitarity error {:.1e}",
                          off1, diag_err, fid, pur32, monotone ? "yes" : "no", unitarity)};
}

Complex fresnel_rp(Complex n2, Complex sin1) {
  const Complex cos1 = std::sqrt(1.0 - sin1 * sin1);
  const Complex sin2 = sin1 / n2;
  Complex cos2 = std::sqrt(1.0 - sin2 * sin2);
  if (cos2.imag() < 0.0) cos2 = -cos2;
  return (n2 * cos1 - cos2) / (n2 * cos1 + cos2);
}

// Empty when the partial-wave series does not converge.
std::optional<Complex> film_series(Complex eps1, Complex eps2, double d, double k0, double kpar) {
  const Complex kz0 = dispersion::normal_wavevector(1.0, k0, kpar);
  const Complex kz1 = dispersion::normal_wavevector(eps1, k0, kpar);
  const Complex kz2 = dispersion::normal_wavevector(eps2, k0, kpar);
  auto r = [](Complex ea, Complex ka, Complex eb, Complex kb) { return (eb * ka - ea * kb) / (eb * ka + ea * kb); };
  auto t = [](Complex ea, Complex ka, Complex eb, Complex kb) { return 2.0 * eb * ka / (eb * ka + ea * kb); };
  const Complex r01 = r(1.0, kz0, eps1, kz1), r12 = r(eps1, kz1, eps2, kz2);
  const Complex t01 = t(1.0, kz0, eps1, kz1), t10 = t(eps1, kz1, 1.0, kz0);
  const Complex ph = std::exp(Complex(0.0, 2.0) * kz1 * d);
  if (std::abs(r01 * r12 * ph) >= 0.99) return std::nullopt;
  Complex sum = 0.0, term = t01 * t10 * r12 * ph;
  for (int m = 0; m < 100000 && std::abs(term) > 1e-18; ++m) {
    sum += term;
    term *= -r01 * r12 * ph;
  }
  return r01 + sum;
}

Outcome em_oracles() {
  const double hc = constants::hbar_c_ev_nm;
  double fresnel = 0.0, film = 0.0;
  int film_cases = 0;
  for (double e : {1.6, 2.1, 2.6}) {
    const double k0 = e / hc;
    for (Complex eps : {Complex(2.25, 0.0), Complex(4.0, 0.3), Complex(-11.0, 1.2)}) {
      for (double s : {0.0, 0.3, 0.6, 0.9}) {
        const dispersion::ResolvedStack st{e, {1.0, eps}, {}};
        fresnel = std::max(fresnel, std::abs(dispersion::reflection_coefficient_p(st, s * k0) - fresnel_rp(std::sqrt(eps), s)));
      }
      for (double f : {0.4, 0.95, 1.5, 3.0}) {
        const dispersion::ResolvedStack st{e, {1.0, 4.0, eps}, {27.8}};
        const auto series = film_series(4.0, eps, 27.8, k0, f * k0);
        if (!series) continue;
        film = std::max(film, std::abs(dispersion::reflection_coefficient_p(st, f * k0) - *series));
        ++film_cases;
      }
    }
  }
  dispersion::DispersionGrids g;
  const auto map = dispersion::dispersion_map(materials::build_experiment_stack(), g.k_grid(), g.e_grid());
  double min_im = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < map.values.rows(); ++i) {
    const double k0 = map.e_grid[static_cast<std::size_t>(i)] / constants::hbar_c_ev_nm;
    for (Eigen::Index j = 0; j < map.values.cols(); ++j) {
      if (map.k_grid[static_cast<std::size_t>(j)] > k0) min_im = std::min(min_im, map.values(i, j));
    }
  }
  const bool ok = fresnel <= 1e-12 && film <= 1e-10 && film_cases >= 24 && min_im >= -1e-10;
  return {ok, fmt::format("Fresnel max error {:.1e}; thin-film series max error {:.1e} over {} convergent cases; min Im r_p {:.3e} over the evanescent part of the {}x{} grid",
                          fresnel, film, film_cases, min_im, g.e_points, g.k_points)};
}

Outcome cross_module() {
  const auto grid = eels::default_loss_grid();
  const auto zlp = eels::ZLPModel::gaussian(0.5);
  const auto st = quantum::simulate(Complex(1.0, 0.0), quantum::ElectronPreparation::single_rung());
  const auto m = quantum::electron_marginal(st, zlp, 2.1, grid);
  const auto classical = eels::forward_eels({1.0, 1.0, 1.0, 0}, eels::make_zlp(grid, zlp), eels::delta_pqp(grid, 2.1));
  const double l1 = l1_distance(m, classical.density);
  return {l1 <= 1e-3, fmt::format("L1 distance {:.2e}", l1)};
}

Outcome sp_reference() {
  const auto stack = materials::build_experiment_stack();
  const auto grid = spectrum::default_energy_grid();
  const double p25 = spectrum::analyze_peak(spectrum::sp_reference_spectrum(stack, 25.0, 0.5, {}, grid).density).peak_energy_ev;
  const double p30 = spectrum::analyze_peak(spectrum::sp_reference_spectrum(stack, 30.0, 0.5, {}, grid).density).peak_energy_ev;
  const double c93 = spectrum::analyze_peak(spectrum::loss_density(stack, dispersion::electron_kinematics(93.0), {}, grid).density).peak_energy_ev;
  const double c200 = spectrum::analyze_peak(spectrum::loss_density(stack, dispersion::electron_kinematics(200.0), {}, grid).density).peak_energy_ev;
  const bool ok = std::abs(p25 - p30) < 0.01 && std::abs(c93 - c200) > 0.05;
  return {ok, fmt::format("reference shift 25->30 keV {:.4f} eV; guided-mode shift 93->200 keV {:.4f} eV",
                          std::abs(p25 - p30), std::abs(c93 - c200))};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"red-shift of the guided-mode peak", redshift},
      {"coupling range and scaling", coupling_range},
      {"Poisson forward model", forward_model},
      {"fit round trip", fit_round_trip},
      {"quantum regimes", quantum_regimes},
      {"electromagnetic oracles", em_oracles},
      {"quantum vs classical EELS", cross_module},
      {"sub-threshold reference invariance", sp_reference},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o{false, ""};
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << fmt::format("{} {}. {}: {}", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail) << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - static_cast<std::size_t>(failures),
                           criteria.size())
            << std::endl;
  return failures == 0 ? 0 : 1;
}
