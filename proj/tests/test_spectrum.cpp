#include <doctest.h>

#include <cmath>

#include "cherenkov/constants.hpp"
#include "cherenkov/errors.hpp"
#include "cherenkov/spectrum.hpp"

using namespace cherenkov;
using namespace cherenkov::spectrum;
using cherenkov::dispersion::electron_kinematics;
using cherenkov::dispersion::ResolvedStack;
using Complex = std::complex<double>;

namespace {

constexpr double hc = constants::hbar_c_ev_nm;

double prefactor(double beta, double leff_um) {
  return 2.0 * constants::alpha * leff_um * 1e3 / (constants::pi * beta * beta * hc);
}

// Plain composite Simpson over k_y with a fixed, fine mesh.
double brute_force_gamma(const ResolvedStack& r, double beta, double x0, double leff_um) {
  const double q = r.energy_ev / (hc * beta), k0 = r.energy_ev / hc;
  const double ky_max = 40.0 / x0;
  const int n = 400000;
  const double h = ky_max / n;
  auto f = [&](double ky) {
    const double kp2 = q * q + ky * ky;
    const double kappa = std::sqrt(kp2 - k0 * k0);
    return kappa / kp2 * dispersion::reflection_coefficient_p(r, std::sqrt(kp2)).imag() * std::exp(-2.0 * kappa * x0);
  };
  double acc = f(0.0) + f(ky_max);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return prefactor(beta, leff_um) * acc * h / 3.0;
}

GridFunction gaussian(const UniformGrid& g, double mu, double sigma) {
  GridFunction f(g);
  for (std::size_t i = 0; i < g.size(); ++i) f.values[i] = std::exp(-0.5 * std::pow((g[i] - mu) / sigma, 2));
  return f;
}

}  // namespace

TEST_CASE("beam geometry validation") {
  BeamGeometry b;
  CHECK_NOTHROW(b.validate());
  b.leff_um = 300.0;
  CHECK_THROWS_AS(b.validate(), RangeError);
  b = {};
  b.x0_nm = 0.0;
  CHECK_THROWS_AS(b.validate(), RangeError);
  b = {};
  b.sigma_nm = -1.0;
  CHECK_THROWS_AS(b.validate(), RangeError);
}

TEST_CASE("field decay constant is k0 / (beta gamma)") {
  const auto kin = electron_kinematics(200.0);
  const double e = 2.1;
  CHECK(field_decay_constant(e, kin) == doctest::Approx(e / hc / (kin.beta * kin.gamma)).epsilon(1e-12));
}

TEST_CASE("non-retarded limit matches the Bessel K0 image-charge result") {
  // beta = 0.05: retardation corrections are O(beta^2).
  const auto kin = electron_kinematics(0.64);
  REQUIRE(kin.beta == doctest::Approx(0.05).epsilon(0.01));
  const Complex eps(2.25, 0.3);
  const double x0 = 10.0, leff = 1.0;
  for (double e : {1.5, 2.0, 2.8}) {
    const ResolvedStack r{e, {1.0, eps}, {}};
    const double q = e / (hc * kin.beta);
    const double expected =
        prefactor(kin.beta, leff) * ((eps - 1.0) / (eps + 1.0)).imag() * std::cyl_bessel_k(0.0, 2.0 * q * x0);
    CHECK(loss_density_at(r, kin, x0, leff) == doctest::Approx(expected).epsilon(0.01));
  }
}

TEST_CASE("adaptive quadrature agrees with a brute-force k_y integral") {
  const auto stack = materials::build_experiment_stack();
  const auto kin = electron_kinematics(200.0);
  for (double e : {1.8, 2.07, 2.5}) {
    const auto r = dispersion::resolve(stack, e);
    const double got = loss_density_at(r, kin, 40.0, 100.0);
    CHECK(got == doctest::Approx(brute_force_gamma(r, kin.beta, 40.0, 100.0)).epsilon(2e-5));
  }
}

TEST_CASE("tightening the quadrature tolerance changes nothing beyond it") {
  const auto stack = materials::build_experiment_stack();
  const auto kin = electron_kinematics(120.0);
  SpectrumOptions tight;
  tight.rel_tol = 1e-10;
  for (double e : {1.6, 2.2, 3.0}) {
    const auto r = dispersion::resolve(stack, e);
    CHECK(loss_density_at(r, kin, 30.0, 50.0) == doctest::Approx(loss_density_at(r, kin, 30.0, 50.0, tight)).epsilon(1e-5));
  }
}

TEST_CASE("loss is linear in length and calibration") {
  const auto stack = materials::build_experiment_stack();
  const auto kin = electron_kinematics(200.0);
  const auto r = dispersion::resolve(stack, 2.1);
  const double g1 = loss_density_at(r, kin, 40.0, 50.0);
  CHECK(loss_density_at(r, kin, 40.0, 100.0) == doctest::Approx(2.0 * g1).epsilon(1e-12));
  SpectrumOptions o;
  o.calibration = 3.0;
  CHECK(loss_density_at(r, kin, 40.0, 50.0, o) == doctest::Approx(3.0 * g1).epsilon(1e-12));
}

TEST_CASE("loss density is non-negative and decreases with impact parameter") {
  const auto stack = materials::build_experiment_stack();
  const auto kin = electron_kinematics(200.0);
  for (double e = 1.5; e < 3.3; e += 0.3) {
    const auto r = dispersion::resolve(stack, e);
    double prev = loss_density_at(r, kin, 10.0, 100.0);
    CHECK(prev >= 0.0);
    for (double x0 = 20.0; x0 <= 100.0; x0 += 20.0) {
      const double v = loss_density_at(r, kin, x0, 100.0);
      CHECK(v >= 0.0);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("vacuum stack gives zero loss and a degenerate spectral density") {
  const auto spec = loss_density(materials::uniform_vacuum_stack(2), electron_kinematics(200.0), {},
                                 default_energy_grid());
  CHECK(spec.lambda() == 0.0);
  CHECK_THROWS_AS(spectral_density(spec), DegenerateSpectrumError);
  CHECK(coupling_strength(spec).g_qu == 0.0);
}

TEST_CASE("coupling strength is sqrt(lambda) and f_PQP has unit area") {
  const auto stack = materials::build_experiment_stack();
  const auto spec = loss_density(stack, electron_kinematics(200.0), {}, default_energy_grid());
  const auto c = coupling_strength(spec);
  CHECK(c.lambda == doctest::Approx(spec.lambda()));
  CHECK(c.g_qu == doctest::Approx(std::sqrt(spec.lambda())).epsilon(1e-14));
  CHECK(spectral_density(spec).integral() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.kappa_peak > 0.0);
}

TEST_CASE("loss spectrum is identical for any thread count") {
  const auto stack = materials::build_experiment_stack();
  const auto grid = UniformGrid::from_step(1.8, 2.4, 0.02);
  SpectrumOptions a, b;
  b.threads = 3;
  const auto sa = loss_density(stack, electron_kinematics(160.0), {}, grid, a);
  const auto sb = loss_density(stack, electron_kinematics(160.0), {}, grid, b);
  CHECK(sa.density.values == sb.density.values);
}

TEST_CASE("coupling surface follows square-root length scaling exactly") {
  const auto stack = materials::build_experiment_stack();
  const auto grid = UniformGrid::from_step(1.6, 3.0, 0.02);
  const auto surf = coupling_scaling(stack, electron_kinematics(200.0), {}, {{20.0, 40.0, 60.0}, {10.0, 100.0, 250.0}},
                                     grid);
  for (double s : surf.loglog_slope_leff) CHECK(s == doctest::Approx(0.5).epsilon(1e-9));
  for (double s : surf.semilog_slope_x0) CHECK(s < 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(surf.g[i][2] > surf.g[i][1]);
  CHECK(surf.g[0][0] > surf.g[1][0]);
  CHECK_THROWS_AS(coupling_scaling(stack, electron_kinematics(200.0), {}, {{}, {10.0}}, grid), RangeError);
}

TEST_CASE("beam averaging") {
  const auto stack = materials::build_experiment_stack();
  const auto kin = electron_kinematics(200.0);
  const auto grid = UniformGrid::from_step(1.6, 3.0, 0.02);
  BeamGeometry b;
  b.sigma_nm = 0.0;
  const auto point = average_over_beam(stack, kin, b, grid);
  CHECK(point.g_qu == doctest::Approx(coupling_strength(loss_density(stack, kin, b, grid)).g_qu).epsilon(1e-12));
  b.sigma_nm = 5.0;
  CHECK(average_over_beam(stack, kin, b, grid).g_qu >= point.g_qu);
  b.x0_nm = 1.0;
  b.sigma_nm = 0.5;
  CHECK_THROWS_AS(average_over_beam(stack, kin, b, grid), RangeError);
}

TEST_CASE("Gaussian smoothing preserves area and widens in quadrature") {
  const auto g = UniformGrid::from_step(0.0, 10.0, 0.01);
  GridFunction spike(g);
  spike.values[500] = 100.0;
  CHECK(gaussian_smooth(spike, 0.0).values == spike.values);
  const auto s = gaussian_smooth(spike, 0.5);
  CHECK(s.integral() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(analyze_peak(s).fwhm() == doctest::Approx(0.5).epsilon(0.01));
  const double w0 = 0.3 * constants::fwhm_per_sigma;
  const auto wide = gaussian_smooth(gaussian(g, 5.0, 0.3), 0.4);
  CHECK(analyze_peak(wide).fwhm() == doctest::Approx(std::hypot(w0, 0.4)).epsilon(0.005));
  CHECK_THROWS_AS(gaussian_smooth(spike, -0.1), RangeError);
}

TEST_CASE("peak analysis of a Gaussian") {
  const auto g = UniformGrid::from_step(1.0, 3.0, 0.01);
  const auto f = gaussian(g, 2.0734, 0.08);
  const auto p = analyze_peak(f);
  CHECK(p.peak_energy_ev == doctest::Approx(2.0734).epsilon(1e-4));
  CHECK(p.fwhm() == doctest::Approx(0.08 * constants::fwhm_per_sigma).epsilon(2e-3));
  CHECK(p.half_width_low == doctest::Approx(p.half_width_high).epsilon(2e-3));
}

TEST_CASE("Frank-Tamm bulk rate") {
  const auto kin = electron_kinematics(200.0);
  const auto grid = UniformGrid::from_step(1.5, 3.0, 0.5);
  const auto ft = frank_tamm_3d(materials::DielectricModel::constant(4.0), kin, grid);
  const double expected = constants::alpha / hc * (1.0 - 1.0 / (kin.beta * kin.beta * 4.0));
  for (double v : ft.values) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
  const auto below = frank_tamm_3d(materials::DielectricModel::constant(1.5), kin, grid);
  for (double v : below.values) CHECK(v == 0.0);
  CHECK_THROWS_AS(frank_tamm_3d(materials::DielectricModel::constant({4.0, 0.1}), kin, grid), UnsupportedInputError);
}

TEST_CASE("sub-threshold reference") {
  const auto stack = materials::build_experiment_stack();
  const auto grid = default_energy_grid();
  const auto sp = sp_reference_spectrum(stack, 25.0, 0.5, {}, grid);
  CHECK(sp.lambda() > 0.0);
  CHECK_THROWS_AS(sp_reference_spectrum(stack, 200.0, 0.5, {}, grid), ThresholdWarning);
}

TEST_CASE("guided-mode peaks red-shift with beam energy") {
  const auto stack = materials::build_experiment_stack();
  double prev = 10.0;
  for (double t : {93.0, 120.0, 160.0, 200.0}) {
    const auto spec = loss_density(stack, electron_kinematics(t), {}, default_energy_grid());
    const double peak = analyze_peak(spec.density).peak_energy_ev;
    CHECK(peak < prev);
    CHECK(peak > 2.03);
    CHECK(peak < 2.35);
    prev = peak;
  }
}
