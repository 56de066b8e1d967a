#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cherenkov/constants.hpp"
#include "cherenkov/errors.hpp"
#include "cherenkov/inversion.hpp"

using namespace cherenkov;
using namespace cherenkov::inversion;

namespace {

struct Fixture {
  UniformGrid loss = eels::default_loss_grid();
  GridFunction zlp = eels::make_zlp(loss, eels::ZLPModel::gaussian(0.5));
  PqpFamily family;

  Fixture()
      : family(PqpFamily::compute(materials::build_experiment_stack(), dispersion::electron_kinematics(200.0), {},
                                  UniformGrid::from_step(20.0, 60.0, 2.5), UniformGrid::from_step(1.4, 3.4, 0.01),
                                  eels::default_loss_grid())) {}

  GridFunction synthetic(double lambda, double sp, double x0, double noise = 0.0, std::uint64_t seed = 7) const {
    auto d = eels::forward_eels({lambda, 1.0, sp, 0}, zlp, family.at(x0)).density;
    if (noise > 0.0) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> n(0.0, noise);
      for (auto& v : d.values) v *= 1.0 + n(rng);
      for (auto& v : d.values) v = std::max(v, 0.0);
    }
    return d;
  }
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

GridFunction gaussian(const UniformGrid& g, double mu, double sigma, double amp = 1.0) {
  GridFunction f(g);
  for (std::size_t i = 0; i < g.size(); ++i) f.values[i] = amp * std::exp(-0.5 * std::pow((g[i] - mu) / sigma, 2));
  return f;
}

MeasuredSpectrum measured(GridFunction f) {
  MeasuredSpectrum m;
  m.counts = std::move(f);
  return m;
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p;
}

double l2(const GridFunction& a, const GridFunction& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::pow(a.values[i] - b.values[i], 2);
  return std::sqrt(acc * a.step());
}

}  // namespace

TEST_CASE("measured spectrum files") {
  const auto ok = temp_file("cherenkov_meas.csv",
                            "# kev=200 x0_nm=40 lmax_um=250 rep=3\nenergy_eV,counts\n-0.02,1\n-0.01,5\n0.0,9\n0.01,4\n");
  const auto m = load_measured(ok);
  CHECK(m.kinetic_kev == 200.0);
  CHECK(m.x0_nm == 40.0);
  CHECK(m.lmax_um == 250.0);
  CHECK(m.repetition == 3);
  CHECK(m.counts.size() == 4);
  CHECK(m.counts.values[2] == 9.0);
  CHECK(m.counts.step() == doctest::Approx(0.01));
  CHECK_THROWS_AS(load_measured(temp_file("cherenkov_meas_gap.csv", "0.0,1\n0.01,2\n0.03,3\n")), GridMismatchError);
  CHECK_THROWS_AS(load_measured("/nonexistent/meas.csv"), MissingInputError);
  CHECK_THROWS_AS(load_measured(temp_file("cherenkov_meas_neg.csv", "0.0,1\n0.01,-2\n0.02,3\n")), RangeError);
}

TEST_CASE("ZLP self-subtraction leaves nothing") {
  const auto& f = fx();
  auto scaled = f.zlp;
  scaled *= 500.0;
  const auto sub = normalize_and_subtract_zlp(measured(scaled), measured(f.zlp));
  double l1 = 0.0;
  for (double v : sub.residual.values) l1 += std::abs(v);
  CHECK(l1 * sub.residual.step() < 1e-3);
  CHECK(std::abs(sub.shift_ev) < 1e-3);
}

TEST_CASE("ZLP alignment recovers a shifted reference") {
  const auto g = eels::default_loss_grid();
  const double sigma = 0.5 / constants::fwhm_per_sigma;
  const auto sub = normalize_and_subtract_zlp(measured(gaussian(g, 0.05, sigma)), measured(gaussian(g, 0.0, sigma)));
  CHECK(sub.shift_ev == doctest::Approx(0.05).epsilon(0.04));
}

TEST_CASE("residual area counts the interacted fraction") {
  const auto& f = fx();
  const auto sim = f.synthetic(0.6, 1.0, 40.0);
  const auto sub = normalize_and_subtract_zlp(measured(sim), measured(f.zlp));
  CHECK(sub.residual.integral() == doctest::Approx(1.0 - std::exp(-0.6)).epsilon(5e-3 / (1.0 - std::exp(-0.6))));
}

TEST_CASE("pure ZLP residual has no peak") {
  const auto& f = fx();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.01);
  auto noisy = f.zlp;
  for (auto& v : noisy.values) v = std::max(0.0, v * (1.0 + n(rng)));
  const auto sub = normalize_and_subtract_zlp(measured(noisy), measured(f.zlp));
  CHECK_THROWS_AS(fit_first_peak(sub.residual), NoPeakError);
}

TEST_CASE("single Gaussian peak fit") {
  const auto g = eels::default_loss_grid();
  const auto p = fit_first_peak(gaussian(g, 2.10, 0.12, 0.3));
  CHECK(p.center_ev == doctest::Approx(2.100).epsilon(0.005 / 2.1));
  CHECK(p.sigma_ev == doctest::Approx(0.12).epsilon(1e-3));
  CHECK(p.amplitude == doctest::Approx(0.3).epsilon(1e-3));
  CHECK_THROWS_AS(fit_first_peak(gaussian(g, 2.10, 0.12), FitWindow{3.0, 4.0}), NoPeakError);
  CHECK_THROWS_AS(fit_first_peak(gaussian(g, 2.10, 0.12), FitWindow{2.2, 2.1}), RangeError);
}

TEST_CASE("peak averaging") {
  const std::vector<PeakFit> same(4, PeakFit{2.1, 0.1, 1.0, 0.0});
  CHECK(average_peaks(same).sem_ev == 0.0);
  const auto two = average_peaks({PeakFit{2.10, 0.1, 1.0, 0.0}, PeakFit{2.12, 0.1, 1.0, 0.0}});
  CHECK(two.mean_ev == doctest::Approx(2.11).epsilon(1e-12));
  CHECK(two.sem_ev == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(two.count == 2);
  CHECK_THROWS_AS(average_peaks({}), RangeError);

  // Spread of the sample SEM over many 12-draw experiments.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(2.1, 0.02);
  double mean_sem = 0.0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::vector<PeakFit> fits;
    for (int k = 0; k < 12; ++k) fits.push_back({n(rng), 0.1, 1.0, 0.0});
    mean_sem += average_peaks(fits).sem_ev;
  }
  CHECK(mean_sem / trials == doctest::Approx(0.02 / std::sqrt(12.0)).epsilon(0.05));
}

TEST_CASE("f_PQP family interpolation and range") {
  const auto& f = fx();
  const auto mid = f.family.at(21.25);
  const auto& m = f.family.members();
  for (std::size_t i = 0; i < mid.size(); i += 37) {
    CHECK(mid.values[i] == doctest::Approx(0.5 * (m[0].values[i] + m[1].values[i])).epsilon(1e-12).scale(1e-12));
  }
  CHECK(f.family.at(40.0).values == m[8].values);
  CHECK_THROWS_AS(f.family.at(19.0), RangeError);
  CHECK_THROWS_AS(f.family.at(61.0), RangeError);
  for (const auto& member : m) CHECK(member.integral() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit modes parse") {
  CHECK(parse_fit_mode("joint") == FitMode::joint);
  CHECK(parse_fit_mode("fixed_x0") == FitMode::fixed_x0);
  CHECK(parse_fit_mode("fixed_pqp") == FitMode::fixed_pqp);
  CHECK(to_string(FitMode::fixed_pqp) == "fixed_pqp");
  CHECK_THROWS_AS(parse_fit_mode("both"), ConfigError);
}

TEST_CASE("joint fit round trip with 1% multiplicative noise") {
  const auto& f = fx();
  const auto meas = f.synthetic(1.0, 0.7, 40.0, 0.01);
  const auto r = fit_quantum_coupling(meas, f.family, f.zlp);
  CHECK(r.lambda_hat == doctest::Approx(1.0).epsilon(0.02));
  CHECK(r.sp_hat == doctest::Approx(0.7).epsilon(0.02));
  CHECK(std::abs(r.x0_hat_nm - 40.0) < 10.0);
  CHECK(r.g_qu_hat == doctest::Approx(std::sqrt(r.lambda_hat)).epsilon(1e-14));
  CHECK(r.converged_starts >= 1);
  CHECK(r.lambda_halfwidth > 0.0);
  CHECK(!r.null_model);
}

TEST_CASE("noise-free fit recovers the generating parameters") {
  const auto& f = fx();
  const auto meas = f.synthetic(1.0, 0.7, 40.0);
  FitOptions o;
  o.mode = FitMode::fixed_x0;
  const auto r = fit_quantum_coupling(meas, f.family, f.zlp, o);
  CHECK(r.lambda_hat == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.sp_hat == doctest::Approx(0.7).epsilon(1e-4));
  const auto j = fit_quantum_coupling(meas, f.family, f.zlp);
  CHECK(j.lambda_hat == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(j.sp_hat == doctest::Approx(0.7).epsilon(1e-4));
  CHECK(j.x0_hat_nm == doctest::Approx(40.0).epsilon(1e-4));
}

TEST_CASE("null spectrum fits lambda near zero") {
  const auto& f = fx();
  FitOptions o;
  o.mode = FitMode::fixed_x0;
  const auto r = fit_quantum_coupling(f.zlp, f.family, f.zlp, o);
  CHECK(r.lambda_hat < 0.02);
  CHECK(r.null_model);
  const auto noisy = fit_quantum_coupling(f.synthetic(0.0, 0.7, 40.0, 0.01), f.family, f.zlp);
  CHECK(noisy.lambda_hat < 0.02);
}

TEST_CASE("fit is invariant to the scale of f_PQP and of the measurement") {
  const auto& f = fx();
  const auto meas = f.synthetic(1.2, 0.6, 40.0, 0.01);
  auto pqp = f.family.at(40.0);
  const auto a = fit_quantum_coupling(meas, PqpFamily::fixed(pqp), f.zlp, {FitMode::fixed_pqp});
  pqp *= 37.0;
  auto meas_scaled = meas;
  meas_scaled *= 4.0;
  const auto b = fit_quantum_coupling(meas_scaled, PqpFamily::fixed(pqp), f.zlp, {FitMode::fixed_pqp});
  CHECK(a.lambda_hat == doctest::Approx(b.lambda_hat).epsilon(1e-9));
  CHECK(a.sp_hat == doctest::Approx(b.sp_hat).epsilon(1e-9));
  CHECK(a.lambda_hat == doctest::Approx(1.2).epsilon(0.02));
}

TEST_CASE("fit is deterministic for any thread count") {
  const auto& f = fx();
  const auto meas = f.synthetic(0.8, 0.9, 35.0, 0.01, 21);
  FitOptions one, four;
  four.threads = 4;
  const auto a = fit_quantum_coupling(meas, f.family, f.zlp, one);
  const auto b = fit_quantum_coupling(meas, f.family, f.zlp, four);
  CHECK(a.lambda_hat == b.lambda_hat);
  CHECK(a.sp_hat == b.sp_hat);
  CHECK(a.x0_hat_nm == b.x0_hat_nm);
  CHECK(a.residual_norm == b.residual_norm);
  CHECK(a.best_start == b.best_start);
}

TEST_CASE("joint fit refuses a single fixed shape") {
  const auto& f = fx();
  CHECK_THROWS_AS(fit_quantum_coupling(f.zlp, PqpFamily::fixed(f.family.at(40.0)), f.zlp), ConfigError);
}

TEST_CASE("impact parameter from the first-peak shape") {
  const auto& f = fx();
  const auto own = eels::convolve(f.family.at(40.0), f.zlp);
  const auto self = fit_impact_parameter(own, f.family, f.zlp);
  CHECK(self.x0_nm == 40.0);
  CHECK(self.distance < 1e-12);

  const auto fam47 = PqpFamily::compute(materials::build_experiment_stack(), dispersion::electron_kinematics(200.0), {},
                                        UniformGrid::from_step(45.0, 50.0, 2.5), UniformGrid::from_step(1.4, 3.4, 0.01),
                                        eels::default_loss_grid());
  const auto shape47 = eels::convolve(fam47.at(47.0), f.zlp);
  CHECK(std::abs(fit_impact_parameter(shape47, f.family, f.zlp).x0_nm - 47.0) < 5.0);

  const auto coarse = PqpFamily(UniformGrid::from_step(20.0, 60.0, 10.0),
                                {f.family.at(20.0), f.family.at(30.0), f.family.at(40.0), f.family.at(50.0),
                                 f.family.at(60.0)});
  CHECK_THROWS_AS(fit_impact_parameter(own, coarse, f.zlp), RangeError);
  CHECK_THROWS_AS(fit_impact_parameter(own, PqpFamily::fixed(f.family.at(40.0)), f.zlp), RangeError);
}

TEST_CASE("shapes 10 nm apart are distinguishable above 1% noise") {
  const auto& f = fx();
  const FitWindow w{};
  const auto s40 = first_peak_shape(eels::convolve(f.family.at(40.0), f.zlp), w);
  const auto s50 = first_peak_shape(eels::convolve(f.family.at(50.0), f.zlp), w);
  auto noisy = eels::convolve(f.family.at(40.0), f.zlp);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.01);
  for (auto& v : noisy.values) v *= 1.0 + n(rng);
  const auto s40n = first_peak_shape(noisy, w);
  CHECK(l2(s40, s50) > l2(s40, s40n));
}

TEST_SUITE("known_deviations") {
  TEST_CASE("first-peak center of a lambda = 1 spectrum sits within 0.02 eV of argmax f_PQP") {
    const auto& f = fx();
    const auto sim = f.synthetic(1.0, 0.7, 40.0);
    const auto sub = normalize_and_subtract_zlp(measured(sim), measured(f.zlp));
    const auto peak = fit_first_peak(sub.residual);
    const auto pqp = f.family.at(40.0);
    CHECK(std::abs(peak.center_ev - pqp.grid[pqp.argmax()]) <= 0.02);
  }
}
