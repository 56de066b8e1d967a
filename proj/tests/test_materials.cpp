#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cherenkov/errors.hpp"
#include "cherenkov/materials.hpp"

using namespace cherenkov;
using namespace cherenkov::materials;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_CASE("constant permittivity is energy independent") {
  const auto m = DielectricModel::constant({4.0, 0.0}, "Si3N4");
  CHECK(evaluate_permittivity(m, 1.0) == Complex(4.0, 0.0));
  CHECK(evaluate_permittivity(m, 3.3) == Complex(4.0, 0.0));
}

TEST_CASE("Drude-Lorentz gold matches the oscillator formula") {
  const auto au = gold_drude_lorentz();
  for (double e : {1.2, 2.0, 2.5, 3.1}) {
    const std::complex<double> i{0.0, 1.0};
    const auto expected = 5.9673 - 8.7411 * 8.7411 / (e * e + i * 0.0658 * e) +
                          1.09 * 2.6885 * 2.6885 / (2.6885 * 2.6885 - e * e - i * 0.4337 * e);
    const auto got = evaluate_permittivity(au, e);
    CHECK(std::abs(got - expected) < 1e-12);
    CHECK(got.imag() > 0.0);
  }
}

TEST_CASE("tabulated permittivity interpolates linearly and rejects out-of-range energies") {
  TabulatedPermittivity t;
  t.points = {{1.0, {-2.0, 1.0}}, {2.0, {-6.0, 3.0}}};
  const DielectricModel m(t, "tab");
  const auto mid = evaluate_permittivity(m, 1.25);
  CHECK(mid.real() == doctest::Approx(-3.0));
  CHECK(mid.imag() == doctest::Approx(1.5));
  CHECK(evaluate_permittivity(m, 2.0) == Complex(-6.0, 3.0));
  CHECK_THROWS_AS(evaluate_permittivity(m, 0.99), RangeError);
  CHECK_THROWS_AS(evaluate_permittivity(m, 2.01), RangeError);
}

TEST_CASE("non-positive energies are rejected") {
  CHECK_THROWS_AS(evaluate_permittivity(vacuum(), 0.0), RangeError);
  CHECK_THROWS_AS(evaluate_permittivity(vacuum(), -1.0), RangeError);
}

TEST_CASE("invalid models are rejected at construction") {
  CHECK_THROWS_AS(DielectricModel::constant({2.0, -0.1}), RangeError);
  TabulatedPermittivity unsorted;
  unsorted.points = {{2.0, {1.0, 0.0}}, {1.0, {1.0, 0.0}}};
  CHECK_THROWS_AS(DielectricModel{unsorted}, RangeError);
  TabulatedPermittivity single;
  single.points = {{2.0, {1.0, 0.0}}};
  CHECK_THROWS_AS(DielectricModel{single}, RangeError);
  OscillatorPermittivity neg;
  neg.damping_ev = -1.0;
  CHECK_THROWS_AS(DielectricModel{neg}, RangeError);
}

TEST_CASE("permittivity tables load with comments, commas and two columns") {
  const auto p = temp_file("cherenkov_table_test.txt", "# energy re im\n1.0, -2.0, 0.5\n\n2.0 -4.0 1.5\n3.0 -5.0\n");
  const auto m = load_permittivity_table(p);
  CHECK(evaluate_permittivity(m, 1.5) == Complex(-3.0, 1.0));
  CHECK(evaluate_permittivity(m, 3.0).imag() == 0.0);
  CHECK(m.min_energy_ev() == 1.0);
  CHECK(m.max_energy_ev() == 3.0);
  const auto bad = temp_file("cherenkov_table_bad.txt", "1.0 abc\n");
  CHECK_THROWS_AS(load_permittivity_table(bad), ConfigError);
  CHECK_THROWS_AS(load_permittivity_table("/nonexistent/table.txt"), ConfigError);
}

TEST_CASE("shipped gold table is metallic and passive over the visible band") {
  REQUIRE(std::filesystem::exists(default_gold_table()));
  const auto au = gold();
  for (double e = 1.4; e <= 3.4; e += 0.05) {
    const auto eps = evaluate_permittivity(au, e);
    CHECK(eps.imag() > 0.0);
    if (e < 2.3) CHECK(eps.real() < -1.0);
  }
  CHECK_THROWS_AS(gold("/nonexistent/au.txt"), ConfigError);
}

TEST_CASE("experiment stack layout and hashing") {
  const auto s = build_experiment_stack();
  REQUIRE(s.layers.size() == 2);
  CHECK(s.layers[0].thickness_nm == 27.8);
  CHECK(s.layers[1].thickness_nm == 12.6);
  CHECK(evaluate_permittivity(s.layers[0].material, 2.0) == Complex(4.0, 0.0));
  CHECK(evaluate_permittivity(s.layers[1].material, 2.0) == Complex(2.13, 0.0));
  CHECK(s.hash() == build_experiment_stack().hash());
  CHECK(s.hash() != build_experiment_stack(12.7, 27.8).hash());
  CHECK(s.hash().size() == 16);
}

TEST_CASE("make_stack rejects non-positive thickness") {
  CHECK_THROWS_AS(make_stack(vacuum(), {Layer{0.0, vacuum()}}, vacuum()), RangeError);
  CHECK_THROWS_AS(make_stack(vacuum(), {Layer{-5.0, vacuum()}}, vacuum()), RangeError);
  CHECK_NOTHROW(make_stack(vacuum(), {}, gold_drude_lorentz()));
}
