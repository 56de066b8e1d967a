#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cherenkov/dispersion.hpp"
#include "cherenkov/inversion.hpp"
#include "cherenkov/materials.hpp"
#include "cherenkov/spectrum.hpp"

namespace cherenkov::config {

struct StackConfig {
  std::string kind = "experiment";  // experiment | vacuum
  double sio2_nm = 12.6;
  double si3n4_nm = 27.8;
  double eps_sio2 = 2.13;
  double eps_si3n4 = 4.0;
  std::string gold = "table";       // table | drude_lorentz
  std::string gold_table;           // empty: bundled table
};

struct ElectronConfig {
  std::vector<double> kev{93.0, 120.0, 160.0, 200.0};
  std::vector<double> sp_kev{25.0, 30.0};
};

struct SpectrumConfig {
  double e_min = 1.4;
  double e_max = 3.4;
  double e_step = 0.01;
  double calibration = 1.0;
  double rel_tol = 1e-6;
  double surface_kev = 200.0;
  std::vector<double> sweep_x0_nm{20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<double> sweep_leff_um{10, 25, 50, 100, 150, 200, 250};
  double shape_kev = 200.0;
  std::vector<double> shape_x0_nm{20, 30, 40, 50, 60};
  std::size_t beam_nodes = 41;
};

struct EelsConfig {
  double u_min = -3.0;
  double u_max = 12.0;
  double u_step = 0.01;
  double zlp_fwhm_ev = 0.5;
  std::string zlp_file;     // two-column profile; empty: Gaussian
  double kev = 200.0;       // electron energy for the simulated spectrum and fit fixtures
  double lambda = 1.0;
  double p = 0.7;
  double s = 1.0;
  std::size_t n_max = 0;    // 0: automatic
};

struct FitConfig {
  std::string input;        // measured spectrum; empty: synthetic fixture
  std::string zlp_input;    // measured ZLP; empty: model ZLP
  std::string mode = "joint";
  double fixed_x0_nm = 40.0;
  double lambda_true = 1.0;
  double sp_true = 0.7;
  double x0_true_nm = 40.0;
  double noise = 0.01;
  std::uint64_t noise_seed = 7;
  double family_x0_min = 5.0;
  double family_x0_max = 200.0;
  double family_step_nm = 2.5;
  double window_lo = 1.5;
  double window_hi = 2.8;
};

struct QuantumConfig {
  double g_abs2 = 1.0;
  double g_phase = 0.0;
  double photon_energy_ev = 2.1;
  std::vector<std::size_t> comb_k{1, 32};
  std::vector<std::size_t> purity_k{1, 2, 4, 8, 16, 32};
  std::size_t extra_photons = 0;
};

struct RunSection {
  unsigned threads = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
};

struct RunConfig {
  StackConfig stack;
  ElectronConfig electron;
  spectrum::BeamGeometry beam;
  dispersion::DispersionGrids dispersion;
  SpectrumConfig spectrum;
  EelsConfig eels;
  FitConfig fit;
  QuantumConfig quantum;
  RunSection run;

  void validate() const;
};

/// INI text with every key; parse(serialize(c)) reproduces c exactly.
std::string serialize(const RunConfig& c);

/// Parses INI text over the defaults. Unknown sections or keys, malformed
/// values and invalid combinations raise ConfigError.
RunConfig parse(const std::string& text);

RunConfig load(const std::filesystem::path& path);

/// Applies "section.key=value" overrides on top of INI text.
RunConfig parse_with_overrides(const std::string& text, const std::vector<std::string>& overrides);

/// Hash of the serialized config with the thread count excluded.
std::string config_hash(const RunConfig& c);

materials::LayerStack build_stack(const StackConfig& s);
spectrum::SpectrumOptions spectrum_options(const RunConfig& c);
UniformGrid energy_grid(const RunConfig& c);
UniformGrid loss_grid(const RunConfig& c);
inversion::FitOptions fit_options(const RunConfig& c);

}  // namespace cherenkov::config
