#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace cherenkov::materials {

using Complex = std::complex<double>;

struct ConstantPermittivity {
  Complex epsilon{1.0, 0.0};
};

struct TabulatedPermittivity {
  struct Point {
    double energy_ev;
    Complex epsilon;
  };
  std::vector<Point> points;  // strictly increasing energy, linear interpolation in Re and Im
};

/// Drude term plus optional Lorentz oscillators:
///   eps(E) = eps_inf - Ep^2 / (E^2 + i g E) + sum_j f_j E0_j^2 / (E0_j^2 - E^2 - i w_j E)
struct OscillatorPermittivity {
  struct Lorentz {
    double strength;
    double center_ev;
    double width_ev;
  };
  double eps_inf = 1.0;
  double plasma_ev = 0.0;
  double damping_ev = 0.0;
  std::vector<Lorentz> lorentz;
};

/// Frequency-dependent complex permittivity of a passive, local, isotropic medium.
class DielectricModel {
public:
  using Variant = std::variant<ConstantPermittivity, TabulatedPermittivity, OscillatorPermittivity>;

  DielectricModel() : DielectricModel(ConstantPermittivity{}) {}
  DielectricModel(ConstantPermittivity m, std::string name = "constant");
  DielectricModel(TabulatedPermittivity m, std::string name = "tabulated");
  DielectricModel(OscillatorPermittivity m, std::string name = "oscillator");

  static DielectricModel constant(Complex eps, std::string name = "constant") {
    return DielectricModel(ConstantPermittivity{eps}, std::move(name));
  }

  const Variant& model() const { return model_; }
  const std::string& name() const { return name_; }

  /// Energy range where the model may be evaluated; (0, inf) unless tabulated.
  double min_energy_ev() const;
  double max_energy_ev() const;

  /// Stable textual description, used for stack hashing and metadata.
  std::string describe() const;

private:
  Variant model_;
  std::string name_;
};

/// eps(E). Throws RangeError for E <= 0 or outside a table.
Complex evaluate_permittivity(const DielectricModel& model, double energy_ev);

/// Reads "energy_eV re_eps [im_eps]" rows; '#' starts a comment line.
DielectricModel load_permittivity_table(const std::filesystem::path& path, std::string name = {});

struct Layer {
  double thickness_nm;
  DielectricModel material;
};

/// Planar stack seen from the superstrate (electron side): superstrate,
/// layers in order away from it, then the semi-infinite substrate.
struct LayerStack {
  DielectricModel superstrate;
  std::vector<Layer> layers;
  DielectricModel substrate;

  std::string describe() const;
  /// FNV-1a of describe(); short identifier written into output metadata.
  std::string hash() const;
};

/// Validates thicknesses (finite, > 0).
LayerStack make_stack(DielectricModel superstrate, std::vector<Layer> layers, DielectricModel substrate);

DielectricModel vacuum();
DielectricModel silicon_dioxide(double eps = 2.13);
DielectricModel silicon_nitride(double eps = 4.0);
/// Drude-Lorentz gold, fitted to the visible range.
DielectricModel gold_drude_lorentz();
/// Tabulated gold from the shipped data file, or the Drude-Lorentz fallback
/// when the file is missing.
DielectricModel gold(const std::filesystem::path& table = {});
std::filesystem::path default_gold_table();

struct ExperimentStackOptions {
  double sio2_nm = 12.6;
  double si3n4_nm = 27.8;
  double eps_sio2 = 2.13;
  double eps_si3n4 = 4.0;
  /// Empty selects the shipped table.
  std::filesystem::path gold_table;
  bool gold_use_drude_lorentz = false;
};

/// vacuum / Si3N4 / SiO2 / Au half-space.
LayerStack build_experiment_stack(double sio2_nm = 12.6, double si3n4_nm = 27.8);
LayerStack build_experiment_stack(const ExperimentStackOptions& options);

/// All media vacuum with the given layer count; reflects nothing.
LayerStack uniform_vacuum_stack(std::size_t layers = 0);

}  // namespace cherenkov::materials
