#include "cherenkov/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "cherenkov/eels_model.hpp"
#include "cherenkov/errors.hpp"
#include "cherenkov/hash.hpp"

namespace cherenkov::config {

namespace pt = boost::property_tree;

namespace {

template <typename C, typename V>
void fields(C& c, V&& v) {
  v("stack", "kind", c.stack.kind);
  v("stack", "sio2_nm", c.stack.sio2_nm);
  v("stack", "si3n4_nm", c.stack.si3n4_nm);
  v("stack", "eps_sio2", c.stack.eps_sio2);
  v("stack", "eps_si3n4", c.stack.eps_si3n4);
  v("stack", "gold", c.stack.gold);
  v("stack", "gold_table", c.stack.gold_table);

  v("electron", "kev", c.electron.kev);
  v("electron", "sp_kev", c.electron.sp_kev);

  v("beam", "x0_nm", c.beam.x0_nm);
  v("beam", "sigma_nm", c.beam.sigma_nm);
  v("beam", "leff_um", c.beam.leff_um);
  v("beam", "lmax_um", c.beam.lmax_um);

  v("dispersion", "k_min", c.dispersion.k_min);
  v("dispersion", "k_max", c.dispersion.k_max);
  v("dispersion", "k_points", c.dispersion.k_points);
  v("dispersion", "e_min", c.dispersion.e_min);
  v("dispersion", "e_max", c.dispersion.e_max);
  v("dispersion", "e_points", c.dispersion.e_points);

  v("spectrum", "e_min", c.spectrum.e_min);
  v("spectrum", "e_max", c.spectrum.e_max);
  v("spectrum", "e_step", c.spectrum.e_step);
  v("spectrum", "calibration", c.spectrum.calibration);
  v("spectrum", "rel_tol", c.spectrum.rel_tol);
  v("spectrum", "surface_kev", c.spectrum.surface_kev);
  v("spectrum", "sweep_x0_nm", c.spectrum.sweep_x0_nm);
  v("spectrum", "sweep_leff_um", c.spectrum.sweep_leff_um);
  v("spectrum", "shape_kev", c.spectrum.shape_kev);
  v("spectrum", "shape_x0_nm", c.spectrum.shape_x0_nm);
  v("spectrum", "beam_nodes", c.spectrum.beam_nodes);

  v("eels", "u_min", c.eels.u_min);
  v("eels", "u_max", c.eels.u_max);
  v("eels", "u_step", c.eels.u_step);
  v("eels", "zlp_fwhm_ev", c.eels.zlp_fwhm_ev);
  v("eels", "zlp_file", c.eels.zlp_file);
  v("eels", "kev", c.eels.kev);
  v("eels", "lambda", c.eels.lambda);
  v("eels", "p", c.eels.p);
  v("eels", "s", c.eels.s);
  v("eels", "n_max", c.eels.n_max);

  v("fit", "input", c.fit.input);
  v("fit", "zlp_input", c.fit.zlp_input);
  v("fit", "mode", c.fit.mode);
  v("fit", "fixed_x0_nm", c.fit.fixed_x0_nm);
  v("fit", "lambda_true", c.fit.lambda_true);
  v("fit", "sp_true", c.fit.sp_true);
  v("fit", "x0_true_nm", c.fit.x0_true_nm);
  v("fit", "noise", c.fit.noise);
  v("fit", "noise_seed", c.fit.noise_seed);
  v("fit", "family_x0_min", c.fit.family_x0_min);
  v("fit", "family_x0_max", c.fit.family_x0_max);
  v("fit", "family_step_nm", c.fit.family_step_nm);
  v("fit", "window_lo", c.fit.window_lo);
  v("fit", "window_hi", c.fit.window_hi);

  v("quantum", "g_abs2", c.quantum.g_abs2);
  v("quantum", "g_phase", c.quantum.g_phase);
  v("quantum", "photon_energy_ev", c.quantum.photon_energy_ev);
  v("quantum", "comb_k", c.quantum.comb_k);
  v("quantum", "purity_k", c.quantum.purity_k);
  v("quantum", "extra_photons", c.quantum.extra_photons);

  v("run", "threads", c.run.threads);
  v("run", "seeds", c.run.seeds);
}

std::string to_text(const std::string& s) { return s; }
std::string to_text(double d) { return fmt::format("{}", d); }
std::string to_text(std::size_t n) { return std::to_string(n); }
std::string to_text(unsigned n) { return std::to_string(n); }
template <typename T>
std::string to_text(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + to_text(v[i]);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void from_text(const std::string& t, std::string& out) { out = trim(t); }

void from_text(const std::string& t, double& out) {
  std::size_t used = 0;
  const auto s = trim(t);
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError("expected a number, got '" + t + "'");
}

template <typename U>
void from_unsigned(const std::string& t, U& out) {
  const auto s = trim(t);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError("expected a non-negative integer, got '" + t + "'");
  out = static_cast<U>(v);
}

void from_text(const std::string& t, std::size_t& out) { from_unsigned(t, out); }
void from_text(const std::string& t, unsigned& out) { from_unsigned(t, out); }

template <typename T>
void from_text(const std::string& t, std::vector<T>& out) {
  out.clear();
  if (trim(t).empty()) return;
  std::istringstream in(t);
  std::string item;
  while (std::getline(in, item, ',')) {
    T v{};
    from_text(item, v);
    out.push_back(v);
  }
}

std::set<std::string> known_keys() {
  std::set<std::string> keys;
  RunConfig c;
  fields(c, [&](const char* s, const char* k, auto&) { keys.insert(std::string(s) + "." + k); });
  return keys;
}

RunConfig from_tree(const pt::ptree& tree) {
  const auto keys = known_keys();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' must live in a section");
    for (const auto& [key, value] : body) {
      if (!keys.count(section + "." + key)) throw ConfigError("unknown config key [" + section + "] " + key);
    }
  }
  RunConfig c;
  fields(c, [&](const char* s, const char* k, auto& field) {
    const auto v = tree.get_optional<std::string>(pt::ptree::path_type(std::string(s) + "." + k, '.'));
    if (!v) return;
    try {
      from_text(*v, field);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("[{}] {}: {}", s, k, e.what()));
    }
  });
  c.validate();
  return c;
}

pt::ptree read_tree(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  return tree;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

bool all_positive(const std::vector<double>& v) {
  for (double x : v) {
    if (!(x > 0.0)) return false;
  }
  return !v.empty();
}

}  // namespace

void RunConfig::validate() const {
  require(stack.kind == "experiment" || stack.kind == "vacuum", "[stack] kind must be experiment or vacuum");
  require(stack.gold == "table" || stack.gold == "drude_lorentz", "[stack] gold must be table or drude_lorentz");
  require(stack.sio2_nm > 0.0 && stack.si3n4_nm > 0.0, "[stack] layer thicknesses must be positive");
  require(stack.eps_sio2 > 0.0 && stack.eps_si3n4 > 0.0, "[stack] dielectric constants must be positive");
  require(stack.gold_table.empty() || std::filesystem::exists(stack.gold_table),
          "[stack] gold_table not found: " + stack.gold_table);
  require(all_positive(electron.kev), "[electron] kev needs positive entries");
  require(all_positive(electron.sp_kev), "[electron] sp_kev needs positive entries");
  try {
    beam.validate();
  } catch (const RangeError& e) {
    throw ConfigError(std::string("[beam] ") + e.what());
  }
  require(dispersion.k_points >= 2 && dispersion.e_points >= 2, "[dispersion] grids need at least two points");
  require(dispersion.k_max > dispersion.k_min && dispersion.k_min >= 0.0, "[dispersion] need 0 <= k_min < k_max");
  require(dispersion.e_max > dispersion.e_min && dispersion.e_min > 0.0, "[dispersion] need 0 < e_min < e_max");
  require(spectrum.e_step > 0.0 && spectrum.e_max > spectrum.e_min && spectrum.e_min > 0.0,
          "[spectrum] need 0 < e_min < e_max and e_step > 0");
  require(spectrum.calibration > 0.0 && spectrum.rel_tol > 0.0, "[spectrum] calibration and rel_tol must be positive");
  require(spectrum.surface_kev > 0.0 && spectrum.shape_kev > 0.0, "[spectrum] electron energies must be positive");
  require(all_positive(spectrum.sweep_x0_nm) && all_positive(spectrum.sweep_leff_um) &&
              all_positive(spectrum.shape_x0_nm),
          "[spectrum] sweeps need positive entries");
  require(spectrum.beam_nodes >= 3, "[spectrum] beam_nodes must be at least 3");
  require(eels.u_step > 0.0 && eels.u_max > eels.u_min, "[eels] need u_min < u_max and u_step > 0");
  try {
    eels::zero_index(UniformGrid::from_step(eels.u_min, eels.u_max, eels.u_step));
  } catch (const Error& e) {
    throw ConfigError(std::string("[eels] ") + e.what());
  }
  require(eels.zlp_fwhm_ev >= 0.1 && eels.zlp_fwhm_ev <= 2.0, "[eels] zlp_fwhm_ev must lie in [0.1, 2.0]");
  require(eels.zlp_file.empty() || std::filesystem::exists(eels.zlp_file), "[eels] zlp_file not found");
  require(eels.kev > 0.0, "[eels] kev must be positive");
  require(eels.lambda >= 0.0, "[eels] lambda must be non-negative");
  require(eels.p >= 0.0 && eels.p <= 1.0 && eels.s >= 0.0 && eels.s <= 1.0, "[eels] p and s must lie in [0, 1]");
  try {
    inversion::parse_fit_mode(fit.mode);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[fit] ") + e.what());
  }
  require(fit.input.empty() || std::filesystem::exists(fit.input), "[fit] input not found: " + fit.input);
  require(fit.zlp_input.empty() || std::filesystem::exists(fit.zlp_input), "[fit] zlp_input not found");
  require(fit.noise >= 0.0, "[fit] noise must be non-negative");
  require(fit.lambda_true >= 0.0 && fit.sp_true >= 0.0 && fit.sp_true <= 1.0 && fit.x0_true_nm > 0.0,
          "[fit] fixture parameters out of range");
  require(fit.family_step_nm > 0.0 && fit.family_x0_max > fit.family_x0_min && fit.family_x0_min > 0.0,
          "[fit] family grid needs 0 < x0_min < x0_max and a positive step");
  require(fit.fixed_x0_nm > 0.0, "[fit] fixed_x0_nm must be positive");
  require(fit.window_hi > fit.window_lo, "[fit] window needs lo < hi");
  require(quantum.g_abs2 >= 0.0, "[quantum] g_abs2 must be non-negative");
  require(quantum.photon_energy_ev > 0.0, "[quantum] photon_energy_ev must be positive");
  require(!quantum.comb_k.empty() && !quantum.purity_k.empty(), "[quantum] comb lists must not be empty");
  for (auto k : quantum.comb_k) require(k >= 1, "[quantum] comb widths must be at least 1");
  for (auto k : quantum.purity_k) require(k >= 1, "[quantum] comb widths must be at least 1");
  require(run.threads >= 1, "[run] threads must be at least 1");
  require(!run.seeds.empty(), "[run] seeds must not be empty");
}

std::string serialize(const RunConfig& c) {
  std::string out;
  std::string current;
  fields(c, [&](const char* s, const char* k, const auto& field) {
    if (current != s) {
      if (!current.empty()) out += '\n';
      out += fmt::format("[{}]\n", s);
      current = s;
    }
    out += fmt::format("{} = {}\n", k, to_text(field));
  });
  return out;
}

RunConfig parse(const std::string& text) { return from_tree(read_tree(text)); }

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

RunConfig parse_with_overrides(const std::string& text, const std::vector<std::string>& overrides) {
  auto tree = read_tree(text);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("override must look like section.key=value, got '" + o + "'");
    }
    tree.put(pt::ptree::path_type(trim(o.substr(0, eq)), '.'), trim(o.substr(eq + 1)));
  }
  return from_tree(tree);
}

std::string config_hash(const RunConfig& c) {
  RunConfig copy = c;
  copy.run.threads = 1;
  return hex_hash(serialize(copy));
}

materials::LayerStack build_stack(const StackConfig& s) {
  if (s.kind == "vacuum") return materials::uniform_vacuum_stack(2);
  materials::ExperimentStackOptions o;
  o.sio2_nm = s.sio2_nm;
  o.si3n4_nm = s.si3n4_nm;
  o.eps_sio2 = s.eps_sio2;
  o.eps_si3n4 = s.eps_si3n4;
  o.gold_use_drude_lorentz = s.gold == "drude_lorentz";
  o.gold_table = s.gold_table;
  return materials::build_experiment_stack(o);
}

spectrum::SpectrumOptions spectrum_options(const RunConfig& c) {
  spectrum::SpectrumOptions o;
  o.calibration = c.spectrum.calibration;
  o.rel_tol = c.spectrum.rel_tol;
  o.threads = c.run.threads;
  return o;
}

UniformGrid energy_grid(const RunConfig& c) {
  return UniformGrid::from_step(c.spectrum.e_min, c.spectrum.e_max, c.spectrum.e_step);
}

UniformGrid loss_grid(const RunConfig& c) { return UniformGrid::from_step(c.eels.u_min, c.eels.u_max, c.eels.u_step); }

inversion::FitOptions fit_options(const RunConfig& c) {
  inversion::FitOptions o;
  o.mode = inversion::parse_fit_mode(c.fit.mode);
  o.fixed_x0_nm = c.fit.fixed_x0_nm;
  o.seeds = c.run.seeds;
  o.threads = c.run.threads;
  return o;
}

}  // namespace cherenkov::config
