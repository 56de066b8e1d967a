#include "cherenkov/materials.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "cherenkov/errors.hpp"
#include "cherenkov/hash.hpp"

namespace cherenkov::materials {

namespace {

void check_passive(Complex eps, const std::string& what) {
  if (!std::isfinite(eps.real()) || !std::isfinite(eps.imag())) {
    throw RangeError(what + ": non-finite permittivity");
  }
  if (eps.imag() < 0.0) throw RangeError(what + ": Im(eps) < 0 describes a gain medium");
}

Complex evaluate(const ConstantPermittivity& m, double) { return m.epsilon; }

Complex evaluate(const TabulatedPermittivity& m, double e) {
  const auto& pts = m.points;
  if (e < pts.front().energy_ev || e > pts.back().energy_ev) {
    throw RangeError(fmt::format("energy {} eV outside table [{}, {}] eV", e, pts.front().energy_ev,
                                 pts.back().energy_ev));
  }
  auto hi = std::upper_bound(pts.begin(), pts.end(), e,
                             [](double x, const TabulatedPermittivity::Point& p) { return x < p.energy_ev; });
  if (hi == pts.end()) return pts.back().epsilon;
  if (hi == pts.begin()) return pts.front().epsilon;
  auto lo = hi - 1;
  const double t = (e - lo->energy_ev) / (hi->energy_ev - lo->energy_ev);
  return {(1.0 - t) * lo->epsilon.real() + t * hi->epsilon.real(),
          (1.0 - t) * lo->epsilon.imag() + t * hi->epsilon.imag()};
}

Complex evaluate(const OscillatorPermittivity& m, double e) {
  const Complex i{0.0, 1.0};
  Complex eps = m.eps_inf;
  if (m.plasma_ev != 0.0) eps -= m.plasma_ev * m.plasma_ev / (e * e + i * m.damping_ev * e);
  for (const auto& l : m.lorentz) {
    eps += l.strength * l.center_ev * l.center_ev / (l.center_ev * l.center_ev - e * e - i * l.width_ev * e);
  }
  return eps;
}

std::string fmt_complex(Complex z) { return fmt::format("({:.17g},{:.17g})", z.real(), z.imag()); }

}  // namespace

DielectricModel::DielectricModel(ConstantPermittivity m, std::string name) : model_(m), name_(std::move(name)) {
  check_passive(m.epsilon, name_);
}

DielectricModel::DielectricModel(TabulatedPermittivity m, std::string name)
    : model_(std::move(m)), name_(std::move(name)) {
  const auto& pts = std::get<TabulatedPermittivity>(model_).points;
  if (pts.size() < 2) throw RangeError(name_ + ": table needs at least two rows");
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (!(pts[k].energy_ev > 0.0)) throw RangeError(name_ + ": table energies must be positive");
    if (k > 0 && !(pts[k].energy_ev > pts[k - 1].energy_ev)) {
      throw RangeError(name_ + ": table energies must be strictly increasing");
    }
    check_passive(pts[k].epsilon, name_);
  }
}

DielectricModel::DielectricModel(OscillatorPermittivity m, std::string name)
    : model_(std::move(m)), name_(std::move(name)) {
  const auto& o = std::get<OscillatorPermittivity>(model_);
  if (o.damping_ev < 0.0) throw RangeError(name_ + ": negative Drude damping");
  for (const auto& l : o.lorentz) {
    if (l.width_ev < 0.0 || l.strength < 0.0 || !(l.center_ev > 0.0)) {
      throw RangeError(name_ + ": Lorentz terms need strength >= 0, center > 0, width >= 0");
    }
  }
}

double DielectricModel::min_energy_ev() const {
  if (auto t = std::get_if<TabulatedPermittivity>(&model_)) return t->points.front().energy_ev;
  return 0.0;
}

double DielectricModel::max_energy_ev() const {
  if (auto t = std::get_if<TabulatedPermittivity>(&model_)) return t->points.back().energy_ev;
  return std::numeric_limits<double>::infinity();
}

std::string DielectricModel::describe() const {
  return std::visit(
      [&](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantPermittivity>) {
          return fmt::format("{}:constant{}", name_, fmt_complex(m.epsilon));
        } else if constexpr (std::is_same_v<T, TabulatedPermittivity>) {
          std::string s = fmt::format("{}:table[{}]", name_, m.points.size());
          for (const auto& p : m.points) s += fmt::format("{:.17g}{}", p.energy_ev, fmt_complex(p.epsilon));
          return s;
        } else {
          std::string s = fmt::format("{}:oscillator({:.17g},{:.17g},{:.17g})", name_, m.eps_inf, m.plasma_ev,
                                      m.damping_ev);
          for (const auto& l : m.lorentz) {
            s += fmt::format("L({:.17g},{:.17g},{:.17g})", l.strength, l.center_ev, l.width_ev);
          }
          return s;
        }
      },
      model_);
}

Complex evaluate_permittivity(const DielectricModel& model, double energy_ev) {
  if (!(energy_ev > 0.0) || !std::isfinite(energy_ev)) {
    throw RangeError(fmt::format("permittivity requested at non-positive energy {} eV", energy_ev));
  }
  return std::visit([&](const auto& m) { return evaluate(m, energy_ev); }, model.model());
}

DielectricModel load_permittivity_table(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open permittivity table " + path.string());
  TabulatedPermittivity table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double e = 0.0, re = 0.0, im = 0.0;
    if (!(row >> e >> re)) {
      throw ConfigError(fmt::format("{}:{}: expected 'energy_eV re_eps [im_eps]'", path.string(), lineno));
    }
    if (!(row >> im)) im = 0.0;
    table.points.push_back({e, {re, im}});
  }
  if (name.empty()) name = path.stem().string();
  return DielectricModel(std::move(table), std::move(name));
}

std::string LayerStack::describe() const {
  std::string s = "super=" + superstrate.describe();
  for (const auto& l : layers) s += fmt::format("|{:.17g}nm:", l.thickness_nm) + l.material.describe();
  s += "|sub=" + substrate.describe();
  return s;
}

std::string LayerStack::hash() const { return hex_hash(describe()); }

LayerStack make_stack(DielectricModel superstrate, std::vector<Layer> layers, DielectricModel substrate) {
  for (const auto& l : layers) {
    if (!std::isfinite(l.thickness_nm) || !(l.thickness_nm > 0.0)) {
      throw RangeError("layer thickness must be finite and positive");
    }
  }
  return {std::move(superstrate), std::move(layers), std::move(substrate)};
}

DielectricModel vacuum() { return DielectricModel::constant(1.0, "vacuum"); }
DielectricModel silicon_dioxide(double eps) { return DielectricModel::constant(eps, "SiO2"); }
DielectricModel silicon_nitride(double eps) { return DielectricModel::constant(eps, "Si3N4"); }

DielectricModel gold_drude_lorentz() {
  OscillatorPermittivity m;
  m.eps_inf = 5.9673;
  m.plasma_ev = 8.7411;
  m.damping_ev = 0.0658;
  m.lorentz.push_back({1.09, 2.6885, 0.4337});
  return DielectricModel(std::move(m), "Au-DL");
}

std::filesystem::path default_gold_table() {
  return std::filesystem::path(CHERENKOV_DATA_DIR) / "au_johnson_christy.txt";
}

DielectricModel gold(const std::filesystem::path& table) {
  const auto path = table.empty() ? default_gold_table() : table;
  if (!std::filesystem::exists(path)) {
    if (!table.empty()) throw ConfigError("gold table not found: " + path.string());
    return gold_drude_lorentz();
  }
  return load_permittivity_table(path, "Au");
}

LayerStack build_experiment_stack(double sio2_nm, double si3n4_nm) {
  ExperimentStackOptions o;
  o.sio2_nm = sio2_nm;
  o.si3n4_nm = si3n4_nm;
  return build_experiment_stack(o);
}

LayerStack build_experiment_stack(const ExperimentStackOptions& o) {
  auto au = o.gold_use_drude_lorentz ? gold_drude_lorentz() : gold(o.gold_table);
  return make_stack(vacuum(),
                    {Layer{o.si3n4_nm, silicon_nitride(o.eps_si3n4)}, Layer{o.sio2_nm, silicon_dioxide(o.eps_sio2)}},
                    std::move(au));
}

LayerStack uniform_vacuum_stack(std::size_t layers) {
  std::vector<Layer> ls;
  for (std::size_t k = 0; k < layers; ++k) ls.push_back(Layer{10.0 * static_cast<double>(k + 1), vacuum()});
  return make_stack(vacuum(), std::move(ls), vacuum());
}

}  // namespace cherenkov::materials
