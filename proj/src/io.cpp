#include "cherenkov/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cherenkov/errors.hpp"

namespace cherenkov::io {

std::string format_number(double v) { return fmt::format("{}", v); }

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw MissingInputError("CSV has no column '" + name + "'");
}

std::vector<double> CsvTable::values(const std::string& name) const {
  const auto c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.at(c));
  return out;
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_meta(std::ostream& os, const Metadata& meta) {
  for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const Metadata& meta, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  auto os = open_for_write(path);
  write_meta(os, meta);
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const auto& r : rows) {
    if (r.size() != columns.size()) throw Error("CSV row width does not match its header");
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_number(r[i]);
    os << '\n';
  }
}

void write_spectra_csv(const std::filesystem::path& path, const Metadata& meta,
                       const std::vector<std::string>& names, const std::vector<const GridFunction*>& functions) {
  if (names.size() != functions.size() || functions.empty()) throw Error("spectra CSV needs one name per function");
  const auto& grid = functions.front()->grid;
  for (const auto* f : functions) {
    if (!f->grid.same_as(grid)) throw GridMismatchError("spectra written to one CSV must share a grid");
  }
  std::vector<std::string> columns{"energy_eV"};
  columns.insert(columns.end(), names.begin(), names.end());
  std::vector<std::vector<double>> rows(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rows[i].push_back(grid[i]);
    for (const auto* f : functions) rows[i].push_back(f->values[i]);
  }
  write_csv(path, meta, columns, rows);
}

void write_spectrum_csv(const std::filesystem::path& path, const Metadata& meta, const GridFunction& f,
                        const std::string& value_name) {
  write_spectra_csv(path, meta, {value_name}, {&f});
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("missing input file " + path.string());
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto body = line.substr(line.find_first_not_of("# "));
      const auto eq = body.find('=');
      if (eq != std::string::npos) t.metadata[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line, ',');
      continue;
    }
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(cell.c_str(), &end);
      const bool overflow = errno == ERANGE && std::isinf(v);
      while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
      if (end == cell.c_str() || *end != '\0' || overflow) {
        throw ConfigError(fmt::format("{}: non-numeric cell '{}'", path.string(), cell));
      }
      row.push_back(v);
    }
    if (row.size() != t.columns.size()) throw ConfigError(path.string() + ": ragged CSV row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

GridFunction column_as_function(const CsvTable& table, const std::string& value_name) {
  const auto e = table.values("energy_eV");
  auto v = table.values(value_name);
  if (e.size() < 2) throw ConfigError("spectrum needs at least two rows");
  const double step = (e.back() - e.front()) / static_cast<double>(e.size() - 1);
  return GridFunction(UniformGrid(e.front(), step, e.size()), std::move(v));
}

void write_json(const std::filesystem::path& path, const Metadata& meta, nlohmann::ordered_json body) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [k, v] : meta) m[k] = v;
  doc["meta"] = m;
  for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
  auto os = open_for_write(path);
  os << doc.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("missing input file " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace cherenkov::io
