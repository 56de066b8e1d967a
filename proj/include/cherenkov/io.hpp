#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cherenkov/grid.hpp"

namespace cherenkov::io {

inline constexpr const char* toolkit_name = "cherenkov2d";
inline constexpr const char* toolkit_version = "0.1.0";

/// Ordered key=value pairs written as '#' header lines.
using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Shortest decimal form that parses back to the same double.
std::string format_number(double v);

struct CsvTable {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
  std::vector<double> values(const std::string& name) const;
};

void write_csv(const std::filesystem::path& path, const Metadata& meta, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

/// energy_eV plus one column per function; all functions share one grid.
void write_spectra_csv(const std::filesystem::path& path, const Metadata& meta,
                       const std::vector<std::string>& names, const std::vector<const GridFunction*>& functions);

void write_spectrum_csv(const std::filesystem::path& path, const Metadata& meta, const GridFunction& f,
                        const std::string& value_name = "value");

/// Throws MissingInputError when the file is absent.
CsvTable read_csv(const std::filesystem::path& path);

/// Rebuilds a grid function from the energy_eV column and a value column.
GridFunction column_as_function(const CsvTable& table, const std::string& value_name);

/// Writes the document with a "meta" object holding the metadata pairs.
void write_json(const std::filesystem::path& path, const Metadata& meta, nlohmann::ordered_json body);

nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace cherenkov::io
