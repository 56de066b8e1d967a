#pragma once

#include <exception>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "cherenkov/config.hpp"
#include "cherenkov/io.hpp"

namespace cherenkov::commands {

enum ExitCode : int {
  exit_ok = 0,
  exit_config = 2,
  exit_compute = 3,
  exit_missing_input = 4,
  exit_fit_failure = 5,
  exit_truncation = 6,
};

/// Exit code for an exception thrown by a command.
int exit_code_for(std::exception_ptr error);

const std::vector<std::string>& command_names();

/// Header written on every output: tool, version, command, config hash.
io::Metadata base_metadata(const config::RunConfig& cfg, const std::string& command);

void cmd_dispersion(const config::RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_spectrum(const config::RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_eels(const config::RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_fit(const config::RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_quantum(const config::RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_report(const config::RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// Runs one command and maps failures onto exit codes; diagnostics go to err.
int run(const std::string& command, const config::RunConfig& cfg, const std::filesystem::path& out,
        std::ostream& log, std::ostream& err);

}  // namespace cherenkov::commands
