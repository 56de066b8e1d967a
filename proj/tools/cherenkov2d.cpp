#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "cherenkov/commands.hpp"
#include "cherenkov/config.hpp"
#include "cherenkov/errors.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cherenkov::ConfigError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D Cherenkov radiation toolkit: dispersion, loss spectra, EELS model, fitting, quantum state"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir = "out", seed_list;
  unsigned threads = 0;
  std::vector<std::string> overrides;
  bool dump_config = false;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (overrides [run] threads)");
  app.add_option("--seed-list", seed_list, "comma-separated fit seeds (overrides [run] seeds)");
  app.add_option("--set", overrides, "override section.key=value (repeatable)");
  app.add_flag("--dump-config", dump_config, "print the effective configuration and exit");
  const std::vector<std::pair<std::string, std::string>> help{
      {"dispersion", "Im r_p map, guided-mode ridge and phase-matched energies"},
      {"spectrum", "loss spectra, coupling surface, peak shapes and references"},
      {"eels", "simulated EELS from the Poisson forward model"},
      {"fit", "fit lambda, s p and x0 to a measured or synthetic spectrum"},
      {"quantum", "joint electron-photon state, photon density matrices and EELS"},
      {"report", "collect figure tables and a summary from earlier outputs"},
  };
  for (const auto& [name, text] : help) app.add_subcommand(name, text)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cherenkov::commands::exit_config;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  cherenkov::config::RunConfig cfg;
  try {
    if (threads > 0) overrides.push_back("run.threads=" + std::to_string(threads));
    if (!seed_list.empty()) overrides.push_back("run.seeds=" + seed_list);
    const std::string text = config_path.empty() ? std::string() : read_file(config_path);
    cfg = cherenkov::config::parse_with_overrides(text, overrides);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cherenkov::commands::exit_config;
  }
  if (dump_config) {
    std::cout << cherenkov::config::serialize(cfg);
    return 0;
  }
  return cherenkov::commands::run(command, cfg, out_dir, std::cout, std::cerr);
}
