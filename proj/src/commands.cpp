#include "cherenkov/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>

#include <fmt/format.h>

#include "cherenkov/constants.hpp"
#include "cherenkov/dispersion.hpp"
#include "cherenkov/eels_model.hpp"
#include "cherenkov/errors.hpp"
#include "cherenkov/inversion.hpp"
#include "cherenkov/quantum.hpp"
#include "cherenkov/spectrum.hpp"

namespace cherenkov::commands {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int exit_code_for(std::exception_ptr error) {
  try {
    std::rethrow_exception(error);
  } catch (const ConfigError&) {
    return exit_config;
  } catch (const MissingInputError&) {
    return exit_missing_input;
  } catch (const FitFailure&) {
    return exit_fit_failure;
  } catch (const NoPeakError&) {
    return exit_fit_failure;
  } catch (const TruncationError&) {
    return exit_truncation;
  } catch (...) {
    return exit_compute;
  }
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"dispersion", "spectrum", "eels", "fit", "quantum", "report"};
  return names;
}

io::Metadata base_metadata(const config::RunConfig& cfg, const std::string& command) {
  return {{"tool", io::toolkit_name},
          {"version", io::toolkit_version},
          {"command", command},
          {"config_hash", config::config_hash(cfg)}};
}

namespace {

std::string kev_label(double kev) { return fmt::format("{:g}keV", kev); }

io::Metadata with(io::Metadata meta, const io::Metadata& extra) {
  meta.insert(meta.end(), extra.begin(), extra.end());
  return meta;
}

std::string num(double v) { return io::format_number(v); }

void note(std::ostream& log, const fs::path& p) { log << "wrote " << p.string() << '\n'; }

eels::ZLPModel zlp_model(const config::RunConfig& cfg) {
  if (cfg.eels.zlp_file.empty()) return eels::ZLPModel::gaussian(cfg.eels.zlp_fwhm_ev);
  const auto m = inversion::load_measured(cfg.eels.zlp_file);
  return eels::ZLPModel::tabulated(m.counts);
}

spectrum::LossSpectrum spectrum_at(const config::RunConfig& cfg, const materials::LayerStack& stack, double kev,
                                   double x0_nm) {
  auto beam = cfg.beam;
  beam.x0_nm = x0_nm;
  return spectrum::loss_density(stack, dispersion::electron_kinematics(kev), beam, config::energy_grid(cfg),
                                config::spectrum_options(cfg));
}

GridFunction pqp_at(const config::RunConfig& cfg, const materials::LayerStack& stack, double kev, double x0_nm) {
  return eels::pqp_on_loss_grid(spectrum::spectral_density(spectrum_at(cfg, stack, kev, x0_nm)),
                                config::loss_grid(cfg));
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

json rho_to_json(const Eigen::MatrixXcd& rho) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < rho.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < rho.cols(); ++c) row.push_back({rho(r, c).real(), rho(r, c).imag()});
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

void cmd_dispersion(const config::RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto stack = config::build_stack(cfg.stack);
  const auto map = dispersion::dispersion_map(stack, cfg.dispersion.k_grid(), cfg.dispersion.e_grid(), cfg.run.threads);
  const auto meta = with(base_metadata(cfg, "dispersion"), {{"stack_hash", stack.hash()}});

  std::vector<std::vector<double>> rows;
  rows.reserve(map.e_grid.size() * map.k_grid.size());
  for (std::size_t i = 0; i < map.e_grid.size(); ++i) {
    for (std::size_t j = 0; j < map.k_grid.size(); ++j) {
      rows.push_back({map.e_grid[i], map.k_grid[j],
                      map.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    }
  }
  io::write_csv(out / "dispersion_map.csv", meta, {"energy_eV", "k_per_nm", "im_rp"}, rows);
  note(log, out / "dispersion_map.csv");

  const auto ridge = dispersion::extract_ridge(map);
  rows.clear();
  for (const auto& p : ridge.points) {
    if (p.present) rows.push_back({p.energy_ev, p.k_per_nm, p.max_value});
  }
  io::write_csv(out / "ridge.csv", with(meta, {{"noise_floor", num(dispersion::ridge_noise_floor)}}),
                {"energy_eV", "k_per_nm", "im_rp_max"}, rows);
  note(log, out / "ridge.csv");

  json entries = json::array();
  for (double kev : cfg.electron.kev) {
    const auto kin = dispersion::electron_kinematics(kev);
    json e{{"kev", kev}, {"beta", kin.beta}};
    try {
      const auto pm = dispersion::phase_match(ridge, kin);
      e["status"] = "matched";
      e["peak_energy_ev"] = pm.peak_energy_ev;
      e["k_match_per_nm"] = pm.k_match_per_nm;
      e["phase_velocity_c"] = pm.phase_velocity;
    } catch (const BelowThresholdError& err) {
      e["status"] = "below_threshold";
      e["detail"] = err.what();
      log << "warning: " << err.what() << '\n';
    }
    entries.push_back(e);
  }
  io::write_json(out / "phase_match.json", meta, json{{"electrons", entries}});
  note(log, out / "phase_match.json");
}

void cmd_spectrum(const config::RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto stack = config::build_stack(cfg.stack);
  const auto grid = config::energy_grid(cfg);
  const auto opts = config::spectrum_options(cfg);
  const auto meta = with(base_metadata(cfg, "spectrum"),
                         {{"stack_hash", stack.hash()},
                          {"x0_nm", num(cfg.beam.x0_nm)},
                          {"leff_um", num(cfg.beam.leff_um)},
                          {"calibration", num(cfg.spectrum.calibration)}});

  json peaks = json::array();
  for (double kev : cfg.electron.kev) {
    const auto spec = spectrum_at(cfg, stack, kev, cfg.beam.x0_nm);
    const auto c = spectrum::coupling_strength(spec);
    const auto shape = spectrum::analyze_peak(spec.density);
    const auto file = out / fmt::format("loss_{}.csv", kev_label(kev));
    io::write_spectrum_csv(file,
                           with(meta, {{"kev", num(kev)}, {"lambda", num(c.lambda)}, {"g_qu", num(c.g_qu)},
                                       {"peak_energy_eV", num(shape.peak_energy_ev)}}),
                           spec.density, "gamma_per_eV");
    note(log, file);
    const auto avg = spectrum::average_over_beam(stack, spec.kin, cfg.beam, grid, opts, cfg.spectrum.beam_nodes);
    peaks.push_back({{"kev", kev},
                     {"peak_energy_ev", shape.peak_energy_ev},
                     {"fwhm_ev", shape.fwhm()},
                     {"lambda", c.lambda},
                     {"g_qu", c.g_qu},
                     {"g_qu_beam_average", avg.g_qu},
                     {"kappa_peak_per_nm", c.kappa_peak}});
  }

  std::vector<GridFunction> sp;
  std::vector<std::string> sp_names;
  json sp_peaks = json::array();
  for (double kev : cfg.electron.sp_kev) {
    try {
      auto ref = spectrum::sp_reference_spectrum(stack, kev, cfg.eels.zlp_fwhm_ev, cfg.beam, grid, opts);
      sp_peaks.push_back({{"kev", kev}, {"peak_energy_ev", spectrum::analyze_peak(ref.density).peak_energy_ev}});
      sp.push_back(std::move(ref.density));
      sp_names.push_back("sp_" + kev_label(kev));
    } catch (const ThresholdWarning& w) {
      log << "warning: " << w.what() << '\n';
    }
  }
  {
    const auto file = out / "sp_reference.csv";
    const auto m = with(meta, {{"zlp_fwhm_eV", num(cfg.eels.zlp_fwhm_ev)}});
    if (sp.empty()) {
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < grid.size(); ++i) rows.push_back({grid[i]});
      io::write_csv(file, m, {"energy_eV"}, rows);
    } else {
      std::vector<const GridFunction*> ptrs;
      for (const auto& f : sp) ptrs.push_back(&f);
      io::write_spectra_csv(file, m, sp_names, ptrs);
    }
    note(log, file);
  }

  io::write_json(out / "spectrum_peaks.json", meta, json{{"electrons", peaks}, {"sp_reference", sp_peaks}});
  note(log, out / "spectrum_peaks.json");

  const auto kin_s = dispersion::electron_kinematics(cfg.spectrum.surface_kev);
  const auto surface = spectrum::coupling_scaling(
      stack, kin_s, cfg.beam, {cfg.spectrum.sweep_x0_nm, cfg.spectrum.sweep_leff_um}, grid, opts);
  {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < surface.x0_nm.size(); ++i) {
      for (std::size_t l = 0; l < surface.leff_um.size(); ++l) {
        rows.push_back({surface.x0_nm[i], surface.leff_um[l], surface.g[i][l], surface.g[i][l] * surface.g[i][l],
                        surface.kappa_peak[i]});
      }
    }
    const auto file = out / "coupling_surface.csv";
    io::write_csv(file, with(meta, {{"kev", num(cfg.spectrum.surface_kev)}}),
                  {"x0_nm", "leff_um", "g_qu", "lambda", "kappa_peak_per_nm"}, rows);
    note(log, file);
  }

  {
    std::vector<GridFunction> shapes;
    std::vector<std::string> names;
    for (double x0 : cfg.spectrum.shape_x0_nm) {
      shapes.push_back(spectrum::spectral_density(spectrum_at(cfg, stack, cfg.spectrum.shape_kev, x0)));
      names.push_back(fmt::format("f_pqp_x0_{:g}nm", x0));
    }
    std::vector<const GridFunction*> ptrs;
    for (const auto& f : shapes) ptrs.push_back(&f);
    const auto file = out / "shapes_x0.csv";
    io::write_spectra_csv(file, with(meta, {{"kev", num(cfg.spectrum.shape_kev)}}), names, ptrs);
    note(log, file);
  }

  {
    const auto medium = materials::silicon_nitride(cfg.stack.eps_si3n4);
    std::vector<GridFunction> ft;
    std::vector<std::string> names;
    for (double kev : cfg.electron.kev) {
      ft.push_back(spectrum::frank_tamm_3d(medium, dispersion::electron_kinematics(kev), grid));
      names.push_back("frank_tamm_per_eV_nm_" + kev_label(kev));
    }
    std::vector<const GridFunction*> ptrs;
    for (const auto& f : ft) ptrs.push_back(&f);
    const auto file = out / "frank_tamm.csv";
    io::write_spectra_csv(file, with(meta, {{"medium", medium.describe()}}), names, ptrs);
    note(log, file);
  }
}

void cmd_eels(const config::RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto stack = config::build_stack(cfg.stack);
  const auto grid = config::loss_grid(cfg);
  const auto f0 = eels::make_zlp(grid, zlp_model(cfg));
  const auto spec = spectrum_at(cfg, stack, cfg.eels.kev, cfg.beam.x0_nm);
  const double peak = spectrum::analyze_peak(spec.density).peak_energy_ev;
  const auto f_pqp = eels::pqp_on_loss_grid(spectrum::spectral_density(spec), grid);

  eels::EELSModelParams params;
  params.lambda = cfg.eels.lambda;
  params.p = cfg.eels.p;
  params.s = cfg.eels.s;
  params.n_max = cfg.eels.n_max;
  const auto sim = eels::forward_eels(params, f0, f_pqp);

  const auto meta = base_metadata(cfg, "eels");
  io::write_spectrum_csv(out / "zlp.csv", with(meta, {{"zlp_fwhm_eV", num(cfg.eels.zlp_fwhm_ev)}}), f0, "zlp_per_eV");
  note(log, out / "zlp.csv");
  io::write_spectrum_csv(out / "eels_simulated.csv",
                         with(meta, {{"kev", num(cfg.eels.kev)},
                                     {"x0_nm", num(cfg.beam.x0_nm)},
                                     {"lambda", num(params.lambda)},
                                     {"p", num(params.p)},
                                     {"s", num(params.s)},
                                     {"n_max", std::to_string(sim.params.n_max)},
                                     {"photon_peak_eV", num(peak)},
                                     {"leaked_mass", num(sim.leaked_mass)}}),
                         sim.density, "dP_du_per_eV");
  note(log, out / "eels_simulated.csv");
}

void cmd_fit(const config::RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto stack = config::build_stack(cfg.stack);
  const auto grid = config::loss_grid(cfg);
  const auto f0 = eels::make_zlp(grid, zlp_model(cfg));
  const auto meta = with(base_metadata(cfg, "fit"),
                         {{"objective", "least_squares_unit_area"}, {"u_min_eV", "-1"}, {"mode", cfg.fit.mode}});

  fs::path input = cfg.fit.input;
  if (input.empty()) {
    const auto f_pqp = pqp_at(cfg, stack, cfg.eels.kev, cfg.fit.x0_true_nm);
    eels::EELSModelParams params;
    params.lambda = cfg.fit.lambda_true;
    params.p = cfg.fit.sp_true;
    auto sim = eels::forward_eels(params, f0, f_pqp).density;
    std::mt19937_64 rng(cfg.fit.noise_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : sim.values) v = std::max(0.0, v * (1.0 + cfg.fit.noise * normal(rng)));
    input = out / "fit_fixture.csv";
    io::write_spectrum_csv(input,
                           with(meta, {{"kev", num(cfg.eels.kev)},
                                       {"x0_nm", num(cfg.fit.x0_true_nm)},
                                       {"lmax_um", num(cfg.beam.lmax_um)},
                                       {"rep", "0"},
                                       {"lambda_true", num(cfg.fit.lambda_true)},
                                       {"sp_true", num(cfg.fit.sp_true)},
                                       {"noise", num(cfg.fit.noise)},
                                       {"noise_seed", std::to_string(cfg.fit.noise_seed)}}),
                           sim, "counts");
    note(log, input);
  }
  const auto meas = inversion::load_measured(input);
  inversion::MeasuredSpectrum zlp_ref;
  if (cfg.fit.zlp_input.empty()) {
    zlp_ref.counts = f0;
  } else {
    zlp_ref = inversion::load_measured(cfg.fit.zlp_input);
  }

  auto options = config::fit_options(cfg);
  const auto kin = dispersion::electron_kinematics(meas.kinetic_kev > 0.0 ? meas.kinetic_kev : cfg.eels.kev);
  const auto family_grid =
      UniformGrid::from_step(cfg.fit.family_x0_min, cfg.fit.family_x0_max, cfg.fit.family_step_nm);
  std::optional<inversion::PqpFamily> family;
  if (options.mode == inversion::FitMode::joint) {
    family = inversion::PqpFamily::compute(stack, kin, cfg.beam, family_grid, config::energy_grid(cfg), grid,
                                           config::spectrum_options(cfg));
  } else {
    family = inversion::PqpFamily::fixed(pqp_at(cfg, stack, kin.kinetic_kev, cfg.fit.fixed_x0_nm));
  }
  const auto zlp_for_model = zlp_ref.counts.grid.same_as(grid) ? zlp_ref.counts : resample(zlp_ref.counts, grid);
  const auto r = inversion::fit_quantum_coupling(meas.counts, *family, zlp_for_model, options);

  json fit{{"lambda_hat", r.lambda_hat},
           {"sp_hat", r.sp_hat},
           {"x0_hat_nm", r.x0_hat_nm},
           {"g_qu_hat", r.g_qu_hat},
           {"residual_norm", r.residual_norm},
           {"null_model", r.null_model},
           {"lambda_halfwidth", r.lambda_halfwidth},
           {"sp_halfwidth", r.sp_halfwidth},
           {"x0_halfwidth_nm", r.x0_halfwidth_nm},
           {"mode", inversion::to_string(r.mode)},
           {"best_start", r.best_start},
           {"converged_starts", r.converged_starts},
           {"channels", r.channels},
           {"seeds", cfg.run.seeds},
           {"input", input.filename().string()}};
  io::write_json(out / "fit_result.json", meta, fit);
  note(log, out / "fit_result.json");

  const inversion::FitWindow window{cfg.fit.window_lo, cfg.fit.window_hi};
  const auto sub = inversion::normalize_and_subtract_zlp(meas, zlp_ref);
  const auto peak = inversion::fit_first_peak(sub.residual, window);
  json first{{"center_ev", peak.center_ev},
             {"sigma_ev", peak.sigma_ev},
             {"amplitude", peak.amplitude},
             {"residual_rms", peak.residual_rms},
             {"window_ev", {window.lo_ev, window.hi_ev}},
             {"zlp_shift_ev", sub.shift_ev},
             {"zlp_scale", sub.zlp_scale},
             {"residual_area", sub.residual.integral()}};
  if (!family->is_fixed() && family->x0_grid().step() <= inversion::max_family_spacing_nm) {
    const auto impact = inversion::fit_impact_parameter(sub.residual, *family, zlp_for_model, window);
    first["impact_parameter_nm"] = impact.x0_nm;
    first["impact_distance"] = impact.distance;
  }
  io::write_json(out / "first_peak.json", meta, first);
  note(log, out / "first_peak.json");
}

void cmd_quantum(const config::RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto& q = cfg.quantum;
  const quantum::Complex g = std::polar(std::sqrt(q.g_abs2), q.g_phase);
  const auto grid = config::loss_grid(cfg);
  const auto zlp = zlp_model(cfg);
  const auto meta = with(base_metadata(cfg, "quantum"),
                         {{"g_abs2", num(q.g_abs2)},
                          {"g_phase", num(q.g_phase)},
                          {"photon_energy_eV", num(q.photon_energy_ev)},
                          {"coherent_phase", "scanned"}});

  auto describe = [&](std::size_t k, const quantum::JointState& st, const Eigen::MatrixXcd& rho) {
    const auto at_g = quantum::best_coherent_fit(rho, std::abs(g));
    const auto free = quantum::best_coherent_fit(rho);
    return json{{"K", k},
                {"rungs", st.trunc.rungs},
                {"photons", st.trunc.photons},
                {"norm", st.norm2()},
                {"trace", quantum::trace(rho)},
                {"purity", quantum::purity(rho)},
                {"max_off_diagonal", quantum::max_off_diagonal(rho)},
                {"hermiticity_error", quantum::hermiticity_error(rho)},
                {"min_eigenvalue", quantum::min_eigenvalue(rho)},
                {"mean_photons", st.mean_photons()},
                {"coherent_fidelity", at_g.fidelity},
                {"coherent_alpha", {at_g.alpha.real(), at_g.alpha.imag()}},
                {"best_coherent_fidelity", free.fidelity},
                {"best_coherent_alpha", {free.alpha.real(), free.alpha.imag()}}};
  };

  json summary = json::array();
  for (std::size_t k : q.comb_k) {
    const auto st = quantum::simulate(g, quantum::ElectronPreparation::flat_comb(k), q.extra_photons);
    const auto rho = quantum::photon_marginal(st);
    auto d = describe(k, st, rho);
    summary.push_back(d);
    d["rho"] = rho_to_json(rho);
    const auto file = out / fmt::format("density_matrix_K{}.json", k);
    io::write_json(file, meta, d);
    note(log, file);
    const auto eels_curve = quantum::electron_marginal(st, zlp, q.photon_energy_ev, grid);
    const auto csv = out / fmt::format("electron_eels_K{}.csv", k);
    io::write_spectrum_csv(csv, with(meta, {{"K", std::to_string(k)}}), eels_curve, "dP_du_per_eV");
    note(log, csv);
  }

  json scan = json::array();
  std::vector<std::size_t> ks = q.purity_k;
  std::sort(ks.begin(), ks.end());
  bool monotone = true;
  double last = -1.0;
  for (std::size_t k : ks) {
    const auto st = quantum::simulate(g, quantum::ElectronPreparation::flat_comb(k), q.extra_photons);
    const double p = quantum::purity(quantum::photon_marginal(st));
    if (p < last - 1e-12) monotone = false;
    last = p;
    scan.push_back({{"K", k}, {"purity", p}});
  }
  const auto single = quantum::simulate(g, quantum::ElectronPreparation::single_rung(), q.extra_photons);
  const auto rho1 = quantum::photon_marginal(single);
  double poisson_err = 0.0;
  for (Eigen::Index n = 0; n < rho1.rows(); ++n) {
    const double w = std::exp(-q.g_abs2 + static_cast<double>(n) * std::log(std::max(q.g_abs2, 1e-300)) -
                              std::lgamma(static_cast<double>(n) + 1.0));
    poisson_err = std::max(poisson_err, std::abs(rho1(n, n).real() - (q.g_abs2 == 0.0 ? (n == 0) : w)));
  }
  io::write_json(out / "quantum_summary.json", meta,
                 json{{"combs", summary},
                      {"purity_scan", scan},
                      {"purity_monotone", monotone},
                      {"single_rung_poisson_max_error", poisson_err},
                      {"single_rung_max_off_diagonal", quantum::max_off_diagonal(rho1)}});
  note(log, out / "quantum_summary.json");
}

void cmd_report(const config::RunConfig& cfg, const fs::path& out, std::ostream& log) {
  std::vector<fs::path> needed;
  for (double kev : cfg.electron.kev) needed.push_back(out / fmt::format("loss_{}.csv", kev_label(kev)));
  for (const char* f : {"sp_reference.csv", "coupling_surface.csv", "shapes_x0.csv", "eels_simulated.csv",
                        "quantum_summary.json"}) {
    needed.push_back(out / f);
  }
  std::string missing;
  for (const auto& p : needed) {
    if (!fs::exists(p)) missing += "\n  " + p.string();
  }
  if (!missing.empty()) throw MissingInputError("report inputs missing (run the producing commands first):" + missing);

  const auto meta = base_metadata(cfg, "report");
  std::vector<std::string> summary;

  // Peak energies and normalized first-peak spectra.
  std::vector<GridFunction> loss;
  std::vector<std::string> names;
  std::vector<std::vector<double>> peak_rows;
  for (double kev : cfg.electron.kev) {
    const auto t = io::read_csv(out / fmt::format("loss_{}.csv", kev_label(kev)));
    auto f = io::column_as_function(t, "gamma_per_eV");
    const auto shape = spectrum::analyze_peak(f);
    peak_rows.push_back({kev, shape.peak_energy_ev, shape.fwhm(), f.integral()});
    const double a = f.integral();
    if (a > 0.0) f *= 1.0 / a;
    loss.push_back(std::move(f));
    names.push_back("f_pqp_" + kev_label(kev));
  }
  const auto sp_table = io::read_csv(out / "sp_reference.csv");
  for (std::size_t c = 1; c < sp_table.columns.size(); ++c) {
    auto f = io::column_as_function(sp_table, sp_table.columns[c]);
    const double a = f.integral();
    if (a > 0.0) f *= 1.0 / a;
    if (!loss.empty() && !f.grid.same_as(loss.front().grid)) f = resample(f, loss.front().grid);
    loss.push_back(std::move(f));
    names.push_back(sp_table.columns[c]);
  }
  {
    std::vector<const GridFunction*> ptrs;
    for (const auto& f : loss) ptrs.push_back(&f);
    io::write_spectra_csv(out / "report_first_peaks.csv", meta, names, ptrs);
    note(log, out / "report_first_peaks.csv");
    io::write_csv(out / "report_peak_energies.csv", meta, {"kev", "peak_energy_eV", "fwhm_eV", "lambda"}, peak_rows);
    note(log, out / "report_peak_energies.csv");
  }
  bool decreasing = true, in_window = true;
  for (std::size_t i = 0; i < peak_rows.size(); ++i) {
    if (i > 0 && !(peak_rows[i][1] < peak_rows[i - 1][1])) decreasing = false;
    if (peak_rows[i][1] < 2.03 || peak_rows[i][1] > 2.35) in_window = false;
  }
  summary.push_back(fmt::format("peak_energies_strictly_decreasing: {}", decreasing ? "yes" : "no"));
  summary.push_back(fmt::format("peak_energies_in_[2.03,2.35]_eV: {}", in_window ? "yes" : "no"));
  for (const auto& r : peak_rows) summary.push_back(fmt::format("  {:g} keV: peak {:.4f} eV, lambda {:.4f}", r[0], r[1], r[3]));
  for (std::size_t c = 1; c < sp_table.columns.size(); ++c) {
    const auto f = io::column_as_function(sp_table, sp_table.columns[c]);
    summary.push_back(fmt::format("  {}: peak {:.4f} eV", sp_table.columns[c], spectrum::analyze_peak(f).peak_energy_ev));
  }

  {
    const auto t = io::read_csv(out / "shapes_x0.csv");
    io::write_csv(out / "report_shapes_x0.csv", with(meta, {{"source", "shapes_x0.csv"}}), t.columns, t.rows);
    note(log, out / "report_shapes_x0.csv");
  }

  {
    const auto t = io::read_csv(out / "eels_simulated.csv");
    const auto f = io::column_as_function(t, "dP_du_per_eV");
    io::write_csv(out / "report_eels.csv", with(meta, {{"source", "eels_simulated.csv"}}), t.columns, t.rows);
    note(log, out / "report_eels.csv");
    const double lambda = std::stod(t.metadata.at("lambda"));
    const double p = std::stod(t.metadata.at("p"));
    const double w0 = std::stod(t.metadata.at("photon_peak_eV"));
    const auto weights = eels::poisson_weights(lambda, eels::default_n_max(lambda));
    std::vector<std::vector<double>> rows;
    for (std::size_t n = 0; n < std::min<std::size_t>(weights.size(), 6); ++n) {
      const double lo = (static_cast<double>(n) - 0.5) * w0, hi = (static_cast<double>(n) + 0.5) * w0;
      const double model = p * weights[n] + (n == 0 ? 1.0 - p : 0.0);
      rows.push_back({static_cast<double>(n), weights[n], model, f.integral(n == 0 ? f.grid.start() : lo, hi)});
    }
    io::write_csv(out / "report_poisson_lobes.csv", with(meta, {{"lambda", num(lambda)}, {"p", num(p)}}),
                  {"n", "poisson_weight", "model_lobe_weight", "lobe_area"}, rows);
    note(log, out / "report_poisson_lobes.csv");
  }

  {
    const auto t = io::read_csv(out / "coupling_surface.csv");
    const auto x0 = t.values("x0_nm"), leff = t.values("leff_um"), g = t.values("g_qu"),
               kappa = t.values("kappa_peak_per_nm");
    std::vector<double> xs = x0, ls = leff;
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    auto slope_leff = [&](double x) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x0[i] == x) {
          a.push_back(std::log(leff[i]));
          b.push_back(std::log(g[i]));
        }
      }
      return fit_slope(a, b);
    };
    auto slope_x0 = [&](double l) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (leff[i] == l) {
          a.push_back(x0[i]);
          b.push_back(std::log(g[i]));
        }
      }
      return fit_slope(a, b);
    };
    std::vector<std::vector<double>> rows;
    double gmin = 1e300, gmax = -1e300, smin = 1e300, smax = -1e300;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double sl = slope_leff(x0[i]), sx = slope_x0(leff[i]);
      rows.push_back({x0[i], leff[i], g[i], sl, sx, -kappa[i]});
      gmin = std::min(gmin, g[i]);
      gmax = std::max(gmax, g[i]);
      smin = std::min(smin, sl);
      smax = std::max(smax, sl);
    }
    io::write_csv(out / "report_coupling_surface.csv", with(meta, {{"kev", t.metadata.count("kev") ? t.metadata.at("kev") : ""}}),
                  {"x0_nm", "leff_um", "g_qu", "loglog_slope_leff", "semilog_slope_x0_per_nm", "minus_kappa_peak_per_nm"},
                  rows);
    note(log, out / "report_coupling_surface.csv");
    summary.push_back(fmt::format("g_qu_range: [{:.4f}, {:.4f}]", gmin, gmax));
    summary.push_back(fmt::format("loglog_slope_leff_range: [{:.5f}, {:.5f}]", smin, smax));
    double kappa_mean = 0.0;
    for (double k : kappa) kappa_mean += k;
    kappa_mean /= static_cast<double>(kappa.size());
    for (double l : ls) {
      summary.push_back(fmt::format("  semilog_slope_x0 at {:g} um: {:.5f} /nm (mean -kappa_peak {:.5f} /nm)", l,
                                    slope_x0(l), -kappa_mean));
    }
  }

  {
    const auto q = io::read_json(out / "quantum_summary.json");
    summary.push_back(fmt::format("quantum_purity_monotone: {}", q.at("purity_monotone").get<bool>() ? "yes" : "no"));
    summary.push_back(fmt::format("quantum_single_rung_poisson_max_error: {:.3g}",
                                  q.at("single_rung_poisson_max_error").get<double>()));
    for (const auto& c : q.at("combs")) {
      summary.push_back(fmt::format("  K={}: purity {:.4f}, coherent fidelity {:.4f}, max off-diagonal {:.3g}",
                                    c.at("K").get<std::size_t>(), c.at("purity").get<double>(),
                                    c.at("coherent_fidelity").get<double>(), c.at("max_off_diagonal").get<double>()));
    }
  }

  std::ofstream txt(out / "summary.txt", std::ios::binary);
  if (!txt) throw Error("cannot write summary.txt");
  for (const auto& [k, v] : meta) txt << "# " << k << '=' << v << '\n';
  for (const auto& s : summary) txt << s << '\n';
  note(log, out / "summary.txt");
}

int run(const std::string& command, const config::RunConfig& cfg, const fs::path& out, std::ostream& log,
        std::ostream& err) {
  try {
    fs::create_directories(out);
    if (command == "dispersion") cmd_dispersion(cfg, out, log);
    else if (command == "spectrum") cmd_spectrum(cfg, out, log);
    else if (command == "eels") cmd_eels(cfg, out, log);
    else if (command == "fit") cmd_fit(cfg, out, log);
    else if (command == "quantum") cmd_quantum(cfg, out, log);
    else if (command == "report") cmd_report(cfg, out, log);
    else throw ConfigError("unknown command '" + command + "'");
  } catch (const std::exception& e) {
    const int code = exit_code_for(std::current_exception());
    err << "error (" << command << "): " << e.what() << '\n';
    return code;
  }
  return exit_ok;
}

}  // namespace cherenkov::commands
