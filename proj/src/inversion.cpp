#include "cherenkov/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include "cherenkov/constants.hpp"
#include "cherenkov/errors.hpp"
#include "cherenkov/parallel.hpp"

namespace cherenkov::inversion {

void MeasuredSpectrum::validate() const {
  for (double v : counts.values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw RangeError("measured counts must be finite and non-negative");
  }
  if (!(counts.integral() > 0.0)) throw DegenerateSpectrumError("measured spectrum has no counts");
}

MeasuredSpectrum load_measured(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open spectrum " + path.string());
  MeasuredSpectrum m;
  std::vector<double> e, c;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::string body = line.substr(first + 1);
      std::replace(body.begin(), body.end(), ',', ' ');
      std::istringstream tokens(body);
      std::string tok;
      while (tokens >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
        try {
          if (key == "kev") m.kinetic_kev = std::stod(value);
          else if (key == "x0_nm") m.x0_nm = std::stod(value);
          else if (key == "lmax_um") m.lmax_um = std::stod(value);
          else if (key == "rep") m.repetition = std::stoi(value);
        } catch (const std::exception&) {
          throw ConfigError(fmt::format("{}: bad metadata value '{}'", path.string(), tok));
        }
      }
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double x = 0.0, y = 0.0;
    if (!(row >> x >> y)) {
      if (e.empty()) continue;  // column header
      throw ConfigError(fmt::format("{}: malformed row '{}'", path.string(), line));
    }
    e.push_back(x);
    c.push_back(y);
  }
  if (e.size() < 2) throw ConfigError(path.string() + ": needs at least two channels");
  const double step = (e.back() - e.front()) / static_cast<double>(e.size() - 1);
  for (std::size_t i = 1; i < e.size(); ++i) {
    if (std::abs(e[i] - e[i - 1] - step) > 1e-4 * step) {
      throw GridMismatchError(path.string() + ": channel spacing is not uniform");
    }
  }
  m.counts = GridFunction(UniformGrid(e.front(), step, e.size()), std::move(c));
  m.validate();
  return m;
}

namespace {

GridFunction unit_area(GridFunction f) {
  const double a = f.integral();
  if (!(a > 0.0)) throw DegenerateSpectrumError("spectrum has no area");
  f *= 1.0 / a;
  return f;
}

std::size_t zero_loss_max(const GridFunction& f) {
  std::size_t best = f.size();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (std::abs(f.grid[i]) > 1.0) continue;
    if (best == f.size() || f.values[i] > f.values[best]) best = i;
  }
  return best == f.size() ? f.argmax() : best;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

ZlpSubtraction normalize_and_subtract_zlp(const MeasuredSpectrum& meas, const MeasuredSpectrum& zlp_ref) {
  meas.validate();
  zlp_ref.validate();
  const auto m = unit_area(meas.counts);
  GridFunction r0 = zlp_ref.counts;
  if (!r0.grid.same_as(m.grid)) {
    if (r0.grid.back() < m.grid.start() || r0.grid.start() > m.grid.back()) {
      throw GridMismatchError("ZLP reference does not overlap the measurement");
    }
    r0 = resample(r0, m.grid);
  }
  const auto r = unit_area(r0);

  const auto shape = spectrum::analyze_peak(r);
  const double fwhm = shape.fwhm();
  if (!(fwhm > 0.0)) throw DegenerateSpectrumError("ZLP reference has no measurable width");
  const double step = m.step();
  const std::size_t peak = zero_loss_max(m);

  // Cross-correlation over +-1.5 FWHM of the measured zero-loss peak.
  const auto n = static_cast<std::ptrdiff_t>(m.size());
  const auto half = static_cast<std::ptrdiff_t>(std::ceil(1.5 * fwhm / step));
  const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(peak) - half);
  const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(peak) + half);
  constexpr std::ptrdiff_t max_shift = 100;
  auto corr = [&](std::ptrdiff_t s) {
    double acc = 0.0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) {
      const std::ptrdiff_t j = i - s;
      if (j >= 0 && j < n) acc += m.values[static_cast<std::size_t>(i)] * r.values[static_cast<std::size_t>(j)];
    }
    return acc;
  };
  std::ptrdiff_t best = 0;
  double best_c = corr(0);
  for (std::ptrdiff_t s = -max_shift; s <= max_shift; ++s) {
    const double c = corr(s);
    if (c > best_c) {
      best_c = c;
      best = s;
    }
  }
  double shift = static_cast<double>(best);
  {
    const double cm = corr(best - 1), cp = corr(best + 1);
    const double den = cm - 2.0 * best_c + cp;
    if (den < 0.0) shift += std::clamp(0.5 * (cm - cp) / den, -0.5, 0.5);
  }

  ZlpSubtraction out;
  out.shift_ev = shift * step;
  out.zlp_sigma_ev = fwhm / constants::fwhm_per_sigma;
  GridFunction aligned(m.grid);
  for (std::size_t i = 0; i < m.size(); ++i) aligned.values[i] = interpolate(r, m.grid[i] - out.shift_ev);

  double num = 0.0, den = 0.0;
  const double u_peak = m.grid[peak];
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (std::abs(m.grid[i] - u_peak) > fwhm) continue;
    num += m.values[i] * aligned.values[i];
    den += aligned.values[i] * aligned.values[i];
  }
  if (!(den > 0.0)) throw DegenerateSpectrumError("aligned ZLP vanishes around the zero-loss peak");
  out.zlp_scale = num / den;
  aligned *= out.zlp_scale;

  out.residual = GridFunction(m.grid);
  const double clip_from = u_peak + 3.0 * out.zlp_sigma_ev;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double v = m.values[i] - aligned.values[i];
    if (m.grid[i] > clip_from && v < 0.0) v = 0.0;
    out.residual.values[i] = v;
  }
  out.aligned_zlp = std::move(aligned);
  return out;
}

namespace {

struct GaussData {
  const std::vector<double>* x;
  const std::vector<double>* y;
};

int gauss_f(const gsl_vector* p, void* data, gsl_vector* f) {
  const auto* d = static_cast<GaussData*>(data);
  const double a = gsl_vector_get(p, 0), c = gsl_vector_get(p, 1), s = gsl_vector_get(p, 2);
  for (std::size_t i = 0; i < d->x->size(); ++i) {
    const double z = ((*d->x)[i] - c) / s;
    gsl_vector_set(f, i, a * std::exp(-0.5 * z * z) - (*d->y)[i]);
  }
  return GSL_SUCCESS;
}

int gauss_df(const gsl_vector* p, void* data, gsl_matrix* j) {
  const auto* d = static_cast<GaussData*>(data);
  const double a = gsl_vector_get(p, 0), c = gsl_vector_get(p, 1), s = gsl_vector_get(p, 2);
  for (std::size_t i = 0; i < d->x->size(); ++i) {
    const double z = ((*d->x)[i] - c) / s;
    const double e = std::exp(-0.5 * z * z);
    gsl_matrix_set(j, i, 0, e);
    gsl_matrix_set(j, i, 1, a * e * z / s);
    gsl_matrix_set(j, i, 2, a * e * z * z / s);
  }
  return GSL_SUCCESS;
}

}  // namespace

PeakFit fit_first_peak(const GridFunction& residual, FitWindow window) {
  if (!(window.hi_ev > window.lo_ev)) throw RangeError("fit window must have hi > lo");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    const double u = residual.grid[i];
    if (u >= window.lo_ev && u <= window.hi_ev) {
      x.push_back(u);
      y.push_back(residual.values[i]);
    }
  }
  if (x.size() < 8) throw NoPeakError("fit window holds fewer than 8 channels");

  const auto im = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  const double ymax = y[im];
  std::vector<double> diffs;
  for (std::size_t i = 1; i < y.size(); ++i) diffs.push_back(y[i] - y[i - 1]);
  const double med = median(diffs);
  for (auto& d : diffs) d = std::abs(d - med);
  const double noise = 1.4826 * median(diffs) / std::sqrt(2.0);
  if (!(ymax > 0.0) || ymax <= 3.0 * noise || ymax < 1e-6) {
    throw NoPeakError(fmt::format("no significant peak in [{}, {}] eV (max {:.3g}, noise {:.3g})", window.lo_ev,
                                  window.hi_ev, ymax, noise));
  }
  if (im < 2 || im + 3 > y.size()) {
    throw NoPeakError(fmt::format("maximum in [{}, {}] eV sits at the window edge ({} eV)", window.lo_ev,
                                  window.hi_ev, x[im]));
  }

  std::size_t l = im, r = im;
  while (l > 0 && y[l] > 0.5 * ymax) --l;
  while (r + 1 < y.size() && y[r] > 0.5 * ymax) ++r;
  const double step = residual.step();
  const double sigma0 = std::max(2.0 * step, (x[r] - x[l]) / constants::fwhm_per_sigma);

  const std::size_t n = x.size();
  GaussData data{&x, &y};
  gsl_multifit_nlinear_fdf fdf;
  fdf.f = gauss_f;
  fdf.df = gauss_df;
  fdf.fvv = nullptr;
  fdf.n = n;
  fdf.p = 3;
  fdf.params = &data;
  const gsl_multifit_nlinear_parameters params = gsl_multifit_nlinear_default_parameters();
  gsl_multifit_nlinear_workspace* w = gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &params, n, 3);
  double p0[3] = {ymax, x[im], sigma0};
  gsl_vector_view pv = gsl_vector_view_array(p0, 3);
  gsl_multifit_nlinear_init(&pv.vector, &fdf, w);
  int info = 0;
  const int status = gsl_multifit_nlinear_driver(500, 1e-10, 1e-10, 0.0, nullptr, nullptr, &info, w);
  PeakFit fit;
  fit.amplitude = gsl_vector_get(w->x, 0);
  fit.center_ev = gsl_vector_get(w->x, 1);
  fit.sigma_ev = std::abs(gsl_vector_get(w->x, 2));
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += std::pow(gsl_vector_get(w->f, i), 2);
  fit.residual_rms = std::sqrt(ss / static_cast<double>(n));
  gsl_multifit_nlinear_free(w);

  if (status != GSL_SUCCESS && status != GSL_EMAXITER) {
    throw FitFailure(fmt::format("Gaussian peak fit failed: {}", status));
  }
  if (!(fit.sigma_ev > 0.0) || !(fit.amplitude > 0.0) || fit.center_ev < window.lo_ev ||
      fit.center_ev > window.hi_ev) {
    throw FitFailure(fmt::format("Gaussian peak fit left the window (center {} eV, sigma {} eV)", fit.center_ev,
                                 fit.sigma_ev));
  }
  return fit;
}

PeakAverage average_peaks(const std::vector<PeakFit>& fits) {
  if (fits.empty()) throw RangeError("average_peaks needs at least one fit");
  PeakAverage a;
  a.count = fits.size();
  for (const auto& f : fits) a.mean_ev += f.center_ev;
  a.mean_ev /= static_cast<double>(a.count);
  if (a.count > 1) {
    double ss = 0.0;
    for (const auto& f : fits) ss += (f.center_ev - a.mean_ev) * (f.center_ev - a.mean_ev);
    const double sd = std::sqrt(ss / static_cast<double>(a.count - 1));
    a.sem_ev = sd / std::sqrt(static_cast<double>(a.count));
  }
  return a;
}

PqpFamily::PqpFamily(UniformGrid x0_grid, std::vector<GridFunction> members)
    : x0_grid_(x0_grid), members_(std::move(members)) {
  if (members_.empty()) throw RangeError("f_PQP family is empty");
  if (members_.size() != 1 && members_.size() != x0_grid_.size()) {
    throw GridMismatchError("f_PQP family size does not match its x0 grid");
  }
  for (const auto& f : members_) {
    if (!f.grid.same_as(members_.front().grid)) throw GridMismatchError("f_PQP family members use different grids");
  }
}

PqpFamily PqpFamily::compute(const materials::LayerStack& stack, const spectrum::ElectronKinematics& kin,
                             const spectrum::BeamGeometry& beam, const UniformGrid& x0_grid,
                             const UniformGrid& energy_grid, const UniformGrid& loss_grid,
                             const spectrum::SpectrumOptions& options) {
  std::vector<GridFunction> members(x0_grid.size());
  auto inner = options;
  inner.threads = 1;
  parallel_for(x0_grid.size(), options.threads, [&](std::size_t i) {
    auto b = beam;
    b.x0_nm = x0_grid[i];
    const auto spec = spectrum::loss_density(stack, kin, b, energy_grid, inner);
    members[i] = eels::pqp_on_loss_grid(spectrum::spectral_density(spec), loss_grid);
  });
  return PqpFamily(x0_grid, std::move(members));
}

PqpFamily PqpFamily::fixed(GridFunction f_pqp) {
  const double a = f_pqp.integral();
  if (!(a > 0.0)) throw DegenerateSpectrumError("fixed f_PQP has no area");
  f_pqp *= 1.0 / a;
  return PqpFamily(UniformGrid(0.0, 1.0, 1), {std::move(f_pqp)});
}

GridFunction PqpFamily::at(double x0_nm) const {
  if (is_fixed()) return members_.front();
  const double t = (x0_nm - x0_grid_.start()) / x0_grid_.step();
  const double last = static_cast<double>(members_.size() - 1);
  if (t < -1e-9 || t > last + 1e-9) {
    throw RangeError(fmt::format("x0 = {} nm outside the family range [{}, {}]", x0_nm, x0_min(), x0_max()));
  }
  const double tc = std::clamp(t, 0.0, last);
  auto i = static_cast<std::size_t>(std::floor(tc));
  if (i + 1 >= members_.size()) return members_.back();
  const double w = tc - static_cast<double>(i);
  GridFunction out(members_[i].grid);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.values[k] = (1.0 - w) * members_[i].values[k] + w * members_[i + 1].values[k];
  }
  return out;
}

std::string to_string(FitMode mode) {
  switch (mode) {
    case FitMode::joint: return "joint";
    case FitMode::fixed_x0: return "fixed_x0";
    case FitMode::fixed_pqp: return "fixed_pqp";
  }
  return "joint";
}

FitMode parse_fit_mode(const std::string& text) {
  if (text == "joint") return FitMode::joint;
  if (text == "fixed_x0") return FitMode::fixed_x0;
  if (text == "fixed_pqp") return FitMode::fixed_pqp;
  throw ConfigError("unknown fit mode '" + text + "' (joint | fixed_x0 | fixed_pqp)");
}

namespace {

GridFunction on_family_grid(const GridFunction& f, const UniformGrid& grid) {
  return f.grid.same_as(grid) ? f : resample(f, grid);
}

double sum_squares(const GridFunction& measured, const GridFunction& model, double u_min) {
  double acc = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (model.grid[i] < u_min) continue;
    const double d = model.values[i] - measured.values[i];
    acc += d * d;
  }
  return acc;
}

struct Problem {
  const GridFunction* measured;
  const PqpFamily* family;
  const GridFunction* zlp;
  const FitOptions* opt;
  std::size_t dims;

  // Scaled coordinates in [0, 1] -> physical (lambda, sp, x0).
  void physical(const double* t, double& lambda, double& sp, double& x0) const {
    lambda = opt->bounds.lambda_max * t[0];
    sp = t[1];
    if (dims == 3) x0 = opt->bounds.x0_min_nm + t[2] * (opt->bounds.x0_max_nm - opt->bounds.x0_min_nm);
    else x0 = opt->fixed_x0_nm;
  }

  double value(const double* t) const {
    double clamped[3] = {0.0, 0.0, 0.0};
    double excess = 0.0;
    for (std::size_t k = 0; k < dims; ++k) {
      clamped[k] = std::clamp(t[k], 0.0, 1.0);
      excess += (t[k] - clamped[k]) * (t[k] - clamped[k]);
    }
    double lambda, sp, x0;
    physical(clamped, lambda, sp, x0);
    return fit_objective(*measured, *family, *zlp, lambda, sp, x0, opt->u_min_ev) + 1e3 * excess;
  }
};

double simplex_f(const gsl_vector* v, void* params) {
  const auto* pr = static_cast<const Problem*>(params);
  double t[3] = {0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < pr->dims; ++k) t[k] = gsl_vector_get(v, k);
  return pr->value(t);
}

struct StartOutcome {
  std::vector<double> t;
  double value = std::numeric_limits<double>::infinity();
  bool converged = false;
};

StartOutcome run_simplex(const Problem& pr, const std::vector<double>& start) {
  gsl_multimin_function fn{simplex_f, pr.dims, const_cast<Problem*>(&pr)};
  gsl_vector* x = gsl_vector_alloc(pr.dims);
  gsl_vector* step = gsl_vector_alloc(pr.dims);
  for (std::size_t k = 0; k < pr.dims; ++k) {
    gsl_vector_set(x, k, start[k]);
    gsl_vector_set(step, k, 0.1);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, pr.dims);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  StartOutcome out;
  for (std::size_t it = 0; it < pr.opt->max_iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), pr.opt->simplex_tolerance) == GSL_SUCCESS) {
      out.converged = true;
      break;
    }
  }
  out.t.resize(pr.dims);
  for (std::size_t k = 0; k < pr.dims; ++k) out.t[k] = std::clamp(gsl_vector_get(s->x, k), 0.0, 1.0);
  out.value = s->fval;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(step);
  return out;
}

}  // namespace

double fit_objective(const GridFunction& measured, const PqpFamily& family, const GridFunction& zlp, double lambda,
                     double sp, double x0_nm, double u_min_ev) {
  eels::EELSModelParams params;
  params.lambda = lambda;
  params.p = sp;
  params.s = 1.0;
  auto model = eels::forward_eels(params, zlp, family.at(x0_nm)).density;
  const double area = model.integral();
  if (area > 0.0) model *= 1.0 / area;
  return sum_squares(measured, model, u_min_ev);
}

FitResult fit_quantum_coupling(const GridFunction& measured, const PqpFamily& family, const GridFunction& zlp,
                               const FitOptions& options) {
  if (options.seeds.empty()) throw ConfigError("fit needs at least one seed");
  if (!(options.bounds.lambda_max > 0.0) || !(options.bounds.x0_max_nm > options.bounds.x0_min_nm)) {
    throw ConfigError("invalid fit bounds");
  }
  if (options.mode == FitMode::joint && family.is_fixed()) {
    throw ConfigError("joint fit needs an f_PQP family over x0, got a single shape");
  }
  FitOptions opt = options;
  if (opt.mode == FitMode::joint) {
    opt.bounds.x0_min_nm = std::max(opt.bounds.x0_min_nm, family.x0_min());
    opt.bounds.x0_max_nm = std::min(opt.bounds.x0_max_nm, family.x0_max());
  }
  const auto& grid = family.loss_grid();
  const auto f0 = unit_area(on_family_grid(zlp, grid));
  const auto meas = unit_area(on_family_grid(measured, grid));

  Problem pr{&meas, &family, &f0, &opt, opt.mode == FitMode::joint ? 3u : 2u};
  std::vector<StartOutcome> outcomes(opt.seeds.size());
  parallel_for(opt.seeds.size(), opt.threads, [&](std::size_t i) {
    std::mt19937_64 rng(opt.seeds[i]);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> start(pr.dims);
    for (auto& v : start) v = uni(rng);
    outcomes[i] = run_simplex(pr, start);
  });

  std::size_t best = outcomes.size(), converged = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].converged) continue;
    ++converged;
    if (best == outcomes.size() || outcomes[i].value < outcomes[best].value) best = i;
  }
  if (best == outcomes.size()) {
    std::string diag;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      diag += fmt::format(" seed {}: objective {:.4g};", opt.seeds[i], outcomes[i].value);
    }
    throw FitFailure("no multi-start descent converged:" + diag);
  }

  const auto& t = outcomes[best].t;
  FitResult r;
  r.mode = opt.mode;
  double tt[3] = {0.0, 0.0, 0.0};
  std::copy(t.begin(), t.end(), tt);
  pr.physical(tt, r.lambda_hat, r.sp_hat, r.x0_hat_nm);
  r.g_qu_hat = std::sqrt(r.lambda_hat);
  const double f0v = pr.value(tt);
  r.residual_norm = std::sqrt(f0v);
  r.best_start = best;
  r.converged_starts = converged;
  for (std::size_t i = 0; i < meas.size(); ++i) r.channels += meas.grid[i] >= opt.u_min_ev ? 1 : 0;

  // Axis curvature of the objective; one-sided stencils at the bounds.
  const double sigma2 = f0v / static_cast<double>(std::max<std::size_t>(r.channels, pr.dims + 1) - pr.dims);
  const double h = 1e-3;
  double widths[3] = {0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < pr.dims; ++k) {
    double a[3] = {tt[0], tt[1], tt[2]}, b[3] = {tt[0], tt[1], tt[2]}, c[3] = {tt[0], tt[1], tt[2]};
    double centre = tt[k];
    if (centre - h < 0.0) centre = h;
    if (centre + h > 1.0) centre = 1.0 - h;
    a[k] = centre - h;
    b[k] = centre;
    c[k] = centre + h;
    const double curv = (pr.value(a) - 2.0 * pr.value(b) + pr.value(c)) / (h * h);
    widths[k] = curv > 0.0 ? std::sqrt(2.0 * sigma2 / curv) : std::numeric_limits<double>::infinity();
  }
  r.lambda_halfwidth = widths[0] * opt.bounds.lambda_max;
  r.sp_halfwidth = widths[1];
  if (pr.dims == 3) r.x0_halfwidth_nm = widths[2] * (opt.bounds.x0_max_nm - opt.bounds.x0_min_nm);

  // ZLP-only model versus the fit, by AIC with Gaussian residuals.
  r.null_objective = fit_objective(meas, family, f0, 0.0, 0.0, r.x0_hat_nm, opt.u_min_ev);
  const double n = static_cast<double>(r.channels);
  const double k = static_cast<double>(pr.dims);
  r.null_model = r.null_objective <= f0v || n * std::log(r.null_objective / f0v) <= 2.0 * k;
  if (r.null_model) {
    r.lambda_hat = 0.0;
    r.g_qu_hat = 0.0;
  }
  return r;
}

GridFunction first_peak_shape(const GridFunction& spectrum, FitWindow window) {
  GridFunction out(spectrum.grid);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u = out.grid[i];
    if (u >= window.lo_ev && u <= window.hi_ev) out.values[i] = spectrum.values[i];
  }
  const double a = out.integral();
  if (!(a > 0.0)) throw NoPeakError("first-peak window holds no signal");
  out *= 1.0 / a;
  return out;
}

constexpr double exact_match_ratio = 1e-20;

ImpactFit fit_impact_parameter(const GridFunction& first_peak, const PqpFamily& family, const GridFunction& zlp,
                               FitWindow window) {
  if (family.is_fixed()) throw RangeError("impact-parameter fit needs an f_PQP family over x0");
  if (family.x0_grid().step() > max_family_spacing_nm + 1e-9) {
    throw RangeError(fmt::format("family spacing {} nm is coarser than {} nm", family.x0_grid().step(),
                                 max_family_spacing_nm));
  }
  const auto& grid = family.loss_grid();
  const auto target = first_peak_shape(on_family_grid(first_peak, grid), window);
  const auto f0 = unit_area(on_family_grid(zlp, grid));
  const auto& members = family.members();
  std::vector<double> d2(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto shape = first_peak_shape(eels::convolve(members[i], f0), window);
    double acc = 0.0;
    for (std::size_t k = 0; k < shape.size(); ++k) acc += std::pow(shape.values[k] - target.values[k], 2);
    d2[i] = acc * grid.step();
  }
  const auto ib = static_cast<std::size_t>(std::min_element(d2.begin(), d2.end()) - d2.begin());
  ImpactFit fit;
  fit.best_index = ib;
  fit.distance = std::sqrt(d2[ib]);
  fit.x0_nm = family.x0_grid()[ib];
  if (members.size() < 3) return fit;
  // Vertex of the parabola through the best member and its neighbours.
  const std::size_t c = std::clamp<std::size_t>(ib, 1, members.size() - 2);
  const double dm = d2[c - 1], d0 = d2[c], dp = d2[c + 1];
  if (d2[ib] <= exact_match_ratio * std::min(dm, dp)) return fit;
  const double den = dm - 2.0 * d0 + dp;
  if (den > 0.0) {
    const double off = std::clamp(0.5 * (dm - dp) / den, -1.0, 1.0);
    fit.x0_nm = family.x0_grid()[c] + off * family.x0_grid().step();
  }
  return fit;
}

}  // namespace cherenkov::inversion
