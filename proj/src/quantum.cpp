#include "cherenkov/quantum.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "cherenkov/errors.hpp"

namespace cherenkov::quantum {

std::size_t required_photons(double g_abs2) {
  if (!(g_abs2 >= 0.0) || !std::isfinite(g_abs2)) throw RangeError("|g|^2 must be finite and non-negative");
  return static_cast<std::size_t>(std::ceil(g_abs2 + 8.0 * std::sqrt(g_abs2) + 8.0));
}

std::size_t required_rungs(std::size_t n_max, std::size_t comb_width) { return comb_offset + comb_width + n_max + 4; }

Eigen::MatrixXcd generator(Complex g, const Truncation& t) {
  const auto d = static_cast<Eigen::Index>(t.dim());
  Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(d, d);
  for (std::size_t j = 0; j + 1 < t.rungs; ++j) {
    for (std::size_t n = 0; n < t.photons; ++n) {
      const double amp = std::sqrt(static_cast<double>(n + 1));
      const auto lo = static_cast<Eigen::Index>(t.index(j, n));
      const auto up = static_cast<Eigen::Index>(t.index(j + 1, n + 1));
      gen(up, lo) += g * amp;
      gen(lo, up) -= std::conj(g) * amp;
    }
  }
  return gen;
}

Eigen::VectorXd conserved_charge(const Truncation& t) {
  Eigen::VectorXd q(static_cast<Eigen::Index>(t.dim()));
  for (std::size_t j = 0; j < t.rungs; ++j) {
    for (std::size_t n = 0; n <= t.photons; ++n) {
      q(static_cast<Eigen::Index>(t.index(j, n))) = static_cast<double>(j) - static_cast<double>(n);
    }
  }
  return q;
}

ScatteringMatrix::ScatteringMatrix(Complex g, Truncation t) : g_(g), trunc_(t) {
  if (t.rungs < 2) throw RangeError("scattering matrix needs at least two rungs");
  const auto j_count = static_cast<long>(t.rungs);
  const auto n_count = static_cast<long>(t.photons);
  const Complex iu{0.0, 1.0};
  for (long m = -n_count; m < j_count; ++m) {
    Block b;
    for (long n = std::max(0L, -m); n <= n_count && m + n < j_count; ++n) {
      b.states.push_back(t.index(static_cast<std::size_t>(m + n), static_cast<std::size_t>(n)));
    }
    const auto size = static_cast<Eigen::Index>(b.states.size());
    if (size == 0) continue;
    // Photon numbers along the block are consecutive starting at n0.
    const long n0 = std::max(0L, -m);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(size, size);
    for (Eigen::Index k = 0; k + 1 < size; ++k) {
      const double amp = std::sqrt(static_cast<double>(n0 + k + 1));
      h(k + 1, k) = iu * g * amp;
      h(k, k + 1) = std::conj(h(k + 1, k));
    }
    // exp(G) = exp(-i H) with H = i G Hermitian.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    const Eigen::VectorXcd phases = (-iu * es.eigenvalues().cast<Complex>()).array().exp();
    b.u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    blocks_.push_back(std::move(b));
  }
}

Eigen::VectorXcd ScatteringMatrix::apply(const Eigen::VectorXcd& psi) const {
  if (psi.size() != static_cast<Eigen::Index>(trunc_.dim())) throw GridMismatchError("state size mismatch");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
  for (const auto& b : blocks_) {
    const auto size = static_cast<Eigen::Index>(b.states.size());
    Eigen::VectorXcd local(size);
    for (Eigen::Index k = 0; k < size; ++k) local(k) = psi(static_cast<Eigen::Index>(b.states[k]));
    const Eigen::VectorXcd res = b.u * local;
    for (Eigen::Index k = 0; k < size; ++k) out(static_cast<Eigen::Index>(b.states[k])) = res(k);
  }
  return out;
}

Eigen::MatrixXcd ScatteringMatrix::dense() const {
  const auto d = static_cast<Eigen::Index>(trunc_.dim());
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(d, d);
  for (const auto& b : blocks_) {
    for (std::size_t r = 0; r < b.states.size(); ++r) {
      for (std::size_t c = 0; c < b.states.size(); ++c) {
        s(static_cast<Eigen::Index>(b.states[r]), static_cast<Eigen::Index>(b.states[c])) =
            b.u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      }
    }
  }
  return s;
}

ScatteringMatrix build_scattering_matrix(Complex g, std::size_t rungs, std::size_t photons) {
  if (photons < required_photons(std::norm(g))) {
    throw TruncationError(fmt::format("N = {} photons is too small for |g|^2 = {} (need {})", photons, std::norm(g),
                                      required_photons(std::norm(g))));
  }
  return ScatteringMatrix(g, Truncation{rungs, photons});
}

ElectronPreparation ElectronPreparation::single_rung() { return {{Complex(1.0, 0.0)}}; }

ElectronPreparation ElectronPreparation::flat_comb(std::size_t k) {
  if (k == 0) throw RangeError("comb needs at least one rung");
  return {std::vector<Complex>(k, Complex(1.0 / std::sqrt(static_cast<double>(k)), 0.0))};
}

void ElectronPreparation::validate() const {
  if (comb.empty()) throw RangeError("empty electron preparation");
  double n = 0.0;
  for (const auto& c : comb) n += std::norm(c);
  if (std::abs(n - 1.0) > 1e-9) throw RangeError(fmt::format("comb weights have norm {} instead of 1", n));
}

double ElectronPreparation::mean_offset() const {
  double acc = 0.0;
  for (std::size_t k = 0; k < comb.size(); ++k) acc += std::norm(comb[k]) * static_cast<double>(k);
  return acc;
}

double JointState::mean_rung() const {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < amplitudes.rows(); ++j) acc += static_cast<double>(j) * amplitudes.row(j).squaredNorm();
  return acc;
}

double JointState::mean_photons() const {
  double acc = 0.0;
  for (Eigen::Index n = 0; n < amplitudes.cols(); ++n) acc += static_cast<double>(n) * amplitudes.col(n).squaredNorm();
  return acc;
}

JointState evolve(const ElectronPreparation& prep, const ScatteringMatrix& s) {
  prep.validate();
  const auto& t = s.truncation();
  if (comb_offset + prep.width() > t.rungs) throw TruncationError("comb does not fit in the rung ladder");
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(t.dim()));
  for (std::size_t k = 0; k < prep.width(); ++k) {
    psi(static_cast<Eigen::Index>(t.index(comb_offset + k, 0))) = prep.comb[k];
  }
  const Eigen::VectorXcd out = s.apply(psi);

  JointState st;
  st.trunc = t;
  st.first_rung = comb_offset;
  st.mean_initial_rung = static_cast<double>(comb_offset) + prep.mean_offset();
  st.amplitudes.resize(static_cast<Eigen::Index>(t.rungs), static_cast<Eigen::Index>(t.photons + 1));
  for (std::size_t j = 0; j < t.rungs; ++j) {
    for (std::size_t n = 0; n <= t.photons; ++n) {
      st.amplitudes(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) =
          out(static_cast<Eigen::Index>(t.index(j, n)));
    }
  }
  const double edge = st.amplitudes.col(st.amplitudes.cols() - 1).squaredNorm() +
                      st.amplitudes.row(st.amplitudes.rows() - 1).squaredNorm();
  if (edge > truncation_tolerance) {
    throw TruncationError(fmt::format("{:.3g} of the population reached the truncation edge (J = {}, N = {})", edge,
                                      t.rungs, t.photons));
  }
  return st;
}

JointState simulate(Complex g, const ElectronPreparation& prep, std::size_t extra_photons) {
  const std::size_t n = required_photons(std::norm(g)) + extra_photons;
  const std::size_t j = required_rungs(n, prep.width()) + extra_photons;
  return evolve(prep, ScatteringMatrix(g, Truncation{j, n}));
}

Eigen::MatrixXcd photon_marginal(const JointState& state) {
  return state.amplitudes.transpose() * state.amplitudes.conjugate();
}

Eigen::VectorXd rung_populations(const JointState& state) { return state.amplitudes.rowwise().squaredNorm(); }

GridFunction electron_marginal(const JointState& state, const eels::ZLPModel& zlp, double photon_energy_ev,
                               const UniformGrid& loss_grid) {
  if (!(photon_energy_ev > 0.0)) throw RangeError("photon energy must be positive");
  const auto pop = rung_populations(state);
  GridFunction sticks(loss_grid);
  const double step = loss_grid.step();
  for (Eigen::Index j = 0; j < pop.size(); ++j) {
    if (pop(j) == 0.0) continue;
    const double u = (static_cast<double>(j) - state.mean_initial_rung) * photon_energy_ev;
    const double t = (u - loss_grid.start()) / step;
    if (t < 0.0 || t > static_cast<double>(loss_grid.size() - 1)) continue;
    const auto i = static_cast<std::size_t>(std::floor(t));
    const double w = t - static_cast<double>(i);
    sticks.values[i] += (1.0 - w) * pop(j) / step;
    if (w > 0.0 && i + 1 < loss_grid.size()) sticks.values[i + 1] += w * pop(j) / step;
  }
  return eels::convolve(eels::make_zlp(loss_grid, zlp), sticks);
}

double trace(const Eigen::MatrixXcd& rho) { return rho.trace().real(); }

double purity(const Eigen::MatrixXcd& rho) { return (rho * rho).trace().real(); }

double max_off_diagonal(const Eigen::MatrixXcd& rho) {
  double m = 0.0;
  for (Eigen::Index r = 0; r < rho.rows(); ++r) {
    for (Eigen::Index c = 0; c < rho.cols(); ++c) {
      if (r != c) m = std::max(m, std::abs(rho(r, c)));
    }
  }
  return m;
}

double hermiticity_error(const Eigen::MatrixXcd& rho) { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

double min_eigenvalue(const Eigen::MatrixXcd& rho) {
  const Eigen::MatrixXcd h = 0.5 * (rho + rho.adjoint());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(h, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

Eigen::VectorXcd coherent_state(Complex alpha, std::size_t photons) {
  Eigen::VectorXcd c(static_cast<Eigen::Index>(photons + 1));
  const double pre = std::exp(-0.5 * std::norm(alpha));
  Complex term = pre;
  for (std::size_t n = 0; n <= photons; ++n) {
    if (n > 0) term *= alpha / std::sqrt(static_cast<double>(n));
    c(static_cast<Eigen::Index>(n)) = term;
  }
  return c;
}

double coherent_fidelity(const Eigen::MatrixXcd& rho, Complex alpha) {
  if (rho.rows() != rho.cols() || rho.rows() == 0) throw RangeError("density matrix must be square");
  const auto photons = static_cast<std::size_t>(rho.rows() - 1);
  if (std::norm(alpha) > static_cast<double>(photons) / 4.0 * (1.0 + 1e-12)) {
    throw TruncationError(fmt::format("|alpha|^2 = {} exceeds N/4 = {}", std::norm(alpha), photons / 4.0));
  }
  const auto c = coherent_state(alpha, photons);
  return std::clamp((c.adjoint() * rho * c)(0, 0).real(), 0.0, 1.0);
}

namespace {

template <typename F>
double golden_max(const F& f, double a, double b, double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

CoherentFit best_coherent_fit(const Eigen::MatrixXcd& rho, double magnitude) {
  constexpr int steps = 720;
  const double two_pi = 2.0 * M_PI;
  auto fid = [&](double phi) { return coherent_fidelity(rho, std::polar(magnitude, phi)); };
  double best_phi = 0.0, best = -1.0;
  for (int k = 0; k < steps; ++k) {
    const double phi = two_pi * k / steps;
    const double f = fid(phi);
    if (f > best) {
      best = f;
      best_phi = phi;
    }
  }
  const double h = two_pi / steps;
  const double phi = golden_max(fid, best_phi - h, best_phi + h, 1e-10);
  CoherentFit out{std::polar(magnitude, phi), fid(phi)};
  if (out.fidelity < best) out = {std::polar(magnitude, best_phi), best};
  return out;
}

CoherentFit best_coherent_fit(const Eigen::MatrixXcd& rho) {
  const double max_mag = std::sqrt(static_cast<double>(rho.rows() - 1) / 4.0);
  constexpr int steps = 60;
  CoherentFit best;
  best.fidelity = -1.0;
  double best_mag = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double mag = max_mag * k / steps;
    const auto f = best_coherent_fit(rho, mag);
    if (f.fidelity > best.fidelity) {
      best = f;
      best_mag = mag;
    }
  }
  const double h = max_mag / steps;
  const double mag = golden_max([&](double m) { return best_coherent_fit(rho, m).fidelity; },
                                std::max(0.0, best_mag - h), std::min(max_mag, best_mag + h), 1e-8);
  const auto refined = best_coherent_fit(rho, mag);
  return refined.fidelity >= best.fidelity ? refined : best;
}

}  // namespace cherenkov::quantum
