#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cherenkov/eels_model.hpp"
#include "cherenkov/grid.hpp"

namespace cherenkov::quantum {

using Complex = std::complex<double>;

/// Smallest photon cutoff with a Poisson tail below 1e-6: ceil(|g|^2 + 8|g| + 8).
std::size_t required_photons(double g_abs2);

/// Rungs needed to hold a K-rung comb after emitting up to n_max photons.
std::size_t required_rungs(std::size_t n_max, std::size_t comb_width);

/// Index of the first comb rung.
inline constexpr std::size_t comb_offset = 2;

/// Joint basis |j, n>, j in [0, J) electron rung (energy E_ref - j hbar w0),
/// n in [0, N] photon number; flat index j (N + 1) + n.
struct Truncation {
  std::size_t rungs = 0;    // J
  std::size_t photons = 0;  // N, the highest photon number kept

  std::size_t dim() const { return rungs * (photons + 1); }
  std::size_t index(std::size_t j, std::size_t n) const { return j * (photons + 1) + n; }
};

/// Generator G = g b a^dagger - g* b^dagger a on the truncated space, with
/// b |j> = |j + 1> (loss of one quantum) and a^dagger |n> = sqrt(n + 1) |n + 1>.
Eigen::MatrixXcd generator(Complex g, const Truncation& t);

/// diag(j - n); [G, J - N] = 0.
Eigen::VectorXd conserved_charge(const Truncation& t);

/// S = exp(G). G is block diagonal in m = j - n; each block is a tridiagonal
/// anti-Hermitian matrix exponentiated exactly through the eigenvectors of iG.
class ScatteringMatrix {
public:
  ScatteringMatrix(Complex g, Truncation t);

  Complex coupling() const { return g_; }
  const Truncation& truncation() const { return trunc_; }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& psi) const;
  Eigen::MatrixXcd dense() const;

private:
  struct Block {
    std::vector<std::size_t> states;  // flat indices, ordered by photon number
    Eigen::MatrixXcd u;
  };
  Complex g_;
  Truncation trunc_;
  std::vector<Block> blocks_;
};

ScatteringMatrix build_scattering_matrix(Complex g, std::size_t rungs, std::size_t photons);

/// Coherent superposition of K adjacent rungs.
struct ElectronPreparation {
  std::vector<Complex> comb;  // c_k, sum |c_k|^2 = 1

  static ElectronPreparation single_rung();
  /// Flat amplitudes, zero relative phase.
  static ElectronPreparation flat_comb(std::size_t k);
  void validate() const;
  std::size_t width() const { return comb.size(); }
  /// Mean comb offset sum_k |c_k|^2 k.
  double mean_offset() const;
};

struct JointState {
  Eigen::MatrixXcd amplitudes;  // rows j, columns n
  Truncation trunc;
  std::size_t first_rung = comb_offset;  // rung of c_0
  double mean_initial_rung = 0.0;

  double norm2() const { return amplitudes.squaredNorm(); }
  double mean_rung() const;
  double mean_photons() const;
};

inline constexpr double truncation_tolerance = 1e-6;

/// A = S (comb x |0>). Throws TruncationError when more than 1e-6 of the
/// population sits on the last photon number or the last rung.
JointState evolve(const ElectronPreparation& prep, const ScatteringMatrix& s);

/// Truncation and S sized for coupling g and the preparation, then evolve.
JointState simulate(Complex g, const ElectronPreparation& prep, std::size_t extra_photons = 0);

/// rho[n][m] = sum_j A[j][n] conj(A[j][m]).
Eigen::MatrixXcd photon_marginal(const JointState& state);

/// Rung populations P(j) = sum_n |A[j][n]|^2.
Eigen::VectorXd rung_populations(const JointState& state);

/// EELS of the final electron: rung j sits at loss (j - mean initial rung) hbar w0,
/// deposited linearly onto the grid and convolved with the ZLP.
GridFunction electron_marginal(const JointState& state, const eels::ZLPModel& zlp, double photon_energy_ev,
                               const UniformGrid& loss_grid);

double trace(const Eigen::MatrixXcd& rho);
double purity(const Eigen::MatrixXcd& rho);
double max_off_diagonal(const Eigen::MatrixXcd& rho);
double hermiticity_error(const Eigen::MatrixXcd& rho);
double min_eigenvalue(const Eigen::MatrixXcd& rho);

/// Truncated coherent-state coefficients exp(-|a|^2/2) a^n / sqrt(n!), n = 0..N.
Eigen::VectorXcd coherent_state(Complex alpha, std::size_t photons);

/// <alpha| rho |alpha>. Needs |alpha|^2 <= N / 4.
double coherent_fidelity(const Eigen::MatrixXcd& rho, Complex alpha);

struct CoherentFit {
  Complex alpha{0.0, 0.0};
  double fidelity = 0.0;
};

/// Best phase at fixed |alpha|: 720-point scan plus golden-section refinement.
CoherentFit best_coherent_fit(const Eigen::MatrixXcd& rho, double magnitude);

/// Also scans |alpha| over [0, sqrt(N/4)].
CoherentFit best_coherent_fit(const Eigen::MatrixXcd& rho);

}  // namespace cherenkov::quantum
