#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cherenkov/eels_model.hpp"
#include "cherenkov/grid.hpp"
#include "cherenkov/materials.hpp"
#include "cherenkov/spectrum.hpp"

namespace cherenkov::inversion {

struct MeasuredSpectrum {
  GridFunction counts;  // channel energies (eV) and nonnegative counts
  double kinetic_kev = 0.0;
  double x0_nm = 0.0;
  double lmax_um = 0.0;
  int repetition = 0;

  void validate() const;
};

/// Two-column CSV (energy_eV, counts). '#' lines may carry kev=, x0_nm=,
/// lmax_um=, rep= entries. Channels must be uniformly spaced.
MeasuredSpectrum load_measured(const std::filesystem::path& path);

struct ZlpSubtraction {
  GridFunction residual;       // unit-area measurement minus the scaled, aligned ZLP
  GridFunction aligned_zlp;    // scaled reference as subtracted
  double shift_ev = 0.0;       // applied to the reference
  double zlp_scale = 0.0;      // least-squares amplitude of the reference
  double zlp_sigma_ev = 0.0;
};

/// Normalizes both spectra to unit area, aligns the reference on the
/// measurement's zero-loss maximum by cross-correlation, fits its amplitude
/// over +-1 FWHM of the peak and subtracts. Negative residuals are clipped to
/// zero only for u > 3 sigma_ZLP.
ZlpSubtraction normalize_and_subtract_zlp(const MeasuredSpectrum& meas, const MeasuredSpectrum& zlp_ref);

struct PeakFit {
  double center_ev = 0.0;
  double sigma_ev = 0.0;
  double amplitude = 0.0;
  double residual_rms = 0.0;
};

struct FitWindow {
  double lo_ev = 1.5;
  double hi_ev = 2.8;
};

/// Least-squares Gaussian on the channels of the window. Throws NoPeakError
/// when the maximum is at the window edge or below 3x the channel noise.
PeakFit fit_first_peak(const GridFunction& residual, FitWindow window = {});

struct PeakAverage {
  double mean_ev = 0.0;
  double sem_ev = 0.0;
  std::size_t count = 0;
};

/// Unweighted mean of centers and its standard error sd / sqrt(n).
PeakAverage average_peaks(const std::vector<PeakFit>& fits);

/// Normalized loss spectra f_PQP(u; x0) on the loss grid for a set of impact
/// parameters; intermediate x0 are interpolated linearly between members.
class PqpFamily {
public:
  PqpFamily(UniformGrid x0_grid, std::vector<GridFunction> members);

  /// Computes every member from the loss model.
  static PqpFamily compute(const materials::LayerStack& stack, const spectrum::ElectronKinematics& kin,
                           const spectrum::BeamGeometry& beam, const UniformGrid& x0_grid,
                           const UniformGrid& energy_grid, const UniformGrid& loss_grid,
                           const spectrum::SpectrumOptions& options = {});

  /// Single fixed shape; at() ignores its argument.
  static PqpFamily fixed(GridFunction f_pqp);

  const UniformGrid& x0_grid() const { return x0_grid_; }
  const std::vector<GridFunction>& members() const { return members_; }
  const UniformGrid& loss_grid() const { return members_.front().grid; }
  bool is_fixed() const { return members_.size() == 1; }
  double x0_min() const { return x0_grid_.start(); }
  double x0_max() const { return x0_grid_.back(); }

  GridFunction at(double x0_nm) const;

private:
  UniformGrid x0_grid_;
  std::vector<GridFunction> members_;
};

enum class FitMode { joint, fixed_x0, fixed_pqp };

std::string to_string(FitMode mode);
FitMode parse_fit_mode(const std::string& text);

struct FitBounds {
  double lambda_max = 5.0;
  double x0_min_nm = 5.0;
  double x0_max_nm = 200.0;
};

struct FitOptions {
  FitMode mode = FitMode::joint;
  double fixed_x0_nm = 40.0;          // used by FitMode::fixed_x0
  FitBounds bounds{};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
  double simplex_tolerance = 1e-4;    // characteristic simplex size, scaled units
  std::size_t max_iterations = 4000;
  double u_min_ev = -1.0;             // channels below are pure ZLP tail
  unsigned threads = 1;
};

struct FitResult {
  double lambda_hat = 0.0;
  double sp_hat = 0.0;      // s p
  double x0_hat_nm = 0.0;
  double g_qu_hat = 0.0;
  double residual_norm = 0.0;   // sqrt of the objective
  double lambda_halfwidth = 0.0;
  double sp_halfwidth = 0.0;
  double x0_halfwidth_nm = 0.0;
  std::size_t best_start = 0;
  std::size_t converged_starts = 0;
  std::size_t channels = 0;
  FitMode mode = FitMode::joint;
  double null_objective = 0.0;  // objective of the ZLP-only model
  bool null_model = false;      // ZLP-only model preferred; lambda_hat and g_qu_hat set to 0
};

/// Least squares between forward_eels(lambda, s p; f0, f_PQP(x0)) and the
/// unit-area measurement over u >= u_min, bounded to lambda in [0, 5],
/// s p in [0, 1], x0 in [5, 200] nm. One simplex descent per seed.
/// The model is renormalized to unit area on the grid like the measurement.
/// When s p -> 0 leaves lambda unidentified, the ZLP-only model wins by AIC
/// and lambda_hat is reported as 0.
FitResult fit_quantum_coupling(const GridFunction& measured, const PqpFamily& family, const GridFunction& zlp,
                               const FitOptions& options = {});

/// Sum of squared residuals of the unit-area model at the given parameters over u >= u_min.
double fit_objective(const GridFunction& measured, const PqpFamily& family, const GridFunction& zlp, double lambda,
                     double sp, double x0_nm, double u_min_ev = -1.0);

struct ImpactFit {
  double x0_nm = 0.0;
  double distance = 0.0;       // L2 distance at the best grid member
  std::size_t best_index = 0;
};

/// Window-normalized first-lobe shape used for impact-parameter matching.
GridFunction first_peak_shape(const GridFunction& spectrum, FitWindow window);

/// Compares the measured first-lobe shape with f_PQP(x0) * ZLP over the
/// family; parabolic refinement across the three best neighbouring members.
/// Requires family spacing <= 5 nm.
ImpactFit fit_impact_parameter(const GridFunction& first_peak, const PqpFamily& family, const GridFunction& zlp,
                               FitWindow window = {});

inline constexpr double max_family_spacing_nm = 5.0;

}  // namespace cherenkov::inversion
