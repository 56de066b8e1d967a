#include <algorithm>
#include <cstring>
#include <mutex>

#include <fftw3.h>

#include "cherenkov/eels_model.hpp"
#include "fft.hpp"

namespace cherenkov::fft {

namespace {

// Guards FFTW plan creation and destruction.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<Complex> forward(const std::vector<double>& x, std::size_t n) {
  const std::size_t half = n / 2 + 1;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(half);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  std::fill(in, in + n, 0.0);
  std::copy_n(x.begin(), std::min(n, x.size()), in);
  fftw_execute(plan);
  std::vector<Complex> result(half);
  for (std::size_t k = 0; k < half; ++k) result[k] = {out[k][0], out[k][1]};
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return result;
}

std::vector<double> inverse(const std::vector<Complex>& spectrum, std::size_t n) {
  const std::size_t half = n / 2 + 1;
  fftw_complex* in = fftw_alloc_complex(half);
  double* out = fftw_alloc_real(n);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  for (std::size_t k = 0; k < half; ++k) {
    in[k][0] = spectrum[k].real();
    in[k][1] = spectrum[k].imag();
  }
  fftw_execute(plan);
  std::vector<double> result(out, out + n);
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : result) v *= scale;
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return result;
}

}  // namespace cherenkov::fft

namespace cherenkov::eels::detail {

std::vector<double> fft_convolve_full(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t len = a.size() + b.size() - 1;
  const std::size_t n = fft::next_pow2(len);
  auto fa = fft::forward(a, n);
  const auto fb = fft::forward(b, n);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  auto full = fft::inverse(fa, n);
  full.resize(len);
  return full;
}

}  // namespace cherenkov::eels::detail
