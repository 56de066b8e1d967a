#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace cherenkov::fft {

using Complex = std::complex<double>;

std::size_t next_pow2(std::size_t n);

/// Real-to-half-complex forward transform of x zero-padded to length n.
std::vector<Complex> forward(const std::vector<double>& x, std::size_t n);

/// Inverse of forward(), normalized so inverse(forward(x, n), n) == x.
std::vector<double> inverse(const std::vector<Complex>& spectrum, std::size_t n);

}  // namespace cherenkov::fft
