#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "cherenkov/errors.hpp"

namespace cherenkov {

/// Uniform 1D grid x_i = start + i * step, i in [0, size).
class UniformGrid {
public:
  UniformGrid() = default;
  UniformGrid(double start, double step, std::size_t size) : start_(start), step_(step), size_(size) {
    if (!(step > 0.0) || size == 0 || !std::isfinite(start)) {
      throw RangeError("uniform grid needs step > 0 and at least one point");
    }
  }

  /// Grid spanning [lo, hi] inclusive with the given number of points.
  static UniformGrid linspace(double lo, double hi, std::size_t points) {
    if (points < 2 || !(hi > lo)) throw RangeError("linspace needs hi > lo and >= 2 points");
    return {lo, (hi - lo) / static_cast<double>(points - 1), points};
  }

  /// Grid from lo with spacing step, extended to the last point not beyond hi
  /// (within a 1e-9 step tolerance).
  static UniformGrid from_step(double lo, double hi, double step) {
    if (!(hi > lo) || !(step > 0.0)) throw RangeError("from_step needs hi > lo and step > 0");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    return {lo, step, n};
  }

  double start() const { return start_; }
  double step() const { return step_; }
  std::size_t size() const { return size_; }
  double back() const { return value(size_ - 1); }
  double value(std::size_t i) const { return start_ + static_cast<double>(i) * step_; }
  double operator[](std::size_t i) const { return value(i); }

  std::vector<double> values() const {
    std::vector<double> out(size_);
    for (std::size_t i = 0; i < size_; ++i) out[i] = value(i);
    return out;
  }

  /// Nearest grid index for x, clamped to the grid.
  std::size_t nearest(double x) const {
    const double r = std::round((x - start_) / step_);
    if (r <= 0.0) return 0;
    if (r >= static_cast<double>(size_ - 1)) return size_ - 1;
    return static_cast<std::size_t>(r);
  }

  bool contains(double x) const { return x >= start_ - 1e-12 * step_ && x <= back() + 1e-12 * step_; }

  /// True when both grids share spacing and origin to the given relative tolerance.
  bool same_as(const UniformGrid& other, double rel_tol = 1e-12) const {
    const double scale = std::max(std::abs(step_), std::abs(other.step_));
    return size_ == other.size_ && std::abs(step_ - other.step_) <= rel_tol * scale &&
           std::abs(start_ - other.start_) <= 1e-9 * scale;
  }

  bool operator==(const UniformGrid&) const = default;

private:
  double start_ = 0.0;
  double step_ = 1.0;
  std::size_t size_ = 1;
};

/// Samples of a function on a uniform grid. Integrals are Riemann sums
/// (sum * step), the convention every density in the toolkit is normalized by.
struct GridFunction {
  UniformGrid grid;
  std::vector<double> values;

  GridFunction() = default;
  GridFunction(UniformGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw GridMismatchError("grid function size does not match its grid");
  }
  explicit GridFunction(UniformGrid g) : grid(g), values(g.size(), 0.0) {}

  std::size_t size() const { return values.size(); }
  double step() const { return grid.step(); }

  double integral() const { return std::accumulate(values.begin(), values.end(), 0.0) * grid.step(); }

  /// Integral over channels whose abscissa lies in [lo, hi).
  double integral(double lo, double hi) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double x = grid.value(i);
      if (x >= lo && x < hi) acc += values[i];
    }
    return acc * grid.step();
  }

  double mean() const {
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      m0 += values[i];
      m1 += values[i] * grid.value(i);
    }
    return m1 / m0;
  }

  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (values[i] > values[best]) best = i;
    }
    return best;
  }

  GridFunction& operator*=(double a) {
    for (auto& v : values) v *= a;
    return *this;
  }
};

/// L1 distance between two grid functions on the same grid.
inline double l1_distance(const GridFunction& a, const GridFunction& b) {
  if (!a.grid.same_as(b.grid)) throw GridMismatchError("l1_distance: grids differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.values[i] - b.values[i]);
  return acc * a.step();
}

/// Linear interpolation of f at x; zero outside the grid.
inline double interpolate(const GridFunction& f, double x) {
  const double t = (x - f.grid.start()) / f.grid.step();
  if (t < 0.0 || t > static_cast<double>(f.size() - 1)) return 0.0;
  const auto i = static_cast<std::size_t>(std::floor(t));
  if (i + 1 >= f.size()) return f.values.back();
  const double w = t - static_cast<double>(i);
  return (1.0 - w) * f.values[i] + w * f.values[i + 1];
}

/// Resample f onto another grid by linear interpolation (zero outside).
inline GridFunction resample(const GridFunction& f, const UniformGrid& target) {
  GridFunction out(target);
  for (std::size_t i = 0; i < target.size(); ++i) out.values[i] = interpolate(f, target.value(i));
  return out;
}

}  // namespace cherenkov
