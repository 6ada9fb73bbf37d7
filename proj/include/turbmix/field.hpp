// Cell-averaged scalar fields on the torus and the dyadic box projections.

#ifndef TURBMIX_FIELD_HPP
#define TURBMIX_FIELD_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "turbmix/geometry.hpp"

namespace turbmix {

/// A 2^q x 2^q array of cell averages over cells of size (sqrt2/2^q, 1/2^q).
/// Storage is row-major: value(ix, iy) = data[iy * n + ix].
class ScalarField {
 public:
  ScalarField() = default;

  explicit ScalarField(int q, double fill = 0.0) : q_(q) {
    if (q < 1 || q > 14) throw std::invalid_argument("ScalarField: resolution exponent out of range");
    n_ = std::size_t{1} << q;
    values_.assign(n_ * n_, fill);
  }

  int q() const { return q_; }
  std::size_t n() const { return n_; }
  std::size_t size() const { return values_.size(); }
  double dx() const { return kWidth / static_cast<double>(n_); }
  double dy() const { return kHeight / static_cast<double>(n_); }
  double cell_area() const { return dx() * dy(); }

  double& operator()(std::size_t ix, std::size_t iy) { return values_[iy * n_ + ix]; }
  double operator()(std::size_t ix, std::size_t iy) const { return values_[iy * n_ + ix]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double cell_center_x(std::size_t ix) const { return (static_cast<double>(ix) + 0.5) * dx(); }
  double cell_center_y(std::size_t iy) const { return (static_cast<double>(iy) + 0.5) * dy(); }

  bool same_shape(const ScalarField& o) const { return q_ == o.q_; }

  ScalarField& operator+=(const ScalarField& o) {
    require_shape(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    require_shape(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
  }
  ScalarField& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }
  ScalarField& operator+=(double a) {
    for (double& v : values_) v += a;
    return *this;
  }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
  friend ScalarField operator+(ScalarField a, double s) { return a += s; }
  friend ScalarField operator-(ScalarField a, double s) { return a += -s; }

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  void require_shape(const ScalarField& o) const {
    if (!same_shape(o)) throw std::invalid_argument("ScalarField: shape mismatch");
  }

  int q_ = 0;
  std::size_t n_ = 0;
  std::vector<double> values_;
};

inline double integral(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s * f.cell_area();
}

inline double mean(const ScalarField& f) { return integral(f) / (kWidth * kHeight); }

inline double lp_norm(const ScalarField& f, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
  }
  if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
  double s = 0.0;
  if (p == 1.0) {
    for (double v : f.values()) s += std::abs(v);
    return s * f.cell_area();
  }
  if (p == 2.0) {
    for (double v : f.values()) s += v * v;
    return std::sqrt(s * f.cell_area());
  }
  for (double v : f.values()) s += std::pow(std::abs(v), p);
  return std::pow(s * f.cell_area(), 1.0 / p);
}

/// ||f||_{L^2}^2.
inline double energy(const ScalarField& f) {
  const double l2 = lp_norm(f, 2.0);
  return l2 * l2;
}

/// Sum over grid edges of |jump| times edge length, periodic.
inline double discrete_tv(const ScalarField& f) {
  const std::size_t n = f.n();
  double vertical = 0.0;    // edges between horizontal neighbours
  double horizontal = 0.0;  // edges between vertical neighbours
  for (std::size_t iy = 0; iy < n; ++iy) {
    const std::size_t iy1 = (iy + 1) % n;
    for (std::size_t ix = 0; ix < n; ++ix) {
      const std::size_t ix1 = (ix + 1) % n;
      vertical += std::abs(f(ix1, iy) - f(ix, iy));
      horizontal += std::abs(f(ix, iy1) - f(ix, iy));
    }
  }
  return vertical * f.dy() + horizontal * f.dx();
}

/// Grid cells spanned by one level-n box; levels >= 2q are single cells.
struct BoxCells {
  std::size_t nx;
  std::size_t ny;
};

inline BoxCells box_cells(int q, int n) {
  if (n < 0) throw std::invalid_argument("box_cells: negative level");
  const int cx = std::min(columns_exp(n), q);
  const int cy = std::min(rows_exp(n), q);
  return {std::size_t{1} << (q - cx), std::size_t{1} << (q - cy)};
}

/// Sums over every level-n box, accumulated pairwise up the dyadic hierarchy
/// from single cells.  Pairwise accumulation makes nested projections agree
/// bit for bit.  Result is row-major over the (2^ceil(n/2)) x (2^floor(n/2))
/// box array.
inline std::vector<double> box_sums(const ScalarField& f, int n) {
  const int q = f.q();
  const int top = 2 * q;
  n = std::min(n, top);
  std::vector<double> cur(f.values().begin(), f.values().end());
  std::size_t cols = f.n();
  std::size_t rows = f.n();
  for (int level = top - 1; level >= n; --level) {
    // Children of level-`level` boxes are halves across long_axis(level).
    std::vector<double> next;
    if (long_axis(level) == Axis::X) {
      const std::size_t ncols = cols / 2;
      next.resize(ncols * rows);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ncols; ++c)
          next[r * ncols + c] = cur[r * cols + 2 * c] + cur[r * cols + 2 * c + 1];
      cols = ncols;
    } else {
      const std::size_t nrows = rows / 2;
      next.resize(cols * nrows);
      for (std::size_t r = 0; r < nrows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          next[r * cols + c] = cur[2 * r * cols + c] + cur[(2 * r + 1) * cols + c];
      rows = nrows;
    }
    cur.swap(next);
  }
  return cur;
}

/// Replaces each cell with the mean over its level-n box.  Cell-averaged
/// fields are already constant on boxes of level >= 2q, so those levels act
/// as the identity.
inline ScalarField project(const ScalarField& f, int n) {
  if (n < 0) throw std::invalid_argument("project: negative level");
  if (n >= 2 * f.q()) return f;
  const BoxCells bc = box_cells(f.q(), n);
  const std::vector<double> sums = box_sums(f, n);
  const std::size_t cols = f.n() / bc.nx;
  const double count = static_cast<double>(bc.nx * bc.ny);
  ScalarField out(f.q());
  for (std::size_t iy = 0; iy < f.n(); ++iy) {
    const std::size_t by = iy / bc.ny;
    for (std::size_t ix = 0; ix < f.n(); ++ix) {
      out(ix, iy) = sums[by * cols + ix / bc.nx] / count;
    }
  }
  return out;
}

/// Indicator of {x < sqrt2/2}.
inline ScalarField theta0(int q) {
  ScalarField f(q);
  const std::size_t half = f.n() / 2;
  for (std::size_t iy = 0; iy < f.n(); ++iy)
    for (std::size_t ix = 0; ix < half; ++ix) f(ix, iy) = 1.0;
  return f;
}

/// (a1 - a0) 1_{first half} + a0 on the given box, zero elsewhere.  The first
/// half is the lower half along the box's long axis.
inline ScalarField two_cell(int q, double a0, double a1, const BoxId& box) {
  if (box.level >= 2 * q) throw std::invalid_argument("two_cell: box not resolved by grid");
  ScalarField f(q);
  const BoxCells bc = box_cells(q, box.level);
  const std::size_t x0 = static_cast<std::size_t>(box.ix) * bc.nx;
  const std::size_t y0 = static_cast<std::size_t>(box.iy) * bc.ny;
  const Axis split = long_axis(box.level);
  for (std::size_t ly = 0; ly < bc.ny; ++ly) {
    for (std::size_t lx = 0; lx < bc.nx; ++lx) {
      const bool first = (split == Axis::X) ? (lx < bc.nx / 2) : (ly < bc.ny / 2);
      f(x0 + lx, y0 + ly) = first ? a1 : a0;
    }
  }
  return f;
}

inline ScalarField two_cell(int q, double a0, double a1) { return two_cell(q, a0, a1, BoxId{0, 0, 0}); }

}  // namespace turbmix

#endif  // TURBMIX_FIELD_HPP
