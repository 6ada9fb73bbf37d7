// The torus B = [0, sqrt2) x [0, 1) and its dyadic box lattices.
//
// Level n tiles B with 2^ceil(n/2) columns and 2^floor(n/2) rows, so each
// level-(n+1) box is one half of a level-n box split across its long axis.

#ifndef TURBMIX_GEOMETRY_HPP
#define TURBMIX_GEOMETRY_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace turbmix {

inline constexpr double kWidth = std::numbers::sqrt2;
inline constexpr double kHeight = 1.0;

enum class Axis { X = 0, Y = 1 };

inline Axis other(Axis a) { return a == Axis::X ? Axis::Y : Axis::X; }

/// Reduces v into [0, period).
inline double wrap(double v, double period) {
  if (v >= 0.0 && v < period) return v;
  if (v < 0.0 && v >= -period) {
    const double r = v + period;
    return r < period ? r : 0.0;
  }
  if (v >= period && v < 2.0 * period) return v - period;
  double r = std::fmod(v, period);
  if (r < 0.0) r += period;
  if (r >= period) r = 0.0;
  return r;
}

/// Signed representative of v modulo period in [-period/2, period/2).
inline double wrap_signed(double v, double period) {
  double r = wrap(v + 0.5 * period, period) - 0.5 * period;
  return r;
}

struct TorusPoint {
  double x = 0.0;
  double y = 0.0;

  TorusPoint() = default;
  TorusPoint(double px, double py) : x(wrap(px, kWidth)), y(wrap(py, kHeight)) {}

  double operator[](Axis a) const { return a == Axis::X ? x : y; }
};

inline double torus_dist(const TorusPoint& p, const TorusPoint& q) {
  const double dx = wrap_signed(p.x - q.x, kWidth);
  const double dy = wrap_signed(p.y - q.y, kHeight);
  return std::hypot(dx, dy);
}

struct BoxDims {
  double width;
  double height;

  double along(Axis a) const { return a == Axis::X ? width : height; }
};

inline int columns_exp(int n) { return (n + 1) / 2; }
inline int rows_exp(int n) { return n / 2; }

inline BoxDims box_dims(int n) {
  if (n < 0) throw std::invalid_argument("box_dims: negative level");
  return {kWidth * std::exp2(-columns_exp(n)), kHeight * std::exp2(-rows_exp(n))};
}

/// Axis across which a level-n box is split into its two children.
inline Axis long_axis(int n) { return (n % 2 == 0) ? Axis::X : Axis::Y; }

struct BoxId {
  int level = 0;
  std::int64_t ix = 0;
  std::int64_t iy = 0;

  friend bool operator==(const BoxId&, const BoxId&) = default;
};

inline BoxId box_index(const TorusPoint& p, int n) {
  const BoxDims d = box_dims(n);
  const std::int64_t nx = std::int64_t{1} << columns_exp(n);
  const std::int64_t ny = std::int64_t{1} << rows_exp(n);
  auto ix = static_cast<std::int64_t>(std::floor(p.x / d.width));
  auto iy = static_cast<std::int64_t>(std::floor(p.y / d.height));
  if (ix >= nx) ix = nx - 1;
  if (iy >= ny) iy = ny - 1;
  return {n, ix, iy};
}

inline TorusPoint box_origin(const BoxId& b) {
  const BoxDims d = box_dims(b.level);
  return {static_cast<double>(b.ix) * d.width, static_cast<double>(b.iy) * d.height};
}

}  // namespace turbmix

#endif  // TURBMIX_GEOMETRY_HPP
