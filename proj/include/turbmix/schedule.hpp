// Time bookkeeping for the multiscale mixing cascade.
//
// The unit interval is cut into blocks [r^{i+1}, r^i), i = 0, 1, ...  Block i
// holds a sequence of mixing windows [s(i,j+1), s(i,j)) for j >= i (finer
// levels first in time) followed by a pause [s(i+1,i+1), s_inf(i)].  All
// times are evaluated from closed-form geometric sums.

#ifndef TURBMIX_SCHEDULE_HPP
#define TURBMIX_SCHEDULE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <variant>

namespace turbmix {

/// Sentinel for the accumulation point s(i, infinity).
inline constexpr int kLevelInfinity = std::numeric_limits<int>::max();

struct Active {
  int i;
  int j;
  double tau;  // local window time in [0, 1)
};

struct Pause {
  int i;
};

struct BelowTruncation {};

struct Terminal {};

using TimeLabel = std::variant<Active, Pause, BelowTruncation, Terminal>;

class Schedule {
 public:
  Schedule() : Schedule(0.5) {}

  explicit Schedule(double alpha, int i_max = 16, int j_max = 16, double M = 1.0)
      : alpha_(alpha), i_max_(i_max), j_max_(j_max), M_(M) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw std::invalid_argument("Schedule: alpha must lie in (0,1)");
    }
    const double c = (1.0 - alpha) / 2.0 * std::numbers::ln2;
    init_ratio(std::exp(-c), -std::expm1(-c));
  }

  /// Builds a schedule directly from the geometric ratio r in (0,1).  Used for
  /// the schematic r = 1/2 timeline, which corresponds to no admissible alpha.
  static Schedule from_ratio(double r, int i_max = 16, int j_max = 16, double M = 1.0) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("Schedule: ratio must lie in (0,1)");
    Schedule s;
    s.alpha_ = 1.0 + 2.0 * std::log2(r);
    s.i_max_ = i_max;
    s.j_max_ = j_max;
    s.M_ = M;
    s.init_ratio(r, 1.0 - r);
    return s;
  }

  double alpha() const { return alpha_; }
  double ratio() const { return r_; }
  double Z() const { return Z_; }
  int i_max() const { return i_max_; }
  int j_max() const { return j_max_; }
  double M() const { return M_; }

  double sigma(int j) const {
    if (j < 0) throw std::invalid_argument("sigma: negative level");
    return std::pow(r_, j) / Z_;
  }

  /// s(i, j) for 0 <= i <= j; j == kLevelInfinity gives s(i, infinity).
  double s_time(int i, int j) const {
    if (i < 0 || j < i) throw std::invalid_argument("s_time: requires 0 <= i <= j");
    const double ri = std::pow(r_, i);
    if (j == kLevelInfinity) return ri * (1.0 - 1.0 / (Z_ * one_minus_r_));
    if (j == i) return ri;
    const double rj = std::pow(r_, j);
    return ri - (ri - rj) / (Z_ * one_minus_r_);
  }

  double s_inf(int i) const { return s_time(i, kLevelInfinity); }

  /// 1/(8(M+7)).
  double gamma_param() const { return 1.0 / (8.0 * (M_ + 7.0)); }

  /// Locates t in the partition of [0, 1].  Windows with j > j_max are still
  /// labelled Active; the flow treats them as zero.
  TimeLabel classify(double t) const {
    if (t >= 1.0) return Terminal{};
    if (t <= 0.0) return BelowTruncation{};
    const double log_r = std::log(r_);
    int i = static_cast<int>(std::floor(std::log(t) / log_r));
    if (i < 0) i = 0;
    while (i > 0 && t >= s_time(i, i)) --i;
    while (t < s_time(i + 1, i + 1)) ++i;
    if (i > i_max_) return BelowTruncation{};
    if (t <= s_inf(i)) return Pause{i};
    // Invert s(i,j) = r^i - (r^i - r^j) / (Z (1-r)) for j.
    const double ri = std::pow(r_, i);
    const double rj = ri - (ri - t) * Z_ * one_minus_r_;
    int j = i;
    if (rj > 0.0) {
      j = std::max(i, static_cast<int>(std::floor(std::log(rj) / log_r)));
    } else {
      j = i + 4096;
    }
    constexpr int kMaxDepth = 4096;
    j = std::min(j, i + kMaxDepth);
    while (j > i && t >= s_time(i, j)) --j;
    while (j < i + kMaxDepth && t < s_time(i, j + 1)) ++j;
    const double start = s_time(i, j + 1);
    double tau = (t - start) / sigma(j);
    if (tau >= 1.0) tau = std::nextafter(1.0, 0.0);
    if (tau < 0.0) tau = 0.0;
    return Active{i, j, tau};
  }

  /// Earliest time at which the flow may be non-zero.
  double truncation_time() const { return s_time(i_max_ + 1, i_max_ + 1); }

 private:
  // 1 - r is passed separately so it keeps full relative precision for alpha near 1.
  void init_ratio(double r, double one_minus_r) {
    r_ = r;
    one_minus_r_ = one_minus_r;
    Z_ = 1.0 / one_minus_r + 1.0 / (one_minus_r * one_minus_r);
  }

  double alpha_ = 0.5;
  double r_ = 0.0;
  double one_minus_r_ = 1.0;
  double Z_ = 0.0;
  int i_max_ = 16;
  int j_max_ = 16;
  double M_ = 1.0;
};

}  // namespace turbmix

#endif  // TURBMIX_SCHEDULE_HPP
