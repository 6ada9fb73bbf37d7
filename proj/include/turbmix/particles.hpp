// Lagrangian particles dX = V dt + sqrt(2 kappa) dW on the torus, torus
// variance and pair dispersion.

#ifndef TURBMIX_PARTICLES_HPP
#define TURBMIX_PARTICLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <stdexcept>
#include <vector>

#include "turbmix/field.hpp"
#include "turbmix/flow.hpp"
#include "turbmix/propagator.hpp"

namespace turbmix {

struct ParticleOptions {
  /// A step inside an event is accepted when either its drift |u| dt or its
  /// transverse noise sqrt(2 kappa dt) stays below step_fraction * band.  The
  /// drift is parallel to the bands, so the noise alone decides band changes.
  double step_fraction = 0.5;
  double dt_max = 1e-2;
};

struct ParticleEnsemble {
  std::vector<TorusPoint> positions;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  double t = 0.0;
};

/// Independent generator for particle `index` of stream `seed`.
inline std::mt19937_64 particle_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Euler-Maruyama integrator over the event stream of a flow field.  Event
/// velocities are evaluated analytically, so any level up to j_max is used.
class ParticleSimulator {
 public:
  ParticleSimulator(FlowField flow, double kappa, ParticleOptions opts = {})
      : flow_(std::move(flow)), kappa_(kappa), opts_(opts) {
    if (kappa < 0.0) throw std::invalid_argument("ParticleSimulator: negative kappa");
    if (!(opts.step_fraction > 0.0) || !(opts.dt_max > 0.0))
      throw std::invalid_argument("ParticleSimulator: step controls must be positive");
    events_ = global_events(flow_.schedule, flow_.mixer, 0.0, 1.0);
  }

  const std::vector<FlowEvent>& events() const { return events_; }
  double kappa() const { return kappa_; }

  /// Trajectory of one particle sampled at sorted `times` (each in [0, 1]).
  std::vector<TorusPoint> trajectory(const TorusPoint& x0, const std::vector<double>& times,
                                     std::mt19937_64& rng) const {
    std::vector<TorusPoint> out;
    out.reserve(times.size());
    boost::random::normal_distribution<double> normal;
    TorusPoint p = x0;
    double t = 0.0;
    std::size_t next = 0;
    auto emit_until = [&](double limit) {
      while (next < times.size() && times[next] <= limit) {
        diffuse(p, times[next] - t, rng, normal);
        t = times[next];
        out.push_back(p);
        ++next;
      }
    };
    for (const FlowEvent& e : events_) {
      if (next == times.size()) break;
      emit_until(e.t_start);
      diffuse(p, e.t_start - t, rng, normal);
      t = e.t_start;
      const double w = opts_.step_fraction * e.band;
      const double speed = std::abs(e.speed());
      const double h_drift = speed > 0.0 ? w / speed : opts_.dt_max;
      const double h_noise = kappa_ > 0.0 ? w * w / (2.0 * kappa_) : opts_.dt_max;
      const double h = std::min(opts_.dt_max, std::max(h_drift, h_noise));
      const std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(e.duration() / h - 1e-9)));
      const double dt = e.duration() / static_cast<double>(steps);
      for (std::size_t s = 0; s < steps; ++s) {
        const double t_next = (s + 1 == steps) ? e.t_end : t + dt;
        while (next < times.size() && times[next] < t_next) {
          step(e, p, times[next] - t, rng, normal);
          t = times[next];
          out.push_back(p);
          ++next;
        }
        step(e, p, t_next - t, rng, normal);
        t = t_next;
      }
    }
    emit_until(std::numeric_limits<double>::infinity());
    return out;
  }

  /// Positions of n particles started at x0, one row per record time.
  std::vector<std::vector<TorusPoint>> simulate(const TorusPoint& x0, std::vector<double> times, std::size_t n,
                                                std::uint64_t seed, std::uint64_t first_index = 0) const {
    check_times(times);
    std::vector<std::vector<TorusPoint>> rows(times.size(), std::vector<TorusPoint>(n));
    for (std::size_t k = 0; k < n; ++k) {
      std::mt19937_64 rng = particle_stream(seed, first_index + k);
      const std::vector<TorusPoint> path = trajectory(x0, times, rng);
      for (std::size_t r = 0; r < times.size(); ++r) rows[r][k] = path[r];
    }
    return rows;
  }

 private:
  static void check_times(const std::vector<double>& times) {
    if (!std::is_sorted(times.begin(), times.end())) throw std::invalid_argument("particles: times must be sorted");
    if (!times.empty() && (times.front() < 0.0 || times.back() > 1.0))
      throw std::invalid_argument("particles: times must lie in [0, 1]");
  }

  void diffuse(TorusPoint& p, double dt, std::mt19937_64& rng, boost::random::normal_distribution<double>& normal) const {
    if (dt <= 0.0 || kappa_ == 0.0) return;
    const double s = std::sqrt(2.0 * kappa_ * dt);
    const double nx = normal(rng);
    const double ny = normal(rng);
    p = TorusPoint(p.x + s * nx, p.y + s * ny);
  }

  void step(const FlowEvent& e, TorusPoint& p, double dt, std::mt19937_64& rng,
            boost::random::normal_distribution<double>& normal) const {
    if (dt <= 0.0) return;
    const double prof = band_profile(box_local(p[e.transverse()], e.transverse_period), e.band, flow_.mixer.delta);
    if (prof != 0.0) p = shift_within_box(e, p, e.speed() * prof * dt);
    diffuse(p, dt, rng, normal);
  }

  FlowField flow_;
  double kappa_;
  ParticleOptions opts_;
  std::vector<FlowEvent> events_;
};

namespace detail {

/// min_a sum_k (x_k - a)^2 on a circle of length P, divided by n.  Exact: the
/// objective is quadratic between antipodal breakpoints.
inline double circular_variance(std::vector<double> x, double P) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  // Recentre on a sample so a tight cluster sits near zero and the sums keep
  // their precision.
  const double ref = x.front();
  for (double& v : x) v = wrap(v - ref, P);
  std::sort(x.begin(), x.end());
  // On the arc starting at a = 0 the representative of x is in [-P/2, P/2).
  double s1 = 0.0, s2 = 0.0;
  struct Break {
    double at;
    double from;
  };
  std::vector<Break> breaks;
  breaks.reserve(n);
  for (double v : x) {
    const double y = v < 0.5 * P ? v : v - P;
    s1 += y;
    s2 += y * y;
    breaks.push_back({v < 0.5 * P ? v + 0.5 * P : v - 0.5 * P, y});
  }
  std::sort(breaks.begin(), breaks.end(), [](const Break& a, const Break& b) { return a.at < b.at; });
  const double dn = static_cast<double>(n);
  auto direct = [&](double a) {
    double acc = 0.0;
    for (double v : x) {
      const double d = wrap_signed(v - a, P);
      acc += d * d;
    }
    return acc / dn;
  };
  constexpr double eps = std::numeric_limits<double>::epsilon();
  double best = std::numeric_limits<double>::infinity();
  double lo = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double hi = k < n ? breaks[k].at : P;
    const double a = std::clamp(s1 / dn, lo, hi);
    const double f = (s2 - 2.0 * a * s1 + dn * a * a) / dn;
    // Arcs whose representatives were shifted by P lose the cancellation;
    // those are re-evaluated directly when they could win.
    const double err = 16.0 * eps * (s2 + 2.0 * std::abs(a * s1) + dn * a * a) / dn;
    if (f - err < best) best = err > 1e-3 * std::abs(f) ? std::min(best, direct(a)) : std::min(best, f);
    if (k < n) {
      // Crossing the antipode of this sample moves its representative up by P.
      const double y = breaks[k].from;
      s1 += P;
      s2 += (y + P) * (y + P) - y * y;
      lo = hi;
    }
  }
  return std::max(best, 0.0);
}

/// Exact integral over [l, l + w) of the squared wrapped distance to a.
inline double wrapped_square_integral(double l, double w, double a, double P) {
  const double d0 = wrap_signed(l - a, P);
  const double d1 = d0 + w;
  if (d1 <= 0.5 * P) return (d1 * d1 * d1 - d0 * d0 * d0) / 3.0;
  const double h = 0.5 * P;
  return (h * h * h - d0 * d0 * d0) / 3.0 + ((d1 - P) * (d1 - P) * (d1 - P) + h * h * h) / 3.0;
}

}  // namespace detail

/// Var(mu) = inf_a sum |x - a|^2 / n for the empirical measure of the samples.
inline double variance(const std::vector<TorusPoint>& samples) {
  if (samples.size() < 2) throw std::invalid_argument("variance: need at least two samples");
  std::vector<double> xs, ys;
  xs.reserve(samples.size());
  ys.reserve(samples.size());
  for (const TorusPoint& p : samples) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  return detail::circular_variance(std::move(xs), kWidth) + detail::circular_variance(std::move(ys), kHeight);
}

/// Brute-force variance of a sample set: every sample and every midpoint of
/// sorted neighbours as candidate centre, per coordinate.
inline double variance_bruteforce(const std::vector<TorusPoint>& samples) {
  auto one = [](std::vector<double> v, double P) {
    std::sort(v.begin(), v.end());
    std::vector<double> cand = v;
    for (std::size_t k = 0; k + 1 < v.size(); ++k) cand.push_back(0.5 * (v[k] + v[k + 1]));
    cand.push_back(wrap(0.5 * (v.back() + v.front() + P), P));
    double best = std::numeric_limits<double>::infinity();
    for (double a : cand) {
      double m = 0.0;
      for (double x : v) m += wrap_signed(x - a, P) * wrap_signed(x - a, P);
      double s = 0.0;
      for (double x : v) s += wrap_signed(x - a, P);
      const double shift = s / static_cast<double>(v.size());
      // One refinement: the quadratic through the current arc.
      double m2 = 0.0;
      for (double x : v) m2 += wrap_signed(x - a - shift, P) * wrap_signed(x - a - shift, P);
      best = std::min({best, m, m2});
    }
    return best / static_cast<double>(v.size());
  };
  std::vector<double> xs, ys;
  for (const TorusPoint& p : samples) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  return one(xs, kWidth) + one(ys, kHeight);
}

/// Variance of the probability density `density` (piecewise constant on
/// cells), by scanning candidate centres on a grid `refine` times finer than
/// the cells.  Within-cell spread is integrated exactly.
inline double variance_of_density(const ScalarField& density, int refine = 4) {
  const std::size_t n = density.n();
  std::vector<double> mx(n, 0.0), my(n, 0.0);
  for (std::size_t iy = 0; iy < n; ++iy)
    for (std::size_t ix = 0; ix < n; ++ix) {
      const double m = density(ix, iy) * density.cell_area();
      mx[ix] += m;
      my[iy] += m;
    }
  auto one = [&](const std::vector<double>& marg, double P) {
    const double w = P / static_cast<double>(n);
    const std::size_t cands = n * static_cast<std::size_t>(refine);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cands; ++c) {
      const double a = P * static_cast<double>(c) / static_cast<double>(cands);
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        if (marg[k] != 0.0) acc += marg[k] / w * detail::wrapped_square_integral(k * w, w, a, P);
      best = std::min(best, acc);
    }
    return best;
  };
  return one(mx, kWidth) + one(my, kHeight);
}

/// Var(mu) ||mu||_inf >= 1/(2 pi): the uniform disk is extremal, and on the
/// torus the Voronoi-cell lift only increases the moment.
inline constexpr double kVarianceLowerConstant = 1.0 / (2.0 * std::numbers::pi);

struct VarianceBound {
  double variance;
  double sup_density;
  double product;
  bool pass;
};

inline VarianceBound variance_lower_bound_check(const ScalarField& density, double c = kVarianceLowerConstant) {
  for (double v : density.values())
    if (v < 0.0) throw std::invalid_argument("variance_lower_bound_check: negative density");
  const double mass = integral(density);
  if (std::abs(mass - 1.0) > 1e-9) throw std::invalid_argument("variance_lower_bound_check: density must integrate to 1");
  VarianceBound b{};
  b.variance = variance_of_density(density);
  b.sup_density = lp_norm(density, std::numeric_limits<double>::infinity());
  b.product = b.variance * b.sup_density;
  b.pass = b.product >= c;
  return b;
}

/// E[|X_t - Y_t|^2] for independent particles started at x0 and y0.
inline std::vector<double> pair_dispersion(const ParticleSimulator& sim, const TorusPoint& x0, const TorusPoint& y0,
                                           const std::vector<double>& times, std::size_t n, std::uint64_t seed) {
  std::vector<double> acc(times.size(), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    std::mt19937_64 rx = particle_stream(seed, 2 * k);
    std::mt19937_64 ry = particle_stream(seed, 2 * k + 1);
    const auto px = sim.trajectory(x0, times, rx);
    const auto py = sim.trajectory(y0, times, ry);
    for (std::size_t r = 0; r < times.size(); ++r) {
      const double d = torus_dist(px[r], py[r]);
      acc[r] += d * d;
    }
  }
  for (double& v : acc) v /= static_cast<double>(n);
  return acc;
}

}  // namespace turbmix

#endif  // TURBMIX_PARTICLES_HPP
