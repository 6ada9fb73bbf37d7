// Solution operators for d_t theta - kappa Lap theta + V . grad theta = 0 on
// the torus: Strang splitting between exact banded transport and the exact
// heat multiplier, plus the limiting (zero-diffusivity) operator.

#ifndef TURBMIX_PROPAGATOR_HPP
#define TURBMIX_PROPAGATOR_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbmix/field.hpp"
#include "turbmix/flow.hpp"
#include "turbmix/schedule.hpp"
#include "turbmix/spectral.hpp"

namespace turbmix {

/// Schedule plus base mixer: everything needed to evaluate V.
struct FlowField {
  Schedule schedule;
  MixerParams mixer;
};

namespace detail {

inline double cell_size(const ScalarField& f, Axis a) { return a == Axis::X ? f.dx() : f.dy(); }

inline bool integral_cells(double v, double& cells) {
  cells = std::round(v);
  return std::abs(v - cells) <= 1e-9 * std::max(1.0, std::abs(v));
}

}  // namespace detail

/// True when bands, box period and full displacement are whole numbers of
/// grid cells (so the event acts as a permutation of cells).
inline bool resolvable(const FlowEvent& e, int q) {
  const double cell_axis = (e.axis == Axis::X ? kWidth : kHeight) * std::exp2(-q);
  const double cell_trans = (e.axis == Axis::X ? kHeight : kWidth) * std::exp2(-q);
  double band = 0, disp = 0, period = 0;
  return detail::integral_cells(e.band / cell_trans, band) && band >= 1.0 &&
         detail::integral_cells(e.full_displacement / cell_axis, disp) && disp >= 1.0 &&
         detail::integral_cells(e.period / cell_axis, period) && period >= 1.0;
}

/// Applies `fraction` of the event's displacement.  Whole-cell shifts are
/// rotations of box segments; fractional shifts use a spectral phase shift on
/// each segment.
inline ScalarField advect_event(const ScalarField& f, const FlowEvent& e, double fraction = 1.0) {
  if (!resolvable(e, f.q())) throw std::invalid_argument("advect_event: event not resolved by grid");
  const std::size_t n = f.n();
  double band_d = 0, period_d = 0, trans_d = 0;
  detail::integral_cells(e.band / detail::cell_size(f, e.transverse()), band_d);
  detail::integral_cells(e.period / detail::cell_size(f, e.axis), period_d);
  detail::integral_cells(e.transverse_period / detail::cell_size(f, e.transverse()), trans_d);
  const auto band = static_cast<std::size_t>(band_d);
  const auto period = static_cast<std::size_t>(period_d);
  const auto trans = static_cast<std::size_t>(trans_d);
  double shift = fraction * e.displacement / detail::cell_size(f, e.axis);
  double rounded = 0;
  if (detail::integral_cells(shift, rounded)) shift = rounded;
  ScalarField out = f;
  if (shift == 0.0) return out;
  if (e.axis == Axis::X) {
    for (std::size_t iy = 0; iy < n; ++iy) {
      if (!band_active((iy % trans) / band)) continue;
      for (std::size_t b = 0; b < n; b += period) {
        rotate_segment(std::span<double>(&out(b, iy), period), shift);
      }
    }
  } else {
    std::vector<double> seg(period);
    for (std::size_t ix = 0; ix < n; ++ix) {
      if (!band_active((ix % trans) / band)) continue;
      for (std::size_t b = 0; b < n; b += period) {
        for (std::size_t k = 0; k < period; ++k) seg[k] = out(ix, b + k);
        rotate_segment(seg, shift);
        for (std::size_t k = 0; k < period; ++k) out(ix, b + k) = seg[k];
      }
    }
  }
  return out;
}

struct PropagatorConfig {
  double kappa = 0.0;
  int substeps = 1;
  std::vector<double> record_times;
  bool record_dissipation = false;
  bool keep_snapshots = false;
  /// Orders s for which int ||theta(t)||_{H^s}^2 dt is accumulated.
  std::vector<double> sobolev_orders;
};

struct RunRecord {
  std::vector<double> times;
  std::vector<ScalarField> snapshots;
  std::vector<double> energy;
  std::vector<double> l1;
  std::vector<double> l2;
  ScalarField dissipation_density;   // accumulated 2 kappa |grad theta|^2 dt per cell
  std::vector<double> sobolev_integrals;  // parallel to sobolev_orders
  ScalarField final_field;
  double overshoot = 0.0;  // worst excursion outside [min f0, max f0] at record times
  int applied_events = 0;
  int skipped_events = 0;
  std::vector<std::string> warnings;

  double total_dissipation() const {
    if (dissipation_density.size() == 0) return 0.0;
    return integral(dissipation_density);
  }
};

using FieldObserver = std::function<void(double, const ScalarField&)>;

namespace detail {

/// Heat sub-solver with exact in-time accumulation of Sobolev integrals.
class HeatStepper {
 public:
  HeatStepper(int q, const PropagatorConfig& cfg, RunRecord& rec) : cfg_(cfg), rec_(rec) {
    Spectrum probe(q);
    k2_.resize(probe.n() * probe.half());
    for (std::size_t iy = 0; iy < probe.n(); ++iy)
      for (std::size_t ix = 0; ix < probe.half(); ++ix) k2_[iy * probe.half() + ix] = probe.k2(ix, iy);
    for (double s : cfg.sobolev_orders) {
      std::vector<double> w(k2_.size());
      for (std::size_t m = 0; m < k2_.size(); ++m) w[m] = (m == 0) ? (s > 0.0 ? 0.0 : 1.0) : std::pow(k2_[m], s);
      weights_.push_back(std::move(w));
    }
    rec_.sobolev_integrals.assign(cfg.sobolev_orders.size(), 0.0);
    if (cfg.record_dissipation) rec_.dissipation_density = ScalarField(q);
  }

  void step(ScalarField& f, double dt) {
    if (dt <= 0.0) return;
    const double kappa = cfg_.kappa;
    if (kappa == 0.0 && weights_.empty()) return;
    Spectrum s = forward_fft(f);
    const std::size_t half = s.half();
    const double scale = s.parseval_scale();
    std::vector<double> acc(weights_.size(), 0.0);
    for (std::size_t iy = 0; iy < s.n(); ++iy) {
      for (std::size_t ix = 0; ix < half; ++ix) {
        const std::size_t m = iy * half + ix;
        const double x = 2.0 * kappa * dt * k2_[m];
        const double g = x < 1e-12 ? dt * (1.0 - 0.5 * x) : dt * (-std::expm1(-x)) / x;
        const double p = s.weight(ix) * std::norm(s(ix, iy)) * g;
        for (std::size_t o = 0; o < weights_.size(); ++o) acc[o] += p * weights_[o][m];
      }
    }
    for (std::size_t o = 0; o < acc.size(); ++o) rec_.sobolev_integrals[o] += acc[o] * scale;
    if (kappa == 0.0) return;
    if (cfg_.record_dissipation) accumulate_density(s, dt);
    for (std::size_t iy = 0; iy < s.n(); ++iy)
      for (std::size_t ix = 0; ix < half; ++ix) s(ix, iy) *= std::exp(-kappa * dt * k2_[iy * half + ix]);
    f = inverse_fft(std::move(s));
  }

 private:
  // Each mode is weighted by the square root of its exact time integral, so
  // the density integrates to the exact energy drop of the step.  Nyquist
  // components use the magnitude |k| in place of the odd multiplier i k.
  void accumulate_density(const Spectrum& s, double dt) {
    const double kappa = cfg_.kappa;
    Spectrum gx(s.q()), gy(s.q());
    for (std::size_t iy = 0; iy < s.n(); ++iy) {
      for (std::size_t ix = 0; ix < s.half(); ++ix) {
        const double x = 2.0 * kappa * dt * k2_[iy * s.half() + ix];
        const double g = x < 1e-12 ? dt * (1.0 - 0.5 * x) : dt * (-std::expm1(-x)) / x;
        const std::complex<double> c = s(ix, iy) * std::sqrt(g);
        const double kx = s.kx(ix), ky = s.ky(iy);
        gx(ix, iy) = s.nyquist_x(ix) ? c * std::abs(kx) : c * std::complex<double>(0.0, kx);
        gy(ix, iy) = s.nyquist_y(iy) ? c * std::abs(ky) : c * std::complex<double>(0.0, ky);
      }
    }
    const ScalarField dx = inverse_fft(std::move(gx));
    const ScalarField dy = inverse_fft(std::move(gy));
    auto out = rec_.dissipation_density.values();
    const auto a = dx.values();
    const auto b = dy.values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += 2.0 * kappa * (a[k] * a[k] + b[k] * b[k]);
  }

  const PropagatorConfig& cfg_;
  RunRecord& rec_;
  std::vector<double> k2_;
  std::vector<std::vector<double>> weights_;
};

}  // namespace detail

/// Events of the field on [t0, t1] that the grid resolves; the rest are
/// counted in `skipped`.
inline std::vector<FlowEvent> grid_events(const FlowField& flow, int q, double t0, double t1, int* skipped = nullptr) {
  std::vector<FlowEvent> all = global_events(flow.schedule, flow.mixer, t0, t1);
  std::vector<FlowEvent> keep;
  keep.reserve(all.size());
  int dropped = 0;
  for (const FlowEvent& e : all) {
    if (resolvable(e, q)) {
      keep.push_back(e);
    } else {
      ++dropped;
    }
  }
  if (skipped != nullptr) *skipped = dropped;
  return keep;
}

/// Strang-split solution of the drift-diffusion equation from t0 to t1.
/// Adjacent half heat steps are merged, so each event costs one heat solve.
inline RunRecord propagate(const ScalarField& f0, double t0, double t1, const FlowField& flow,
                           const PropagatorConfig& cfg, const FieldObserver& observer = {}) {
  if (!(t0 <= t1)) throw std::invalid_argument("propagate: t0 > t1");
  if (cfg.kappa < 0.0) throw std::invalid_argument("propagate: negative kappa");
  if (cfg.substeps < 1) throw std::invalid_argument("propagate: substeps must be >= 1");
  if (flow.mixer.delta != 0.0) throw std::invalid_argument("propagate: grid transport requires delta = 0");
  RunRecord rec;
  detail::HeatStepper heat_stepper(f0.q(), cfg, rec);
  const std::vector<FlowEvent> events = grid_events(flow, f0.q(), t0, t1, &rec.skipped_events);
  rec.applied_events = static_cast<int>(events.size());
  if (rec.skipped_events > 0) {
    std::ostringstream os;
    os << rec.skipped_events << " events finer than the grid were dropped";
    rec.warnings.push_back(os.str());
  }
  if (cfg.kappa > 0.0) {
    std::set<int> flagged;
    const int K = flow.mixer.depth;
    for (const FlowEvent& e : events) {
      const int j = e.level;
      if (flagged.count(j) != 0) continue;
      if (std::sqrt(cfg.kappa * flow.schedule.sigma(j)) < std::exp2(-K) * std::exp2(-0.5 * j)) {
        flagged.insert(j);
        std::ostringstream os;
        os << "level " << j << ": diffusive length below mixer resolution";
        rec.warnings.push_back(os.str());
      }
    }
  }

  double fmin = std::numeric_limits<double>::infinity();
  double fmax = -fmin;
  for (double v : f0.values()) {
    fmin = std::min(fmin, v);
    fmax = std::max(fmax, v);
  }

  std::vector<double> records;
  for (double t : cfg.record_times)
    if (t >= t0 && t <= t1) records.push_back(t);
  std::sort(records.begin(), records.end());
  std::size_t next_record = 0;

  ScalarField f = f0;
  double pending = 0.0;  // physical time awaiting diffusion
  double now = t0;

  auto flush = [&] {
    heat_stepper.step(f, pending);
    pending = 0.0;
  };
  auto record = [&](double t) {
    flush();
    rec.times.push_back(t);
    rec.energy.push_back(energy(f));
    rec.l1.push_back(lp_norm(f, 1.0));
    rec.l2.push_back(lp_norm(f, 2.0));
    for (double v : f.values()) rec.overshoot = std::max({rec.overshoot, v - fmax, fmin - v});
    if (cfg.keep_snapshots) rec.snapshots.push_back(f);
    if (observer) observer(t, f);
  };
  // Pure diffusion up to `t`, stopping at record times on the way.
  auto diffuse_until = [&](double t) {
    while (next_record < records.size() && records[next_record] <= t) {
      pending += records[next_record] - now;
      now = records[next_record];
      record(now);
      ++next_record;
    }
    pending += t - now;
    now = t;
  };

  for (const FlowEvent& e : events) {
    diffuse_until(e.t_start);
    std::vector<double> cuts{e.t_start};
    for (std::size_t r = next_record; r < records.size() && records[r] < e.t_end; ++r)
      if (records[r] > e.t_start) cuts.push_back(records[r]);
    cuts.push_back(e.t_end);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c];
      const double b = cuts[c + 1];
      for (int m = 0; m < cfg.substeps; ++m) {
        const double u = a + (b - a) * m / cfg.substeps;
        const double w = a + (b - a) * (m + 1) / cfg.substeps;
        pending += 0.5 * (w - u);
        flush();
        f = advect_event(f, e, (w - u) / e.duration());
        pending += 0.5 * (w - u);
      }
      now = b;
      while (next_record < records.size() && records[next_record] <= b) {
        if (records[next_record] == b) record(b);
        ++next_record;
      }
    }
  }
  diffuse_until(t1);
  flush();
  rec.final_field = std::move(f);
  return rec;
}

/// S_t f0: exact transport punctuated by projections at the singular times
/// s(i,i+1) + sigma_i/2.  Events the grid cannot represent are skipped, so the
/// finest representable pattern is held until the singular time.  Inside an
/// event the displacement is taken to the nearest whole cell.
inline ScalarField limiting(const ScalarField& f0, double t, const FlowField& flow) {
  const Schedule& sched = flow.schedule;
  if (t <= 0.0) return f0;
  if (t >= 1.0) return project(f0, 0);
  int i = 0;
  while (t < sched.s_time(i + 1, i + 1)) ++i;
  const double start = sched.s_time(i, i + 1);
  const double jump = start + 0.5 * sched.sigma(i);
  if (t >= jump) return project(f0, i);
  ScalarField g = project(f0, i + 1);
  if (t <= start) return g;
  for (const FlowEvent& e : window_events(sched, flow.mixer, i, i)) {
    if (e.t_start >= t) break;
    if (!resolvable(e, f0.q())) continue;
    // Partial displacements are rounded to whole cells so that S_t stays a
    // permutation of Pi_{i+1} f0 between singular times.
    const double cells = e.displacement / detail::cell_size(g, e.axis);
    const double frac = (std::min(t, e.t_end) - e.t_start) / e.duration();
    const double moved = std::round(frac * cells);
    if (moved > 0.0) g = advect_event(g, e, moved / cells);
  }
  return g;
}

struct LimitGap {
  std::vector<double> times;
  std::vector<double> gaps;  // ||theta^kappa(t) - S_t theta0||_{L^2}
  double integrated = 0.0;   // trapezoidal L^2_{t,x} over `times`
};

/// Trapezoidal sqrt(int g(t)^2 dt) over a sorted sample.
inline double l2_in_time(const std::vector<double>& t, const std::vector<double>& g) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) acc += 0.5 * (t[k + 1] - t[k]) * (g[k] * g[k] + g[k + 1] * g[k + 1]);
  return std::sqrt(acc);
}

inline LimitGap distance_to_limit(const ScalarField& f0, std::vector<double> times, double kappa, const FlowField& flow,
                                  int substeps = 1) {
  std::sort(times.begin(), times.end());
  PropagatorConfig cfg;
  cfg.kappa = kappa;
  cfg.substeps = substeps;
  cfg.record_times = times;
  LimitGap out;
  propagate(f0, 0.0, times.empty() ? 0.0 : times.back(), flow, cfg, [&](double t, const ScalarField& f) {
    out.times.push_back(t);
    out.gaps.push_back(lp_norm(f - limiting(f0, t, flow), 2.0));
  });
  out.integrated = l2_in_time(out.times, out.gaps);
  return out;
}

}  // namespace turbmix

#endif  // TURBMIX_PROPAGATOR_HPP
