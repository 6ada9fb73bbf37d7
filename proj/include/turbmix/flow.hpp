// The reference two-cell mixer and the multiscale velocity field built from
// rescaled copies of it.
//
// The mixer works in the frame of one box with a long axis L and a short axis
// S.  Stage k spends d_k = c (2^{-(1-alpha)})^k on two banded shears:
//   A: bands of height S/2^{k+1} across S, shifted by L/2^{k+1} along L;
//   B: bands of width L/2^{k+2} across L, shifted by S/2^{k+1} along S.
// Bands are numbered from the box edge and those with index 1 or 2 mod 4 move,
// i.e. strips one pattern cell wide centred on the cell interfaces.  Starting
// from a two-cell pattern this refines the checkerboard
// (2,1) -> (2,2) -> (4,2) -> (4,4) -> ...  Shifts wrap within each box, so
// box means are invariant.

#ifndef TURBMIX_FLOW_HPP
#define TURBMIX_FLOW_HPP

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbmix/geometry.hpp"
#include "turbmix/schedule.hpp"

namespace turbmix {

struct MixerParams {
  double alpha = 0.5;
  int depth = 6;
  /// Width of the linear band-edge transition as a fraction of the band.
  double delta = 0.0;

  double decay() const { return std::exp2(-(1.0 - alpha)); }
  double stage_duration(int k) const { return 0.5 * (1.0 - decay()) * std::pow(decay(), k); }
  double stage_start(int k) const { return 0.5 * (1.0 - std::pow(decay(), k)); }
  /// Local time after which the mixer is at rest.
  double active_end() const { return stage_start(depth); }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("MixerParams: alpha must lie in (0,1)");
    if (depth < 1) throw std::invalid_argument("MixerParams: depth must be >= 1");
    if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("MixerParams: delta must lie in [0,1]");
  }
};

enum class Substep { A, B };

struct FlowEvent {
  double t_start = 0.0;
  double t_end = 0.0;
  Axis axis = Axis::X;         // direction of displacement
  int level = 0;               // box lattice level
  int stage = 0;
  Substep substep = Substep::A;
  double band = 0.0;           // transverse band size
  double displacement = 0.0;   // shift of odd bands over [t_start, t_end)
  double full_displacement = 0.0;  // shift over the unclipped event
  double period = 0.0;         // box length along `axis`; shifts wrap modulo it
  double transverse_period = 0.0;  // box length across `axis`

  double duration() const { return t_end - t_start; }
  double speed() const { return duration() > 0.0 ? displacement / duration() : 0.0; }
  Axis transverse() const { return other(axis); }

  friend bool operator==(const FlowEvent&, const FlowEvent&) = default;
};

/// Event for stage k / substep of the mixer acting on level-`level` boxes.
inline FlowEvent make_event(int level, int stage, Substep sub, double t0, double t1) {
  const BoxDims d = box_dims(level);
  const Axis L = long_axis(level);
  const Axis S = other(L);
  const double long_len = d.along(L);
  const double short_len = d.along(S);
  FlowEvent e;
  e.t_start = t0;
  e.t_end = t1;
  e.level = level;
  e.stage = stage;
  e.substep = sub;
  const double pk1 = std::exp2(-(stage + 1));
  if (sub == Substep::A) {
    e.axis = L;
    e.band = short_len * pk1;
    e.displacement = long_len * pk1;
    e.period = long_len;
    e.transverse_period = short_len;
  } else {
    e.axis = S;
    e.band = long_len * pk1 * 0.5;
    e.displacement = short_len * pk1;
    e.period = short_len;
    e.transverse_period = long_len;
  }
  e.full_displacement = e.displacement;
  return e;
}

/// Local-time events of the unit mixer on B, on [0, T_K).
inline std::vector<FlowEvent> mixer_events(const MixerParams& params) {
  params.validate();
  std::vector<FlowEvent> out;
  out.reserve(2 * static_cast<std::size_t>(params.depth));
  for (int k = 0; k < params.depth; ++k) {
    const double t0 = params.stage_start(k);
    const double mid = t0 + 0.5 * params.stage_duration(k);
    const double t1 = params.stage_start(k + 1);
    out.push_back(make_event(0, k, Substep::A, t0, mid));
    out.push_back(make_event(0, k, Substep::B, mid, t1));
  }
  return out;
}

/// Restricts an event to [a, b], keeping its speed.
inline FlowEvent clip_event(FlowEvent e, double a, double b) {
  const double s = std::max(e.t_start, a);
  const double t = std::min(e.t_end, b);
  const double v = e.speed();
  e.t_start = s;
  e.t_end = t;
  e.displacement = v * std::max(0.0, t - s);
  return e;
}

/// Mixer events of window (i, j), rescaled to global time.
inline std::vector<FlowEvent> window_events(const Schedule& sched, const MixerParams& params, int i, int j) {
  const double start = sched.s_time(i, j + 1);
  const double sig = sched.sigma(j);
  std::vector<FlowEvent> out;
  for (const FlowEvent& local : mixer_events(params)) {
    out.push_back(make_event(j, local.stage, local.substep, start + sig * local.t_start, start + sig * local.t_end));
  }
  return out;
}

/// Every event of the truncated field intersecting [t0, t1], clipped and in
/// time order.  Pause windows and truncated levels contribute nothing.
inline std::vector<FlowEvent> global_events(const Schedule& sched, const MixerParams& params, double t0, double t1) {
  if (!(0.0 <= t0 && t0 <= t1 && t1 <= 1.0)) throw std::invalid_argument("global_events: need 0 <= t0 <= t1 <= 1");
  params.validate();
  std::vector<FlowEvent> out;
  for (int i = 0; i <= sched.i_max(); ++i) {
    if (sched.s_time(i, i) <= t0) break;
    if (sched.s_time(i + 1, i + 1) >= t1) continue;
    for (int j = i; j <= sched.j_max(); ++j) {
      const double ws = sched.s_time(i, j + 1);
      const double we = sched.s_time(i, j);
      if (we <= t0 || ws >= t1) continue;
      for (FlowEvent e : window_events(sched, params, i, j)) {
        if (e.t_end <= t0 || e.t_start >= t1) continue;
        if (e.t_start < t0 || e.t_end > t1) e = clip_event(e, t0, t1);
        if (e.duration() > 0.0) out.push_back(e);
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const FlowEvent& a, const FlowEvent& b) { return a.t_start < b.t_start; });
  return out;
}

/// Whether band m (counted from the box edge) is sheared.
inline bool band_active(std::size_t m) { return m % 4 == 1 || m % 4 == 2; }

/// Band-activity profile in [0,1] at box-local transverse coordinate c.  The
/// active set is [band, 3 band) mod 4 band; delta > 0 replaces the jumps by
/// linear ramps of width delta*band.
inline double band_profile(double c, double band, double delta) {
  if (delta <= 0.0) return band_active(static_cast<std::size_t>(std::max(0.0, std::floor(c / band)))) ? 1.0 : 0.0;
  const double u = wrap(c, 4.0 * band) / band;  // [0, 4)
  const double s = std::min(u - 1.0, 3.0 - u);  // > 0 inside the active set
  return std::clamp(0.5 + s / delta, 0.0, 1.0);
}

/// Box-local coordinate c mod T.  Cheaper than wrap() when c/T is large; the
/// rounding error is of order eps * c.
inline double box_local(double c, double T) {
  const double r = c - std::floor(c / T) * T;
  return r < 0.0 ? 0.0 : (r >= T ? 0.0 : r);
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Velocity of a single event at p.
inline Vec2 event_velocity(const FlowEvent& e, const TorusPoint& p, double delta) {
  const double prof = band_profile(box_local(p[e.transverse()], e.transverse_period), e.band, delta);
  const double u = e.speed() * prof;
  return e.axis == Axis::X ? Vec2{u, 0.0} : Vec2{0.0, u};
}

/// Moves p along the event's axis by `shift` inside its box (wrap-within-box).
inline TorusPoint shift_within_box(const FlowEvent& e, const TorusPoint& p, double shift) {
  const double c = p[e.axis];
  const double origin = std::floor(c / e.period) * e.period;
  double moved = origin + wrap(c - origin + shift, e.period);
  return e.axis == Axis::X ? TorusPoint(moved, p.y) : TorusPoint(p.x, moved);
}

/// Stage and substep of the mixer active at local time tau, or false when at rest.
inline bool locate_stage(const MixerParams& params, double tau, int& stage, Substep& sub) {
  if (tau < 0.0 || tau >= params.active_end()) return false;
  const double rho = params.decay();
  // stage_start(k) = (1 - rho^k)/2  =>  k = floor(log(1 - 2 tau) / log rho)
  int k = static_cast<int>(std::floor(std::log1p(-2.0 * tau) / std::log(rho)));
  k = std::clamp(k, 0, params.depth - 1);
  while (k > 0 && tau < params.stage_start(k)) --k;
  while (k + 1 < params.depth && tau >= params.stage_start(k + 1)) ++k;
  stage = k;
  sub = tau < params.stage_start(k) + 0.5 * params.stage_duration(k) ? Substep::A : Substep::B;
  return true;
}

/// The event of the global field active at time t, if any.
inline bool active_event(const Schedule& sched, const MixerParams& params, double t, FlowEvent& out) {
  const TimeLabel label = sched.classify(t);
  const auto* act = std::get_if<Active>(&label);
  if (act == nullptr || act->j > sched.j_max()) return false;
  int k = 0;
  Substep sub = Substep::A;
  if (!locate_stage(params, act->tau, k, sub)) return false;
  const double start = sched.s_time(act->i, act->j + 1);
  const double sig = sched.sigma(act->j);
  const double t0 = params.stage_start(k) + (sub == Substep::B ? 0.5 * params.stage_duration(k) : 0.0);
  const double t1 = t0 + 0.5 * params.stage_duration(k);
  out = make_event(act->j, k, sub, start + sig * t0, start + sig * t1);
  return true;
}

/// Pointwise velocity of the global field.
inline Vec2 velocity(const Schedule& sched, const MixerParams& params, double t, const TorusPoint& p) {
  FlowEvent e;
  if (!active_event(sched, params, t, e)) return {};
  return event_velocity(e, p, params.delta);
}

/// sup_x |grad v| of the unit mixer at local time t; +inf for square-wave bands.
inline double lipschitz_profile(const MixerParams& params, double t_local) {
  int k = 0;
  Substep sub = Substep::A;
  if (!locate_stage(params, t_local, k, sub)) return 0.0;
  if (params.delta <= 0.0) return std::numeric_limits<double>::infinity();
  const FlowEvent e = make_event(0, k, sub, 0.0, 0.5 * params.stage_duration(k));
  return e.speed() / (params.delta * e.band);
}

/// sup_t (1 - alpha)(1/2 - t) |grad v(t)|, attained at stage starts.
inline double effective_lipschitz_constant(const MixerParams& params) {
  double best = 0.0;
  for (int k = 0; k < params.depth; ++k) {
    for (double off : {0.0, 0.5 * params.stage_duration(k)}) {
      const double t = params.stage_start(k) + off;
      best = std::max(best, (1.0 - params.alpha) * (0.5 - t) * lipschitz_profile(params, t));
    }
  }
  return best;
}

// Line-oriented event format:
//   # turbmix-events v1
//   t_start t_end axis level stage substep band displacement full_displacement period
//   transverse_period
inline void write_events(std::ostream& os, const std::vector<FlowEvent>& events) {
  os << "# turbmix-events v1\n";
  os << "# t_start t_end axis level stage substep band displacement full_displacement period transverse_period\n";
  os.precision(17);
  for (const FlowEvent& e : events) {
    os << e.t_start << ' ' << e.t_end << ' ' << (e.axis == Axis::X ? 'x' : 'y') << ' ' << e.level << ' ' << e.stage
       << ' ' << (e.substep == Substep::A ? 'A' : 'B') << ' ' << e.band << ' ' << e.displacement << ' '
       << e.full_displacement << ' ' << e.period << ' ' << e.transverse_period << '\n';
  }
}

inline std::vector<FlowEvent> read_events(std::istream& is) {
  std::vector<FlowEvent> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    FlowEvent e;
    char axis = 0, sub = 0;
    ls >> e.t_start >> e.t_end >> axis >> e.level >> e.stage >> sub >> e.band >> e.displacement >>
        e.full_displacement >> e.period >> e.transverse_period;
    if (!ls || (axis != 'x' && axis != 'y') || (sub != 'A' && sub != 'B')) {
      throw std::runtime_error("read_events: malformed line: " + line);
    }
    e.axis = axis == 'x' ? Axis::X : Axis::Y;
    e.substep = sub == 'A' ? Substep::A : Substep::B;
    out.push_back(e);
  }
  return out;
}

}  // namespace turbmix

#endif  // TURBMIX_FLOW_HPP
