#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "turbmix/flow.hpp"
#include "turbmix/propagator.hpp"

using namespace turbmix;

namespace {

// Colour of cell (l, s) in long/short coordinates of the level-0 box.
double at(const ScalarField& f, std::size_t l, std::size_t s) { return f(l, s); }

// True when f is the checkerboard with cL cells along x and cS along y.
bool is_checkerboard(const ScalarField& f, std::size_t cL, std::size_t cS) {
  const std::size_t a = f.n() / cL;
  const std::size_t b = f.n() / cS;
  const bool base = at(f, 0, 0) > 0.5;
  for (std::size_t s = 0; s < f.n(); ++s) {
    for (std::size_t l = 0; l < f.n(); ++l) {
      const bool v = at(f, l, s) > 0.5;
      const bool expect = (((l / a) + (s / b)) % 2 == 1) != base;
      if (v != expect) return false;
      if (at(f, l, s) != 0.0 && at(f, l, s) != 1.0) return false;
    }
  }
  return true;
}

ScalarField index_field(int q) {
  ScalarField f(q);
  auto v = f.values();
  std::iota(v.begin(), v.end(), 0.0);
  return f;
}

ScalarField random_field(int q, std::uint64_t seed) {
  ScalarField f(q);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (double& v : f.values()) v = g(rng);
  return f;
}

}  // namespace

TEST(Flow, MixerLocalTimes) {
  for (double a : {1.0 / 3.0, 0.5}) {
    MixerParams p{a, 6, 0.0};
    const auto ev = mixer_events(p);
    ASSERT_EQ(ev.size(), 12u);
    double sum = 0.0;
    for (int k = 0; k < 40; ++k) sum += p.stage_duration(k);
    EXPECT_NEAR(sum, 0.5 - 0.5 * std::pow(p.decay(), 40), 1e-14);
    for (int k = 0; k < 6; ++k) {
      const FlowEvent& A = ev[2 * k];
      const FlowEvent& B = ev[2 * k + 1];
      EXPECT_NEAR(A.t_start, p.stage_start(k), 1e-15);
      EXPECT_NEAR(A.t_end, p.stage_start(k) + 0.5 * p.stage_duration(k), 1e-15);
      EXPECT_EQ(A.t_end, B.t_start);
      EXPECT_NEAR(B.t_end, p.stage_start(k + 1), 1e-15);
      EXPECT_EQ(A.substep, Substep::A);
      EXPECT_EQ(A.axis, Axis::X);
      EXPECT_EQ(B.axis, Axis::Y);
    }
    EXPECT_LT(p.active_end(), 0.5);
  }
}

TEST(Flow, PatternRefinementThroughResolvableStages) {
  const int q = 6;
  MixerParams p{0.5, q + 2, 0.0};
  ScalarField f = two_cell(q, 0.0, 1.0);
  ASSERT_TRUE(is_checkerboard(f, 2, 1));
  int checked = 0;
  for (const FlowEvent& e : mixer_events(p)) {
    if (!resolvable(e, q)) break;
    f = advect_event(f, e);
    const std::size_t k = static_cast<std::size_t>(e.stage);
    if (e.substep == Substep::A) {
      EXPECT_TRUE(is_checkerboard(f, std::size_t{2} << k, std::size_t{2} << k)) << "stage " << k << " A";
    } else {
      EXPECT_TRUE(is_checkerboard(f, std::size_t{4} << k, std::size_t{2} << k)) << "stage " << k << " B";
    }
    ++checked;
  }
  // Stages 0..q-2 fully plus substep A of stage q-1.
  EXPECT_EQ(checked, 2 * (q - 1) + 1);
}

TEST(Flow, FirstStageOn16Grid) {
  const int q = 4;
  MixerParams p{0.5, 1, 0.0};
  const auto ev = mixer_events(p);
  ScalarField f = two_cell(q, 0.0, 1.0);
  f = advect_event(f, ev[0]);
  EXPECT_TRUE(is_checkerboard(f, 2, 2));
  f = advect_event(f, ev[1]);
  EXPECT_TRUE(is_checkerboard(f, 4, 2));
}

TEST(Flow, EventsArePermutations) {
  const int q = 6;
  const Schedule s(0.5, 8, 12);
  MixerParams p{0.5, 6, 0.0};
  const ScalarField idx = index_field(q);
  int n = 0;
  for (const FlowEvent& e : global_events(s, p, 0.0, 1.0)) {
    if (!resolvable(e, q)) continue;
    const ScalarField g = advect_event(idx, e);
    std::vector<double> v(g.values().begin(), g.values().end());
    std::sort(v.begin(), v.end());
    ASSERT_TRUE(std::equal(v.begin(), v.end(), idx.values().begin())) << "level " << e.level;
    ++n;
  }
  EXPECT_GT(n, 100);
}

TEST(Flow, BoxMeansInvariantUnderWindow) {
  const int q = 7;
  const Schedule s(0.5, 6, 10);
  MixerParams p{0.5, 6, 0.0};
  const ScalarField f0 = random_field(q, 4);
  for (int i = 0; i <= 2; ++i) {
    for (int j = i; j <= 2 * q - 3; ++j) {
      ScalarField f = f0;
      for (const FlowEvent& e : window_events(s, p, i, j))
        if (resolvable(e, q)) f = advect_event(f, e);
      const auto a = box_sums(f, j);
      const auto b = box_sums(f0, j);
      for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-11) << i << " " << j;
    }
  }
}

TEST(Flow, HalfStepsCompose) {
  const int q = 6;
  MixerParams p{0.5, 4, 0.0};
  const ScalarField f = random_field(q, 8);
  for (const FlowEvent& e : mixer_events(p)) {
    if (!resolvable(e, q)) continue;
    const double cells = e.displacement / (e.axis == Axis::X ? f.dx() : f.dy());
    if (std::fmod(cells, 2.0) != 0.0) continue;
    EXPECT_EQ(advect_event(advect_event(f, e, 0.5), e, 0.5), advect_event(f, e));
  }
}

TEST(Flow, GlobalEventsWindows) {
  const Schedule s(0.5, 10, 12);
  MixerParams p{0.5, 6, 0.0};
  EXPECT_TRUE(global_events(s, p, s.s_time(1, 1), s.s_inf(0)).empty());
  const auto top = global_events(s, p, s.s_time(0, 1), 1.0);
  ASSERT_EQ(top.size(), 12u);
  const auto local = mixer_events(p);
  for (std::size_t k = 0; k < top.size(); ++k) {
    EXPECT_EQ(top[k].level, 0);
    EXPECT_NEAR(top[k].t_start, s.s_time(0, 1) + s.sigma(0) * local[k].t_start, 1e-15);
    EXPECT_EQ(top[k].displacement, local[k].displacement);
  }
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 8; ++j) {
      const auto w = global_events(s, p, s.s_time(i, j + 1), s.s_time(i, j));
      EXPECT_EQ(w.size(), 12u);
      for (const FlowEvent& e : w) EXPECT_EQ(e.level, j);
    }
  // Clipping keeps the speed.
  const double mid = 0.5 * (top[0].t_start + top[0].t_end);
  const auto clipped = global_events(s, p, mid, 1.0);
  EXPECT_NEAR(clipped.front().speed(), top[0].speed(), 1e-9 * top[0].speed());
  EXPECT_NEAR(clipped.front().displacement, 0.5 * top[0].displacement, 1e-12);
}

TEST(Flow, VelocityEvaluation) {
  const Schedule s(0.5, 10, 12);
  MixerParams p{0.5, 6, 0.0};
  const double pause = 0.5 * (s.s_time(1, 1) + s.s_inf(0));
  const Vec2 v0 = velocity(s, p, pause, TorusPoint(0.3, 0.7));
  EXPECT_EQ(v0.x, 0.0);
  EXPECT_EQ(v0.y, 0.0);
  // Constant along the shear axis within a band.
  FlowEvent e;
  const double t = s.s_time(0, 1) + 0.01 * s.sigma(0);
  ASSERT_TRUE(active_event(s, p, t, e));
  EXPECT_EQ(e.axis, Axis::X);
  const double y = 0.75;
  const Vec2 ref = velocity(s, p, t, TorusPoint(0.0, y));
  EXPECT_GT(std::abs(ref.x), 0.0);
  for (double x = 0.0; x < kWidth; x += 0.05) EXPECT_EQ(velocity(s, p, t, TorusPoint(x, y)).x, ref.x);
  EXPECT_EQ(velocity(s, p, t, TorusPoint(0.2, 0.25)).x, 0.0);
  EXPECT_EQ(velocity(s, p, t, TorusPoint(0.2, 0.5)).x, ref.x);
}

TEST(Flow, HolderBudgetAcrossStages) {
  const Schedule s(0.5, 10, 12);
  for (double a : {1.0 / 3.0, 0.5}) {
    MixerParams p{a, 8, 0.0};
    for (int j : {0, 3}) {
      std::vector<double> ks, ls;
      for (const FlowEvent& e : window_events(s, p, 0, j)) {
        if (e.substep != Substep::A) continue;
        const double budget = std::pow(2.0, -a * e.stage) / s.sigma(j) * std::exp2(-0.5 * j);
        const double ratio = e.speed() / budget;
        ks.push_back(e.stage);
        ls.push_back(ratio);
      }
      const auto [mn, mx] = std::minmax_element(ls.begin(), ls.end());
      EXPECT_LE(*mx / *mn, 2.0);
    }
  }
}

TEST(Flow, LipschitzProfile) {
  MixerParams p{0.5, 6, 0.0};
  EXPECT_TRUE(std::isinf(lipschitz_profile(p, 0.01)));
  double prev = 0.0;
  for (double d : {0.4, 0.2, 0.1}) {
    p.delta = d;
    const double m = effective_lipschitz_constant(p);
    EXPECT_TRUE(std::isfinite(m));
    EXPECT_GT(m, prev);
    prev = m;
  }
  EXPECT_EQ(lipschitz_profile(p, 0.49999), 0.0);
}

TEST(Flow, EventSerializationRoundTrip) {
  const Schedule s(0.5, 4, 6);
  MixerParams p{0.5, 3, 0.0};
  const auto ev = global_events(s, p, 0.2, 0.95);
  std::stringstream ss;
  write_events(ss, ev);
  const auto back = read_events(ss);
  ASSERT_EQ(back.size(), ev.size());
  for (std::size_t k = 0; k < ev.size(); ++k) EXPECT_EQ(back[k], ev[k]);
  std::stringstream bad("0.1 0.2 z 0 0 A 1 1 1 1 1\n");
  EXPECT_THROW(read_events(bad), std::runtime_error);
}
