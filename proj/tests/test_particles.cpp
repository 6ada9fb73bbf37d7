#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "turbmix/particles.hpp"

using namespace turbmix;

namespace {

// Flow with no active window before t = 1/2: all levels truncated away except
// the top block, which starts at s(0,1).
FlowField quiet_flow() { return FlowField{Schedule(0.5, 0, 0), MixerParams{0.5, 6, 0.0}}; }

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST(Particles, VarianceExamples) {
  std::vector<TorusPoint> same(10, TorusPoint(0.3, 0.4));
  EXPECT_EQ(variance(same), 0.0);
  std::vector<TorusPoint> two{TorusPoint(0.0, 0.2), TorusPoint(std::numbers::sqrt2 / 2, 0.2)};
  EXPECT_NEAR(variance(two), 0.125, 1e-15);
  EXPECT_NEAR(variance_bruteforce(two), 0.125, 1e-15);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(0, std::numbers::sqrt2), uy(0, 1);
  const std::size_t n = 40000;
  std::vector<TorusPoint> uni;
  for (std::size_t k = 0; k < n; ++k) uni.emplace_back(ux(rng), uy(rng));
  EXPECT_NEAR(variance(uni), 0.25, 3.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_THROW(variance(std::vector<TorusPoint>{TorusPoint()}), std::invalid_argument);
}

TEST(Particles, VarianceMatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::normal_distribution<double> g(0.0, std::exp2(-(trial % 12)));
    std::uniform_real_distribution<double> c(0.0, 1.0);
    const double cx = c(rng) * std::numbers::sqrt2, cy = c(rng);
    std::vector<TorusPoint> pts;
    const int n = 3 + trial % 50;
    for (int k = 0; k < n; ++k) pts.emplace_back(cx + g(rng), cy + g(rng));
    const double exact = variance(pts);
    const double brute = variance_bruteforce(pts);
    EXPECT_LE(exact, brute + 1e-12 * (1 + brute));
    EXPECT_NEAR(exact, brute, 1e-9 * (1 + brute)) << trial;
  }
}

TEST(Particles, TightClusterKeepsPrecision) {
  std::vector<TorusPoint> pts;
  for (int k = 0; k < 1000; ++k) pts.emplace_back(std::numbers::sqrt2 - 1e-9 + 2e-9 * (k % 2), 0.999999999 + 1e-12 * k);
  const double v = variance(pts);
  EXPECT_NEAR(v, 1e-18 + 1e-24 * (1000.0 * 1000.0 - 1) / 12.0, 1e-21);
}

TEST(Particles, DensityVarianceOracle) {
  const int q = 5;
  ScalarField uni(q, 1.0 / std::numbers::sqrt2);
  EXPECT_NEAR(variance_of_density(uni), 0.25, 1e-12);
  const VarianceBound b = variance_lower_bound_check(uni);
  EXPECT_NEAR(b.product, 0.25 / std::numbers::sqrt2, 1e-12);
  EXPECT_TRUE(b.pass);
  // A single-cell spike: the product is the cell's own moment.
  for (int qq : {4, 6, 8}) {
    ScalarField spike(qq);
    spike(3, 5) = 1.0 / spike.cell_area();
    const VarianceBound s = variance_lower_bound_check(spike);
    const double expect = (spike.dx() * spike.dx() + spike.dy() * spike.dy()) / 12.0 / spike.cell_area();
    EXPECT_NEAR(s.product, expect, 1e-9 * expect);
    EXPECT_GE(s.product, kVarianceLowerConstant);
  }
  // Half uniform plus half spike.
  ScalarField mix = 0.5 * uni;
  mix(0, 0) += 0.5 / mix.cell_area();
  EXPECT_GE(variance_of_density(mix), 0.5 * 0.25 * 0.5 - 1e-3);
  ScalarField neg(q, -1.0);
  EXPECT_THROW(variance_lower_bound_check(neg), std::invalid_argument);
}

TEST(Particles, ZeroKappaNoFlowIsStatic) {
  const ParticleSimulator sim(quiet_flow(), 0.0);
  const TorusPoint x0(0.3, 0.6);
  const auto rows = sim.simulate(x0, {0.1, 0.4, 0.9}, 5, 1);
  for (std::size_t r = 0; r < 2; ++r)
    for (const TorusPoint& p : rows[r]) {
      EXPECT_EQ(p.x, x0.x);
      EXPECT_EQ(p.y, x0.y);
    }
}

TEST(Particles, BrownianRegime) {
  const double kappa = 1e-6;
  const ParticleSimulator sim(quiet_flow(), kappa);
  std::vector<double> times;
  for (int k = 0; k < 8; ++k) times.push_back(1e-3 * std::exp2(k * 0.5));
  const std::size_t n = 20000;
  const auto rows = sim.simulate(TorusPoint(0.5, 0.5), times, n, 9);
  std::vector<double> msd;
  for (std::size_t r = 0; r < times.size(); ++r) {
    double acc = 0;
    for (const TorusPoint& p : rows[r]) acc += std::pow(wrap_signed(p.x - 0.5, kWidth), 2);
    msd.push_back(acc / n);
    EXPECT_NEAR(msd.back(), 2 * kappa * times[r], 0.05 * 2 * kappa * times[r]);
  }
  EXPECT_NEAR(fit_slope(times, msd), 1.0, 0.05);
  // Pair dispersion from a common point: E R^2 = 8 kappa t.
  const auto r2 = pair_dispersion(sim, TorusPoint(0.5, 0.5), TorusPoint(0.5, 0.5), times, 10000, 4);
  EXPECT_NEAR(fit_slope(times, r2), 1.0, 0.05);
  for (std::size_t r = 0; r < times.size(); ++r) EXPECT_NEAR(r2[r], 8 * kappa * times[r], 0.05 * 8 * kappa * times[r]);
}

TEST(Particles, ZeroKappaEventDisplacement) {
  const FlowField flow = quiet_flow();
  const ParticleSimulator sim(flow, 0.0);
  const FlowEvent& e = sim.events().front();
  ASSERT_EQ(e.axis, Axis::X);
  // Strictly inside an active band (y in [1/2, 1)) the particle moves by the full displacement.
  const TorusPoint inside(0.1, 0.7);
  std::mt19937_64 rng(0);
  const auto p = sim.trajectory(inside, {e.t_start, e.t_end}, rng);
  EXPECT_NEAR(p[0].x, inside.x, 1e-15);
  EXPECT_NEAR(p[1].x, inside.x + e.displacement, 1e-12);
  EXPECT_EQ(p[1].y, inside.y);
  const TorusPoint outside(0.1, 0.3);
  const auto q = sim.trajectory(outside, {e.t_end}, rng);
  EXPECT_EQ(q[0].x, outside.x);
}

TEST(Particles, SeedsReproduceBitwise) {
  const FlowField flow{Schedule(0.5, 12, 20), MixerParams{0.5, 6, 0.0}};
  const ParticleSimulator sim(flow, 1e-6);
  const std::vector<double> times{0.01, 0.2, 0.9, 1.0};
  const auto a = sim.simulate(TorusPoint(0.2, 0.3), times, 50, 77);
  const auto b = sim.simulate(TorusPoint(0.2, 0.3), times, 50, 77);
  const auto c = sim.simulate(TorusPoint(0.2, 0.3), times, 50, 78);
  bool differs = false;
  for (std::size_t r = 0; r < times.size(); ++r)
    for (std::size_t k = 0; k < 50; ++k) {
      EXPECT_EQ(a[r][k].x, b[r][k].x);
      EXPECT_EQ(a[r][k].y, b[r][k].y);
      differs = differs || a[r][k].x != c[r][k].x;
    }
  EXPECT_TRUE(differs);
  // Order independence: a sub-range of particle indices reproduces the same paths.
  const auto tail = sim.simulate(TorusPoint(0.2, 0.3), times, 10, 77, 40);
  for (std::size_t r = 0; r < times.size(); ++r)
    for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(tail[r][k].x, a[r][40 + k].x);
}
