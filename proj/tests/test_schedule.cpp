#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "turbmix/schedule.hpp"

using namespace turbmix;

namespace {

// Direct partial sums of the defining series, in long double.  Truncated where
// the geometric remainder drops below 2^-64.
struct SeriesOracle {
  explicit SeriesOracle(double alpha) : a(alpha), n(static_cast<int>(std::ceil(64.0 / ((1.0 - alpha) / 2.0))) + 40) {
    long double z = 0;
    for (int k = 0; k < n; ++k) z += w(k) + tail(k);
    Z = z;
  }
  long double w(int l) const { return std::pow(2.0L, -(1.0L - a) * l / 2.0L); }
  long double tail(int k) const {
    long double s = 0;
    for (int l = k; l < k + n; ++l) s += w(l);
    return s;
  }
  long double sigma(int l) const { return w(l) / Z; }
  long double s(int i, int j) const {
    long double v = 1;
    for (int k = 0; k < i; ++k) v -= sigma(k) + tail(k) / Z;
    for (int l = i; l < j; ++l) v -= sigma(l);
    return v;
  }
  long double s_inf(int i) const { return s(i, i) - tail(i) / Z; }

  long double a;
  int n;
  long double Z;
};

}  // namespace

TEST(Schedule, SchematicRatioHalf) {
  const Schedule s = Schedule::from_ratio(0.5);
  EXPECT_NEAR(s.Z(), 6.0, 1e-14);
  EXPECT_NEAR(s.sigma(0), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(s.sigma(1), 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(s.s_time(0, 1), 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(s.s_inf(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.s_time(1, 1), 0.5, 1e-15);
  EXPECT_NEAR(s.s_time(1, 2), 5.0 / 12.0, 1e-15);
  EXPECT_TRUE(std::holds_alternative<Pause>(s.classify(0.6)));
  EXPECT_EQ(std::get<Pause>(s.classify(0.6)).i, 0);
}

TEST(Schedule, AlphaHalfValues) {
  const Schedule s(0.5);
  EXPECT_NEAR(s.Z(), 45.78913, 1e-5);
  EXPECT_NEAR(s.sigma(0), 0.0218392, 1e-7);
  EXPECT_NEAR(s.s_time(1, 1), std::pow(2.0, -0.25), 1e-15);
  EXPECT_NEAR(s.s_inf(0), 0.862736, 1e-6);  // 0.86273566... by direct summation
  EXPECT_NEAR(s.s_time(0, 1), 0.9781608, 1e-7);
  EXPECT_EQ(s.s_time(0, 0), 1.0);
}

TEST(Schedule, SigmaRatio) {
  for (double a : {0.1, 0.5, 0.9}) {
    const Schedule s(a);
    for (int j = 0; j < 20; ++j) EXPECT_NEAR(s.sigma(j) / s.sigma(j + 1), std::exp2((1 - a) / 2), 1e-12);
  }
}

TEST(Schedule, ClosedFormMatchesPartialSums) {
  for (double a : {0.1, 1.0 / 3.0, 0.5, 0.9}) {
    const Schedule s(a, 30, 30);
    const SeriesOracle o(a);
    EXPECT_NEAR(s.Z(), static_cast<double>(o.Z), 1e-12 * s.Z());
    for (int i = 0; i <= 12; ++i) {
      for (int j = i; j <= i + 12; ++j) EXPECT_NEAR(s.s_time(i, j), static_cast<double>(o.s(i, j)), 1e-12);
      EXPECT_NEAR(s.s_inf(i), static_cast<double>(o.s_inf(i)), 1e-12);
    }
  }
}

TEST(Schedule, DiagonalIdentity) {
  for (double a : {0.1, 1.0 / 3.0, 0.5, 0.9}) {
    const Schedule s(a, 40, 40);
    for (int i = 0; i <= 30; ++i) EXPECT_NEAR(s.s_time(i, i), std::exp2(-(1 - a) * i / 2), 1e-12);
  }
}

TEST(Schedule, PartitionStructure) {
  for (double a : {0.1, 1.0 / 3.0, 0.5, 0.9}) {
    const Schedule s(a, 30, 30);
    for (int i = 0; i <= 20; ++i) {
      EXPECT_NEAR(s.s_time(i + 1, i + 1), s.s_inf(i) - s.sigma(i), 1e-12);
      for (int j = i; j < i + 20; ++j) {
        EXPECT_LT(s.s_time(i, j + 1), s.s_time(i, j));
        EXPECT_NEAR(s.s_time(i, j) - s.s_time(i, j + 1), s.sigma(j), 1e-12);
      }
    }
  }
}

TEST(Schedule, ClassifyRandomTimes) {
  const Schedule s(0.5, 30, 30);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 100000; ++n) {
    const double t = u(rng);
    const TimeLabel lab = s.classify(t);
    if (const auto* a = std::get_if<Active>(&lab)) {
      EXPECT_LE(s.s_time(a->i, a->j + 1), t);
      EXPECT_LT(t, s.s_time(a->i, a->j));
      EXPECT_GE(a->tau, 0.0);
      EXPECT_LT(a->tau, 1.0);
      EXPECT_NEAR(a->tau, (t - s.s_time(a->i, a->j + 1)) / s.sigma(a->j), 1e-9);
    } else if (const auto* p = std::get_if<Pause>(&lab)) {
      EXPECT_LE(s.s_time(p->i + 1, p->i + 1), t);
      EXPECT_LE(t, s.s_inf(p->i));
    } else {
      EXPECT_TRUE(std::holds_alternative<BelowTruncation>(lab));
      EXPECT_LT(t, s.truncation_time());
    }
  }
}

TEST(Schedule, ClassifyEndpoints) {
  const Schedule s(0.5, 8, 8);
  EXPECT_TRUE(std::holds_alternative<Terminal>(s.classify(1.0)));
  EXPECT_TRUE(std::holds_alternative<BelowTruncation>(s.classify(0.0)));
  EXPECT_TRUE(std::holds_alternative<BelowTruncation>(s.classify(0.5 * s.truncation_time())));
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < i + 6; ++j) {
      const TimeLabel lab = s.classify(s.s_time(i, j));
      ASSERT_TRUE(std::holds_alternative<Active>(lab)) << i << " " << j;
      const Active a = std::get<Active>(lab);
      EXPECT_EQ(a.i, i);
      EXPECT_EQ(a.j, j - 1);
      EXPECT_NEAR(a.tau, 0.0, 1e-9);
    }
  }
}

TEST(Schedule, GammaAndErrors) {
  EXPECT_DOUBLE_EQ(Schedule(0.5, 16, 16, 1.0).gamma_param(), 1.0 / 64.0);
  EXPECT_DOUBLE_EQ(Schedule(0.5, 16, 16, 0.0).gamma_param(), 1.0 / 56.0);
  for (double m : {0.0, 1.0, 10.0, 1e6}) {
    const double g = Schedule(0.5, 16, 16, m).gamma_param();
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 0.5);
  }
  EXPECT_THROW(Schedule(0.0), std::invalid_argument);
  EXPECT_THROW(Schedule(1.0), std::invalid_argument);
  EXPECT_THROW(Schedule(0.5).s_time(3, 2), std::invalid_argument);
}
