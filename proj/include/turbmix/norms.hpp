#ifndef TURBMIX_NORMS_HPP
#define TURBMIX_NORMS_HPP

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <variant>

#include "turbmix/field.hpp"
#include "turbmix/spectral.hpp"

namespace turbmix {

struct Lp {
  double p;
};
struct SobolevRiesz {
  double s;
  double p;
};
struct BesovSup {
  double s;
  double p;
};
struct DiscreteTV {};

using NormSpec = std::variant<Lp, SobolevRiesz, BesovSup, DiscreteTV>;

namespace detail {

inline void check_exponents(double s, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("norm: p must lie in [1, inf]");
  if (!(s > -2.0 && s < 2.0)) throw std::invalid_argument("norm: s must lie in (-2, 2)");
}

inline ScalarField zero_mean(const ScalarField& f) {
  const double m = mean(f);
  if (std::abs(m) > 1e-12 * (1.0 + lp_norm(f, std::numeric_limits<double>::infinity()))) {
    std::clog << "turbmix: warning: subtracting non-zero mean " << m << " before fractional norm\n";
  }
  return f - m;
}

inline double mean_abs_pow(const ScalarField& a, const ScalarField& b, double p) {
  double acc = 0.0;
  const auto va = a.values();
  const auto vb = b.values();
  if (std::isinf(p)) {
    for (std::size_t k = 0; k < va.size(); ++k) acc = std::max(acc, std::abs(va[k] - vb[k]));
    return acc;
  }
  for (std::size_t k = 0; k < va.size(); ++k) acc += std::pow(std::abs(va[k] - vb[k]), p);
  return std::pow(acc / static_cast<double>(va.size()), 1.0 / p);
}

}  // namespace detail

/// ||(-Delta)^{s/2} f||_{L^p} for zero-mean f.
inline double sobolev_norm(const ScalarField& f, double s, double p) {
  detail::check_exponents(s, p);
  const ScalarField g = detail::zero_mean(f);
  if (p == 2.0) return sobolev2_norm(forward_fft(g), s);
  return lp_norm(riesz_potential(g, s), p);
}

/// sup over dyadic axis shifts h of |h|^{-s} (mean |f(.+h) - f|^p)^{1/p}.
inline double besov_sup_norm(const ScalarField& f, double s, double p) {
  detail::check_exponents(s, p);
  const ScalarField g = detail::zero_mean(f);
  double best = 0.0;
  for (int a = 1; a <= g.q(); ++a) {
    const long cells = static_cast<long>(g.n() >> a);
    const double hx = cells * g.dx();
    const double hy = cells * g.dy();
    best = std::max(best, std::pow(hx, -s) * detail::mean_abs_pow(shift_cells(g, -cells, 0), g, p));
    best = std::max(best, std::pow(hy, -s) * detail::mean_abs_pow(shift_cells(g, 0, -cells), g, p));
  }
  return best;
}

inline double norm(const ScalarField& f, const NormSpec& spec) {
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Lp>) {
          if (!(k.p >= 1.0)) throw std::invalid_argument("norm: p must lie in [1, inf]");
          return lp_norm(f, k.p);
        } else if constexpr (std::is_same_v<K, SobolevRiesz>) {
          return sobolev_norm(f, k.s, k.p);
        } else if constexpr (std::is_same_v<K, BesovSup>) {
          return besov_sup_norm(f, k.s, k.p);
        } else {
          return discrete_tv(f);
        }
      },
      spec);
}

}  // namespace turbmix

#endif  // TURBMIX_NORMS_HPP
