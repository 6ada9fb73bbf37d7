// FFTW-backed spectral operators on cell arrays interpreted as point samples:
// heat semigroup, Riesz potentials, spectral translation.
//
// Wavenumbers follow the symmetric convention k = 2 pi (m_x / sqrt2, m_y / 1)
// with m in [-n/2, n/2).  At Nyquist indices only even multipliers are
// applied as-is; odd (phase) multipliers are replaced by their real part.

#ifndef TURBMIX_SPECTRAL_HPP
#define TURBMIX_SPECTRAL_HPP

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "turbmix/field.hpp"

namespace turbmix {

namespace detail {

template <typename T>
struct FftwDeleter {
  void operator()(T* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter<T>>;

inline FftwBuffer<double> alloc_real(std::size_t n) {
  return FftwBuffer<double>(fftw_alloc_real(n));
}

inline FftwBuffer<fftw_complex> alloc_complex(std::size_t n) {
  return FftwBuffer<fftw_complex>(fftw_alloc_complex(n));
}

/// Process-wide cache of FFTW plans.  Planning is serialised; executing a
/// cached plan on fresh aligned buffers is thread safe.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  struct Pair {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
  };

  /// rank 2 plans for an n x n array, or rank 1 plans for length n.
  Pair get(int rank, int n) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(rank, n);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    const std::size_t real_size = rank == 2 ? static_cast<std::size_t>(n) * n : static_cast<std::size_t>(n);
    const std::size_t cplx_size =
        rank == 2 ? static_cast<std::size_t>(n) * (n / 2 + 1) : static_cast<std::size_t>(n / 2 + 1);
    auto r = alloc_real(real_size);
    auto c = alloc_complex(cplx_size);
    Pair p;
    if (rank == 2) {
      p.forward = fftw_plan_dft_r2c_2d(n, n, r.get(), c.get(), FFTW_ESTIMATE);
      p.inverse = fftw_plan_dft_c2r_2d(n, n, c.get(), r.get(), FFTW_ESTIMATE);
    } else {
      p.forward = fftw_plan_dft_r2c_1d(n, r.get(), c.get(), FFTW_ESTIMATE);
      p.inverse = fftw_plan_dft_c2r_1d(n, c.get(), r.get(), FFTW_ESTIMATE);
    }
    plans_.emplace(key, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.inverse);
    }
  }

  std::mutex mutex_;
  std::map<std::pair<int, int>, Pair> plans_;
};

}  // namespace detail

/// Half-plane spectrum of a real field (unnormalised FFTW r2c layout: rows
/// iy in [0,n), columns ix in [0, n/2]).
class Spectrum {
 public:
  explicit Spectrum(int q)
      : q_(q), n_(std::size_t{1} << q), half_(n_ / 2 + 1), data_(detail::alloc_complex(n_ * half_)) {}

  int q() const { return q_; }
  std::size_t n() const { return n_; }
  std::size_t half() const { return half_; }

  std::complex<double>& operator()(std::size_t ix, std::size_t iy) {
    return reinterpret_cast<std::complex<double>&>(data_[iy * half_ + ix]);
  }
  const std::complex<double>& operator()(std::size_t ix, std::size_t iy) const {
    return reinterpret_cast<const std::complex<double>&>(data_[iy * half_ + ix]);
  }

  fftw_complex* raw() { return data_.get(); }

  /// Signed mode indices.
  long mode_x(std::size_t ix) const { return static_cast<long>(ix); }
  long mode_y(std::size_t iy) const {
    return iy <= n_ / 2 ? static_cast<long>(iy) : static_cast<long>(iy) - static_cast<long>(n_);
  }
  bool nyquist_x(std::size_t ix) const { return ix == n_ / 2; }
  bool nyquist_y(std::size_t iy) const { return iy == n_ / 2; }

  double kx(std::size_t ix) const { return 2.0 * std::numbers::pi * static_cast<double>(mode_x(ix)) / kWidth; }
  double ky(std::size_t iy) const { return 2.0 * std::numbers::pi * static_cast<double>(mode_y(iy)) / kHeight; }
  double k2(std::size_t ix, std::size_t iy) const {
    const double a = kx(ix), b = ky(iy);
    return a * a + b * b;
  }

  /// Multiplicity of a stored half-plane entry in the full spectrum.
  double weight(std::size_t ix) const { return (ix == 0 || ix == n_ / 2) ? 1.0 : 2.0; }

  /// Scale converting sum_k w |F_k|^2 into ||f||_{L^2}^2.
  double parseval_scale() const {
    const double nn = static_cast<double>(n_) * static_cast<double>(n_);
    return kWidth * kHeight / (nn * nn);
  }

 private:
  int q_;
  std::size_t n_;
  std::size_t half_;
  detail::FftwBuffer<fftw_complex> data_;
};

inline Spectrum forward_fft(const ScalarField& f) {
  const int n = static_cast<int>(f.n());
  auto plans = detail::PlanCache::instance().get(2, n);
  auto in = detail::alloc_real(f.size());
  std::copy(f.values().begin(), f.values().end(), in.get());
  Spectrum s(f.q());
  fftw_execute_dft_r2c(plans.forward, in.get(), s.raw());
  return s;
}

/// Normalised inverse; the spectrum is consumed.
inline ScalarField inverse_fft(Spectrum&& s) {
  const int n = static_cast<int>(s.n());
  auto plans = detail::PlanCache::instance().get(2, n);
  auto out = detail::alloc_real(s.n() * s.n());
  fftw_execute_dft_c2r(plans.inverse, s.raw(), out.get());
  ScalarField f(s.q());
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  auto v = f.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = out[k] * scale;
  return f;
}

template <typename Fn>
void for_each_mode(Spectrum& s, Fn&& fn) {
  for (std::size_t iy = 0; iy < s.n(); ++iy)
    for (std::size_t ix = 0; ix < s.half(); ++ix) fn(ix, iy, s(ix, iy));
}

/// e^{tau Delta} f: Fourier multiplier exp(-tau |k|^2).
inline ScalarField heat(const ScalarField& f, double tau) {
  if (tau < 0.0) throw std::invalid_argument("heat: negative diffusion time");
  if (tau == 0.0) return f;
  Spectrum s = forward_fft(f);
  for_each_mode(s, [&](std::size_t ix, std::size_t iy, std::complex<double>& c) {
    c *= std::exp(-tau * s.k2(ix, iy));
  });
  return inverse_fft(std::move(s));
}

/// (-Delta)^{s/2} f with the zero mode removed.
inline ScalarField riesz_potential(const ScalarField& f, double order) {
  Spectrum s = forward_fft(f);
  for_each_mode(s, [&](std::size_t ix, std::size_t iy, std::complex<double>& c) {
    if (ix == 0 && iy == 0) {
      c = 0.0;
      return;
    }
    c *= std::pow(s.k2(ix, iy), 0.5 * order);
  });
  return inverse_fft(std::move(s));
}

/// ||(-Delta)^{s/2} f||_{L^2} computed directly from the spectrum.
inline double sobolev2_norm(const Spectrum& s, double order) {
  double acc = 0.0;
  for (std::size_t iy = 0; iy < s.n(); ++iy) {
    for (std::size_t ix = 0; ix < s.half(); ++ix) {
      if (ix == 0 && iy == 0) continue;
      acc += s.weight(ix) * std::norm(s(ix, iy)) * std::pow(s.k2(ix, iy), order);
    }
  }
  return std::sqrt(acc * s.parseval_scale());
}

namespace detail {

inline bool near_integer(double v, double tol = 1e-9) { return std::abs(v - std::round(v)) <= tol; }

inline std::size_t wrap_index(long v, std::size_t n) {
  const long m = static_cast<long>(n);
  long r = v % m;
  if (r < 0) r += m;
  return static_cast<std::size_t>(r);
}

}  // namespace detail

/// Exact circular shift by whole cells: out(ix, iy) = f(ix - sx, iy - sy).
inline ScalarField shift_cells(const ScalarField& f, long sx, long sy) {
  ScalarField out(f.q());
  const std::size_t n = f.n();
  const std::size_t ox = detail::wrap_index(sx, n);
  const std::size_t oy = detail::wrap_index(sy, n);
  for (std::size_t iy = 0; iy < n; ++iy) {
    const std::size_t dst_y = (iy + oy) % n;
    for (std::size_t ix = 0; ix < n; ++ix) out((ix + ox) % n, dst_y) = f(ix, iy);
  }
  return out;
}

/// tau_h f(x) = f(x - h).  Whole-cell shifts are permutations; otherwise the
/// band-limited interpolant is shifted by a phase multiplier.
inline ScalarField translate(const ScalarField& f, double hx, double hy) {
  const double cx = hx / f.dx();
  const double cy = hy / f.dy();
  if (detail::near_integer(cx) && detail::near_integer(cy)) {
    return shift_cells(f, std::lround(cx), std::lround(cy));
  }
  Spectrum s = forward_fft(f);
  for_each_mode(s, [&](std::size_t ix, std::size_t iy, std::complex<double>& c) {
    const double ax = s.kx(ix) * hx;
    const double ay = s.ky(iy) * hy;
    const std::complex<double> px = s.nyquist_x(ix) ? std::complex<double>(std::cos(ax), 0.0)
                                                    : std::polar(1.0, -ax);
    const std::complex<double> py = s.nyquist_y(iy) ? std::complex<double>(std::cos(ay), 0.0)
                                                    : std::polar(1.0, -ay);
    c *= px * py;
  });
  return inverse_fft(std::move(s));
}

/// Cyclic shift of a contiguous 1-D segment by a possibly fractional number of
/// cells: out[i] = in[i - shift].  Integer parts are exact rotations.
inline void rotate_segment(std::span<double> seg, double shift) {
  const std::size_t len = seg.size();
  if (len <= 1) return;
  const double whole = std::floor(shift);
  const double frac = shift - whole;
  const std::size_t w = detail::wrap_index(static_cast<long>(whole), len);
  if (w != 0) std::rotate(seg.begin(), seg.begin() + static_cast<long>(len - w), seg.end());
  if (frac <= 1e-12 || frac >= 1.0 - 1e-12) {
    if (frac >= 1.0 - 1e-12) std::rotate(seg.begin(), seg.begin() + static_cast<long>(len - 1), seg.end());
    return;
  }
  const int n = static_cast<int>(len);
  auto plans = detail::PlanCache::instance().get(1, n);
  auto buf = detail::alloc_real(len);
  auto spec = detail::alloc_complex(len / 2 + 1);
  std::copy(seg.begin(), seg.end(), buf.get());
  fftw_execute_dft_r2c(plans.forward, buf.get(), spec.get());
  for (std::size_t m = 0; m <= len / 2; ++m) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(m) * frac / static_cast<double>(len);
    auto& c = reinterpret_cast<std::complex<double>&>(spec[m]);
    if (m == len / 2 && len % 2 == 0) {
      c *= std::cos(a);
    } else {
      c *= std::polar(1.0, -a);
    }
  }
  fftw_execute_dft_c2r(plans.inverse, spec.get(), buf.get());
  const double scale = 1.0 / static_cast<double>(len);
  for (std::size_t k = 0; k < len; ++k) seg[k] = buf[k] * scale;
}

/// Time integral of ||e^{kappa s Delta} f||^2 weighted by |k|^{2 order} over
/// s in [0, dt], evaluated mode by mode in closed form.
inline double heat_time_integral(const Spectrum& s, double kappa, double dt, double order) {
  double acc = 0.0;
  for (std::size_t iy = 0; iy < s.n(); ++iy) {
    for (std::size_t ix = 0; ix < s.half(); ++ix) {
      if (ix == 0 && iy == 0 && order > 0.0) continue;
      const double k2 = s.k2(ix, iy);
      const double x = 2.0 * kappa * dt * k2;
      const double g = x < 1e-12 ? dt * (1.0 - 0.5 * x) : dt * (-std::expm1(-x)) / x;
      const double w = (ix == 0 && iy == 0) ? 1.0 : std::pow(k2, order);
      acc += s.weight(ix) * std::norm(s(ix, iy)) * w * g;
    }
  }
  return acc * s.parseval_scale();
}

}  // namespace turbmix

#endif  // TURBMIX_SPECTRAL_HPP
