#pragma once

// Distribution primitives for the dose-toxicity model: link CDFs and their
// inverses, Owen's T, and the Beta family used for priors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "ewoc/errors.hpp"

namespace ewoc {

namespace detail {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
template <std::size_t N>
struct GaussLegendre {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  GaussLegendre() {
    for (std::size_t i = 0; i < (N + 1) / 2; ++i) {
      // Chebyshev-like starting guess, then Newton on P_N.
      double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                          (static_cast<double>(N) + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t k = 2; k <= N; ++k) {
          const double pk =
              ((2.0 * static_cast<double>(k) - 1.0) * x * p1 - (static_cast<double>(k) - 1.0) * p0) /
              static_cast<double>(k);
          p0 = p1;
          p1 = pk;
        }
        dp = static_cast<double>(N) * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes[i] = -x;
      nodes[N - 1 - i] = x;
      weights[i] = w;
      weights[N - 1 - i] = w;
    }
  }
};

inline const GaussLegendre<20>& gauss_legendre20() {
  static const GaussLegendre<20> rule;
  return rule;
}

template <class F>
double gl20(const F& f, double a, double b) {
  const auto& rule = gauss_legendre20();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double sum = 0.0;
  for (std::size_t i = 0; i < 20; ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return sum * half;
}

template <class F>
double adaptive_gl(const F& f, double a, double b, double whole, double tol, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = gl20(f, a, mid);
  const double right = gl20(f, mid, b);
  const double both = left + right;
  // Differences below a few ulps of the estimate are rounding, not error.
  const double floor = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(both);
  if (depth <= 0 || std::abs(both - whole) <= std::max(tol, floor)) return both;
  return adaptive_gl(f, a, mid, left, tol, depth - 1) + adaptive_gl(f, mid, b, right, tol, depth - 1);
}

/// Adaptive Gauss-Legendre quadrature with a relative tolerance.
template <class F>
double integrate(const F& f, double a, double b, double rel_tol = 1e-15) {
  const double whole = gl20(f, a, b);
  const double tol = std::max(rel_tol * std::abs(whole), std::numeric_limits<double>::min());
  return adaptive_gl(f, a, b, whole, tol, 30);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Standard normal

/// Phi(z). Backed by the C library erfc, which is accurate to a few ulp over
/// the whole real line (glibc documents < 2 ulp); this keeps the upper and
/// lower tails accurate in relative terms, unlike 1 - erf.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * detail::kInvSqrt2); }

/// 1 - Phi(z) without cancellation.
inline double normal_sf(double z) { return 0.5 * std::erfc(z * detail::kInvSqrt2); }

inline double normal_pdf(double z) { return detail::kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_log_cdf(double z) {
  if (z >= 0.0) return std::log1p(-normal_sf(z));
  if (z > -35.0) return std::log(normal_cdf(z));
  // Mills-ratio asymptotic series; erfc is subnormal beyond this point.
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - detail::kLogSqrt2Pi +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2));
}

// ---------------------------------------------------------------------------
// Owen's T

namespace detail {

// T(h, a) for h >= 0, 0 <= a <= 1 by direct quadrature of the defining integral.
inline double owen_t_core(double h, double a) {
  if (a == 0.0) return 0.0;
  const double hh = 0.5 * h * h;
  if (hh > 745.0) return 0.0;
  auto f = [hh](double x) {
    const double one_x2 = 1.0 + x * x;
    return std::exp(-hh * one_x2) / one_x2;
  };
  return integrate(f, 0.0, a) / (2.0 * std::numbers::pi);
}

}  // namespace detail

/// Owen's T function, T(h, a) = 1/(2 pi) * int_0^a exp(-h^2 (1+x^2)/2) / (1+x^2) dx.
///
/// Evaluated by adaptive Gauss-Legendre quadrature. For |a| > 1 the integral is
/// reflected onto T(a h, 1/a) so every quadrature runs over a range of length <= 1.
inline double owen_t(double h, double a) {
  if (a < 0.0) return -owen_t(h, -a);
  h = std::abs(h);
  if (a <= 1.0) return detail::owen_t_core(h, a);
  if (std::isinf(a)) return 0.5 * normal_sf(h);
  // T(h,a) + T(ah,1/a) = Phi(h)/2 + Phi(ah)/2 - Phi(h) Phi(ah), written in upper tails.
  const double ah = a * h;
  const double q1 = normal_sf(h);
  const double q2 = normal_sf(ah);
  return 0.5 * (q1 + q2) - q1 * q2 - detail::owen_t_core(ah, 1.0 / a);
}

// ---------------------------------------------------------------------------
// Skew-normal (standardized: location 0, scale 1)

namespace detail {

// Canonical case shape >= 0.
inline double skew_normal_cdf_pos(double z, double shape) {
  if (shape == 0.0) return normal_cdf(z);
  if (z >= 0.0) return normal_cdf(z) - 2.0 * owen_t(z, shape);
  // Left tail: Phi(z) - 2T(z,a) subtracts two nearly equal numbers, so integrate
  // the density instead. The integrand shrinks by at least e^-50 over 10 units.
  auto density = [shape](double t) { return 2.0 * normal_pdf(t) * normal_cdf(shape * t); };
  return integrate(density, z - 10.0, z, 1e-14);
}

inline double skew_normal_sf_pos(double z, double shape) {
  if (shape == 0.0) return normal_sf(z);
  if (z >= 0.0) return normal_sf(z) + 2.0 * owen_t(z, shape);
  return 1.0 - skew_normal_cdf_pos(z, shape);
}

}  // namespace detail

inline double skew_normal_cdf(double z, double shape) {
  if (shape >= 0.0) return detail::skew_normal_cdf_pos(z, shape);
  return detail::skew_normal_sf_pos(-z, -shape);
}

inline double skew_normal_sf(double z, double shape) {
  if (shape >= 0.0) return detail::skew_normal_sf_pos(z, shape);
  return detail::skew_normal_cdf_pos(-z, -shape);
}

inline double skew_normal_pdf(double z, double shape) {
  return 2.0 * normal_pdf(z) * normal_cdf(shape * z);
}

// ---------------------------------------------------------------------------
// Link functions

enum class LinkFamily { Logistic, Normal, SkewNormal };

inline std::string to_string(LinkFamily f) {
  switch (f) {
    case LinkFamily::Logistic: return "logistic";
    case LinkFamily::Normal: return "normal";
    case LinkFamily::SkewNormal: return "skewnormal";
  }
  return "unknown";
}

namespace detail {

inline double logistic_log_cdf(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

/// Generic inverse CDF: geometric bracket expansion from the centre, bisection,
/// then guarded Newton polishing.
template <class Cdf, class Pdf>
double invert_cdf(const Cdf& cdf, const Pdf& pdf, double p) {
  double lo = -1.0;
  double hi = 1.0;
  double width = 1.0;
  while (cdf(lo) > p) {
    width *= 2.0;
    lo = -width;
    if (width > 1e6) break;
  }
  width = 1.0;
  while (cdf(hi) < p) {
    width *= 2.0;
    hi = width;
    if (width > 1e6) break;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 3; ++i) {
    const double d = pdf(x);
    if (!(d > 0.0)) break;
    const double next = x - (cdf(x) - p) / d;
    if (!(next >= lo && next <= hi)) break;
    x = next;
  }
  return x;
}

}  // namespace detail

/// A location-scale CDF family used as F in P(DLT | x) = F(beta0 + beta1 x).
class LinkFunction {
 public:
  LinkFunction() = default;

  LinkFunction(LinkFamily family, double location, double scale, double shape = 0.0)
      : family_(family), location_(location), scale_(scale), shape_(shape) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("link scale must be positive and finite");
    if (!std::isfinite(location) || !std::isfinite(shape)) throw DomainError("link parameters must be finite");
  }

  static LinkFunction logistic(double location = 0.0, double scale = 1.0) {
    return {LinkFamily::Logistic, location, scale};
  }
  static LinkFunction normal(double location = 0.0, double scale = 1.0) {
    return {LinkFamily::Normal, location, scale};
  }
  static LinkFunction skew_normal(double location, double scale, double shape) {
    return {LinkFamily::SkewNormal, location, scale, shape};
  }

  LinkFamily family() const noexcept { return family_; }
  double location() const noexcept { return location_; }
  double scale() const noexcept { return scale_; }
  double shape() const noexcept { return family_ == LinkFamily::SkewNormal ? shape_ : 0.0; }

  double standardize(double x) const noexcept { return (x - location_) / scale_; }

  double cdf(double x) const {
    const double z = standardize(x);
    switch (family_) {
      case LinkFamily::Logistic: return 1.0 / (1.0 + std::exp(-z));
      case LinkFamily::Normal: return normal_cdf(z);
      case LinkFamily::SkewNormal: return skew_normal_cdf(z, shape_);
    }
    return 0.0;
  }

  double sf(double x) const {
    const double z = standardize(x);
    switch (family_) {
      case LinkFamily::Logistic: return 1.0 / (1.0 + std::exp(z));
      case LinkFamily::Normal: return normal_sf(z);
      case LinkFamily::SkewNormal: return skew_normal_sf(z, shape_);
    }
    return 0.0;
  }

  double pdf(double x) const {
    const double z = standardize(x);
    switch (family_) {
      case LinkFamily::Logistic: {
        const double e = std::exp(-std::abs(z));
        return e / ((1.0 + e) * (1.0 + e) * scale_);
      }
      case LinkFamily::Normal: return normal_pdf(z) / scale_;
      case LinkFamily::SkewNormal: return skew_normal_pdf(z, shape_) / scale_;
    }
    return 0.0;
  }

  /// log F(x); finite far into both tails for the logistic and normal families.
  double log_cdf(double x) const {
    const double z = standardize(x);
    switch (family_) {
      case LinkFamily::Logistic: return detail::logistic_log_cdf(z);
      case LinkFamily::Normal: return normal_log_cdf(z);
      case LinkFamily::SkewNormal:
        if (shape_ == 0.0) return normal_log_cdf(z);
        return std::log(std::max(skew_normal_cdf(z, shape_), std::numeric_limits<double>::min()));
    }
    return 0.0;
  }

  /// log(1 - F(x)).
  double log_sf(double x) const {
    const double z = standardize(x);
    switch (family_) {
      case LinkFamily::Logistic: return detail::logistic_log_cdf(-z);
      case LinkFamily::Normal: return normal_log_cdf(-z);
      case LinkFamily::SkewNormal:
        if (shape_ == 0.0) return normal_log_cdf(-z);
        return std::log(std::max(skew_normal_sf(z, shape_), std::numeric_limits<double>::min()));
    }
    return 0.0;
  }

  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile requires p in (0, 1)");
    switch (family_) {
      case LinkFamily::Logistic: return location_ + scale_ * (std::log(p) - std::log1p(-p));
      case LinkFamily::Normal:
        return location_ + scale_ * detail::invert_cdf([](double z) { return normal_cdf(z); },
                                                       [](double z) { return normal_pdf(z); }, p);
      case LinkFamily::SkewNormal: {
        const double a = shape_;
        return location_ + scale_ * detail::invert_cdf([a](double z) { return skew_normal_cdf(z, a); },
                                                       [a](double z) { return skew_normal_pdf(z, a); }, p);
      }
    }
    return 0.0;
  }

  std::string label() const {
    auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", v);
      return std::string(buf);
    };
    std::string out = to_string(family_) + "(" + num(location_) + "," + num(scale_);
    if (family_ == LinkFamily::SkewNormal) out += "," + num(shape_);
    return out + ")";
  }

  friend bool operator==(const LinkFunction& a, const LinkFunction& b) {
    return a.family_ == b.family_ && a.location_ == b.location_ && a.scale_ == b.scale_ &&
           a.shape() == b.shape();
  }

 private:
  LinkFamily family_ = LinkFamily::Logistic;
  double location_ = 0.0;
  double scale_ = 1.0;
  double shape_ = 0.0;
};

inline double cdf(const LinkFunction& link, double x) { return link.cdf(x); }
inline double quantile(const LinkFunction& link, double p) { return link.quantile(p); }

// ---------------------------------------------------------------------------
// Beta

struct BetaParams {
  double a = 1.0;
  double b = 1.0;

  bool valid() const noexcept { return a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b); }
  friend bool operator==(const BetaParams&, const BetaParams&) = default;
};

inline double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

inline double beta_log_pdf(const BetaParams& p, double x) {
  if (!p.valid()) throw DomainError("Beta parameters must be positive");
  if (!(x > 0.0 && x < 1.0)) throw DomainError("beta_log_pdf requires x in (0, 1)");
  double out = -log_beta_fn(p.a, p.b);
  if (p.a != 1.0) out += (p.a - 1.0) * std::log(x);
  if (p.b != 1.0) out += (p.b - 1.0) * std::log1p(-x);
  return out;
}

/// Regularized incomplete beta I_x(a, b) (Boost.Math).
inline double beta_cdf(const BetaParams& p, double x) {
  if (!p.valid()) throw DomainError("Beta parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(p.a, p.b, x);
}

inline double beta_quantile(const BetaParams& p, double q) {
  if (!p.valid()) throw DomainError("Beta parameters must be positive");
  if (!(q > 0.0 && q < 1.0)) throw DomainError("beta_quantile requires q in (0, 1)");
  return boost::math::ibeta_inv(p.a, p.b, q);
}

}  // namespace ewoc
