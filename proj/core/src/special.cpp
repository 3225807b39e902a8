#include "granular/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "granular/errors.hpp"

namespace granular::special {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIter = 1000;

// log of the prefactor x^a e^{-x} / Gamma(a).
double log_prefactor(double a, double x) {
  return a * std::log(x) - x - std::lgamma(a);
}

// Series sum S with P(a, x) = x^a e^{-x} / Gamma(a + 1) * S.
double lower_series(double a, double x) {
  double term = 1.0;
  double sum = 1.0;
  double ap = a;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum;
}

// Continued fraction F with Q(a, x) = x^a e^{-x} / Gamma(a) * F.
double upper_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h;
}

void check_args(double a, double x) {
  if (!(a > 0.0)) throw DomainError("incomplete gamma: shape must be > 0");
  if (!(x >= 0.0)) throw DomainError("incomplete gamma: x must be >= 0");
}

}  // namespace

double gamma_p(double a, double x) {
  check_args(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) {
    return std::exp(log_prefactor(a, x) - std::log(a)) * lower_series(a, x);
  }
  return 1.0 - std::exp(log_prefactor(a, x)) * upper_fraction(a, x);
}

double gamma_q(double a, double x) {
  check_args(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) {
    return 1.0 -
           std::exp(log_prefactor(a, x) - std::log(a)) * lower_series(a, x);
  }
  return std::exp(log_prefactor(a, x)) * upper_fraction(a, x);
}

double log_gamma_p(double a, double x) {
  check_args(a, x);
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) {
    return log_prefactor(a, x) - std::log(a) + std::log(lower_series(a, x));
  }
  return std::log1p(-std::exp(log_prefactor(a, x)) * upper_fraction(a, x));
}

double gamma_p_inverse(double a, double p, double q) {
  if (!(a > 0.0)) throw DomainError("gamma_p_inverse: shape must be > 0");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("gamma_p_inverse: p in [0,1]");
  if (p == 0.0) return 0.0;
  if (q == 0.0) return std::numeric_limits<double>::infinity();
  const bool use_upper = q < p;

  // Wilson-Hilferty starting point.
  const double zq = normal_quantile(p);
  const double t = 1.0 / (9.0 * a);
  double x = a * std::pow(std::max(1.0 - t + zq * std::sqrt(t), 1e-3), 3.0);
  if (p < 0.05 || !(x > 0.0)) {
    // Small-x asymptote P ~ x^a / Gamma(a + 1).
    const double xs = std::exp((std::log(p) + std::lgamma(a + 1.0)) / a);
    if (!(x > 0.0) || xs < x) x = xs;
  }

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  const double lg = std::lgamma(a);
  for (int it = 0; it < 200; ++it) {
    // f > 0 means x is too large.
    const double f = use_upper ? q - gamma_q(a, x) : gamma_p(a, x) - p;
    const double target = use_upper ? q : p;
    if (std::abs(f) <= 4.0 * kEps * target) break;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double dens = std::exp((a - 1.0) * std::log(x) - x - lg);
    double next = x - f / dens;
    if (!(next > lo && next < hi) || !std::isfinite(next)) {
      next = std::isinf(hi) ? 2.0 * x + 1.0 : 0.5 * (lo + hi);
    }
    if (std::abs(next - x) <= 2.0 * kEps * x) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("normal_quantile: p must lie in [0, 1]");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  // 1 - p is exact for p >= 1/2, so the upper half reuses the lower tail.
  if (p > 0.5) return -normal_quantile(1.0 - p);
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double r = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  } else {
    const double r0 = p - 0.5;
    const double r = r0 * r0;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        r0 /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  // Halley refinement.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace granular::special
