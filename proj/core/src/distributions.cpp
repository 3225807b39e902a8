#include "granular/distributions.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "granular/errors.hpp"
#include "granular/rng.hpp"
#include "granular/special.hpp"

namespace granular {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const char* msg) {
  if (!ok) throw DomainError(msg);
}

}  // namespace

void ParetoLaw::validate() const {
  require(x_min > 0.0 && std::isfinite(x_min), "ParetoLaw: x_min must be > 0");
  require(exponent > 0.0 && std::isfinite(exponent),
          "ParetoLaw: exponent must be > 0");
}

void MigParams::validate() const {
  require(a > 0.0 && std::isfinite(a), "MigParams: a must be > 0");
  require(b > 0.0 && std::isfinite(b), "MigParams: b must be > 0");
  require(m >= 0.0 && std::isfinite(m), "MigParams: m must be >= 0");
}

void GseParams::validate() const {
  require(C > 0.0, "GseParams: C must be > 0");
  require(u > 0.0, "GseParams: u must be > 0");
  require(w > 0.0, "GseParams: w must be > 0");
  require(z >= 0.0, "GseParams: z must be >= 0");
  require(std::isfinite(v), "GseParams: v must be finite");
}

double pareto_sample(const ParetoLaw& law, double u) {
  law.validate();
  require(u > 0.0 && u <= 1.0, "pareto_sample: u must lie in (0, 1]");
  return law.x_min * std::pow(u, -1.0 / law.exponent);
}

double pareto_ccdf(const ParetoLaw& law, double x) {
  law.validate();
  if (x <= law.x_min) return 1.0;
  return std::pow(x / law.x_min, -law.exponent);
}

double levy_stable_pdf(double x, double alpha, double scale) {
  require(alpha > 1.0 && alpha <= 2.0, "levy_stable_pdf: alpha must lie in (1, 2]");
  require(scale > 0.0, "levy_stable_pdf: scale must be > 0");
  const double y = std::abs(x) / scale;

  // exp(-t^alpha) < 1e-12 beyond t_max.
  const double t_max = std::pow(27.631021115928547, 1.0 / alpha);

  // Poisson summation: the trapezoid sum with step h equals the sum of the
  // density over the lattice y + 2 pi k / h, so choose the period D = 2 pi / h
  // with D - y beyond the point L where 8 C_alpha L^-(1+alpha) < 1e-9.
  const double tail_const =
      std::tgamma(1.0 + alpha) * std::sin(kPi * alpha / 2.0) / kPi;
  double reach = 60.0;
  if (tail_const > 0.0) {
    reach = std::max(reach, std::pow(8.0 * tail_const / 1e-9, 1.0 / (1.0 + alpha)));
  }
  // Aliases sit at least `reach` away; keeping reach >= 40 y also bounds the
  // error relative to the tail density itself (about 40^-(1+alpha)).
  reach = std::max(reach, 40.0 * y);
  const double period = y + reach;
  const double h = 2.0 * kPi / period;
  const auto n = static_cast<long long>(std::ceil(t_max / h));

  double sum = 0.5;  // t = 0 contributes cos(0) exp(0) / 2
  for (long long k = 1; k <= n; ++k) {
    const double t = static_cast<double>(k) * h;
    sum += std::cos(t * y) * std::exp(-std::pow(t, alpha));
  }
  return std::max(0.0, sum * h / kPi) / scale;
}

double levy_stable_sample(double alpha, double scale, double u1, double u2) {
  require(alpha > 1.0 && alpha <= 2.0, "levy_stable_sample: alpha must lie in (1, 2]");
  require(scale > 0.0, "levy_stable_sample: scale must be > 0");
  require(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0,
          "levy_stable_sample: uniforms must lie in (0, 1)");
  const double v = kPi * (u1 - 0.5);
  const double w = -std::log(u2);
  const double x = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
                   std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
  return scale * x;
}

double mig_log_normalizer(const MigParams& p) {
  p.validate();
  double log_c = p.b * std::log(p.a) - std::lgamma(p.b);
  if (p.m > 0.0) log_c -= special::log_gamma_p(p.b, p.a / p.m);
  return log_c;
}

double mig_pdf(double x, const MigParams& p) {
  require(x >= 0.0, "mig_pdf: x must be >= 0");
  const double y = x + p.m;
  const double log_c = mig_log_normalizer(p);
  if (y <= 0.0) return 0.0;
  return std::exp(log_c - (1.0 + p.b) * std::log(y) - p.a / y);
}

double mig_cdf(double x, const MigParams& p) {
  p.validate();
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double z = p.a / (x + p.m);
  if (p.m == 0.0) return special::gamma_q(p.b, z);
  const double z0 = p.a / p.m;
  const double p0 = special::gamma_p(p.b, z0);
  // Upper tail of the underlying gamma variable keeps precision near x = 0.
  const double q = special::gamma_q(p.b, z);
  const double q0 = special::gamma_q(p.b, z0);
  return std::clamp((q - q0) / p0, 0.0, 1.0);
}

double mig_sample(const MigParams& p, double u) {
  p.validate();
  require(u > 0.0 && u < 1.0, "mig_sample: u must lie in (0, 1)");
  // x + m = a / Z with Z ~ Gamma(b) truncated to Z <= a / m.
  double p0 = 1.0;
  double q0 = 0.0;
  if (p.m > 0.0) {
    p0 = special::gamma_p(p.b, p.a / p.m);
    q0 = special::gamma_q(p.b, p.a / p.m);
  }
  const double target_p = (1.0 - u) * p0;
  const double target_q = q0 + u * p0;
  const double z = special::gamma_p_inverse(p.b, target_p, target_q);
  if (!(z > 0.0)) return std::numeric_limits<double>::infinity();
  return std::max(0.0, p.a / z - p.m);
}

double gse_pdf(double x, const GseParams& p) {
  p.validate();
  const double d = x - p.v;
  const double r = std::abs(x) / p.w;
  const double denom = 2.0 * p.u * p.u * (1.0 + std::pow(r, 2.0 - p.z));
  return p.C * std::exp(-d * d / denom);
}

double laplace_sample(double u) {
  require(u > 0.0 && u < 1.0, "laplace_sample: u must lie in (0, 1)");
  const double b = 1.0 / std::numbers::sqrt2;
  return u < 0.5 ? b * std::log(2.0 * u) : -b * std::log(2.0 * (1.0 - u));
}

double laplace_pdf(double x) {
  return std::numbers::sqrt2 / 2.0 * std::exp(-std::numbers::sqrt2 * std::abs(x));
}

double student_t_unit_sample(double dof, RandomStream& stream) {
  require(dof > 2.0, "student_t_unit_sample: dof must be > 2");
  double a, b, w;
  do {
    a = 2.0 * stream.uniform() - 1.0;
    b = 2.0 * stream.uniform() - 1.0;
    w = a * a + b * b;
  } while (w >= 1.0 || w == 0.0);
  const double t = a * std::sqrt(dof * (std::pow(w, -2.0 / dof) - 1.0) / w);
  return t * std::sqrt((dof - 2.0) / dof);
}

double laplace_sum_pdf(int k, double y) {
  require(k >= 1, "laplace_sum_pdf: k must be >= 1");
  const double kk = static_cast<double>(k);
  const double r = std::sqrt(2.0 * kk) * std::abs(y);
  const double lg_km1 = std::lgamma(kk);  // log (k-1)!
  const double log_pref =
      -2.0 * kk * std::numbers::ln2 + std::log(2.0 * std::sqrt(2.0 * kk)) - lg_km1;
  double sum = 0.0;
  for (int l = 0; l < k; ++l) {
    const double ll = static_cast<double>(l);
    double log_term = std::lgamma(kk) - std::lgamma(ll + 1.0) - std::lgamma(kk - ll) +
                      ll * std::numbers::ln2 + std::lgamma(2.0 * kk - 1.0 - ll) - lg_km1;
    if (l > 0) {
      if (r == 0.0) break;
      log_term += ll * std::log(r);
    }
    sum += std::exp(log_term + log_pref - r);
  }
  return sum;
}

double correlated_laplace_cf2(double t, double rho) {
  require(std::abs(rho) < 1.0, "correlated_laplace_cf2: |rho| must be < 1");
  if (t == 0.0) return 1.0;
  using boost::math::quadrature::gauss_kronrod;
  const double t2 = t * t;
  const double diag = 1.0 + t2;
  const double off = t2 * rho;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto outer = [&](double s1) {
    if (s1 == 0.0) return 0.0;
    auto inner = [&](double s2) {
      const double quad = diag * (s1 * s1 + s2 * s2) + 2.0 * off * s1 * s2;
      return s1 * s2 * std::exp(-0.5 * quad);
    };
    return gauss_kronrod<double, 31>::integrate(inner, 0.0, kInf, 12, 1e-13);
  };
  return gauss_kronrod<double, 31>::integrate(outer, 0.0, kInf, 12, 1e-12);
}

}  // namespace granular
