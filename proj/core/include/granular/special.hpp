#pragma once

namespace granular::special {

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
// Series for x < a + 1, Lentz continued fraction for Q otherwise; relative
// error below 1e-13 over the ranges used in this library.
double gamma_p(double a, double x);

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed
// directly so that small tails keep full relative precision.
double gamma_q(double a, double x);

// log P(a, x), accurate when P underflows.
double log_gamma_p(double a, double x);

// Solves P(a, x) = p for x (safeguarded Newton with a bisection bracket).
// `q` must equal 1 - p; passing both lets the solver work on whichever tail
// is smaller.
double gamma_p_inverse(double a, double p, double q);

// Standard normal quantile (Acklam's rational approximation refined by one
// Halley step; |error| < 1e-14 for p in (1e-300, 1 - 1e-16)).
double normal_quantile(double p);

double normal_cdf(double x);

}  // namespace granular::special
