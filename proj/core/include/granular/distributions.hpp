#pragma once

#include <cstdint>

namespace granular {

class RandomStream;

// Pareto law on [x_min, inf) with density exponent/x_min * (x/x_min)^-(1+exponent).
struct ParetoLaw {
  double x_min = 1.0;
  double exponent = 1.5;

  void validate() const;
};

// Modified Inverse Gamma: density C(a,b,m) (x+m)^-(1+b) exp(-a/(x+m)) on x >= 0.
struct MigParams {
  double a = 1.0;  // scale
  double b = 1.0;  // shape; right tail ~ x^-(1+b)
  double m = 0.0;  // location

  void validate() const;
};

// Generalized Stretched Exponential (amplitude-free, symmetric in |x|):
// C exp(-(x-v)^2 / (2 u^2 (1 + (|x|/w)^(2-z)))).
struct GseParams {
  double C = 1.0;
  double u = 1.0;
  double v = 0.0;
  double w = 1.0;
  double z = 1.0;

  void validate() const;
};

// Inverse-CDF draw; u in (0, 1].
double pareto_sample(const ParetoLaw& law, double u);
double pareto_ccdf(const ParetoLaw& law, double x);

// Symmetric alpha-stable density with characteristic function
// exp(-|scale t|^alpha), alpha in (1, 2]. Evaluated by trapezoidal inversion of
// the characteristic function; the step is chosen from the alpha-stable tail
// constant so the aliasing error stays below 1e-9 and the grid is cut where
// the integrand drops under 1e-12.
double levy_stable_pdf(double x, double alpha, double scale);

// Chambers-Mallows-Stuck transform of two uniforms in (0, 1).
double levy_stable_sample(double alpha, double scale, double u1, double u2);

double mig_log_normalizer(const MigParams& p);
double mig_pdf(double x, const MigParams& p);
double mig_cdf(double x, const MigParams& p);
// Inverse CDF; the root is polished until the CDF matches u to 1e-10.
double mig_sample(const MigParams& p, double u);

double gse_pdf(double x, const GseParams& p);

// Laplace with unit variance (scale 1/sqrt(2)); u in (0, 1).
double laplace_sample(double u);
double laplace_pdf(double x);

// Student-t with `dof` > 2 degrees of freedom rescaled to unit variance.
// Uses Bailey's polar method; consumes a variable number of uniforms.
double student_t_unit_sample(double dof, RandomStream& stream);

// Density of (X_1 + ... + X_k) / sqrt(k) for i.i.d. unit-variance Laplace
// X_i, as a finite closed-form sum.
double laplace_sum_pdf(int k, double y);

// Characteristic function of the sum of two unit-variance Laplace variables
// built from correlated Gaussian components (correlation rho), defined by the
// two-dimensional integral over the mixing scales (sigma_1, sigma_2).
double correlated_laplace_cf2(double t, double rho);

}  // namespace granular
