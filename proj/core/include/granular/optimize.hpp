#pragma once

#include <functional>
#include <span>
#include <vector>

namespace granular::opt {

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::vector<double> project(std::vector<double> x) const;
};

using Objective = std::function<double(std::span<const double>)>;
// Writes residuals for parameters x into out (size fixed by the caller).
using Residuals = std::function<void(std::span<const double>, std::span<double>)>;

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  double projected_gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Finite-difference step for coordinate value v: relative * max(|v|, floor).
double fd_step(double v, double relative = 1e-6, double floor = 1e-2);

// Central differences; one-sided where a bound blocks the backward point.
std::vector<double> numeric_gradient(const Objective& f, std::span<const double> x,
                                     const Box& box);

// Row-major n x n Hessian by second differences of f with a 1e-4 relative
// step (absolute below magnitude 1). Coordinates sitting on a bound use a
// forward stencil.
std::vector<double> numeric_hessian(const Objective& f, std::span<const double> x,
                                    const Box& box);

// Projected BFGS with Armijo backtracking along the projection arc. Every
// accepted step decreases f. Converged when the infinity norm of the
// projected gradient falls below gtol * max(1, |f|).
MinimizeResult minimize_box_bfgs(const Objective& f, std::vector<double> x0, const Box& box,
                                 int max_iterations = 500, double gtol = 1e-6);

struct LeastSquaresResult {
  std::vector<double> x;
  double sse = 0.0;
  std::vector<double> jtj_inverse;  // row-major; empty if singular
  int iterations = 0;
  bool converged = false;
};

// Levenberg-Marquardt with a central-difference Jacobian; iterates are
// projected onto the box.
LeastSquaresResult levenberg_marquardt(const Residuals& r, std::size_t n_residuals,
                                       std::vector<double> x0, const Box& box,
                                       int max_iterations = 500);

// Inverse of a symmetric row-major matrix; empty when not positive definite.
std::vector<double> invert_spd(std::span<const double> m, std::size_t n);

}  // namespace granular::opt
