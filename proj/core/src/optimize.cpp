#include "granular/optimize.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "granular/errors.hpp"

namespace granular::opt {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

Vec to_vec(std::span<const double> x) {
  return Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
}


bool at_lower(const Box& box, std::span<const double> x, std::size_t i, double h) {
  return x[i] - h < box.lower[i];
}

bool at_upper(const Box& box, std::span<const double> x, std::size_t i, double h) {
  return x[i] + h > box.upper[i];
}

double evaluate(const Objective& f, const std::vector<double>& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<double> Box::project(std::vector<double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
  return x;
}

double fd_step(double v, double relative, double floor) {
  return relative * std::max(std::abs(v), floor);
}

std::vector<double> numeric_gradient(const Objective& f, std::span<const double> x,
                                     const Box& box) {
  std::vector<double> g(x.size());
  std::vector<double> p(x.begin(), x.end());
  const double f0 = f(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = fd_step(x[i]);
    const bool lo = at_lower(box, x, i, h);
    const bool hi = at_upper(box, x, i, h);
    if (!lo && !hi) {
      p[i] = x[i] + h;
      const double fp = f(p);
      p[i] = x[i] - h;
      const double fm = f(p);
      g[i] = (fp - fm) / (2.0 * h);
    } else if (lo) {
      p[i] = x[i] + h;
      g[i] = (f(p) - f0) / h;
    } else {
      p[i] = x[i] - h;
      g[i] = (f0 - f(p)) / h;
    }
    p[i] = x[i];
  }
  return g;
}

std::vector<double> numeric_hessian(const Objective& f, std::span<const double> x,
                                    const Box& box) {
  const std::size_t n = x.size();
  std::vector<double> h(n), plus(n), minus(n);
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = fd_step(x[i], 1e-4, 1.0);
    if (at_lower(box, x, i, h[i])) {
      plus[i] = 2.0 * h[i];
      minus[i] = 0.0;
    } else if (at_upper(box, x, i, h[i])) {
      plus[i] = 0.0;
      minus[i] = -2.0 * h[i];
    } else {
      plus[i] = h[i];
      minus[i] = -h[i];
    }
  }
  std::vector<double> p(x.begin(), x.end());
  auto f_at = [&](std::size_t i, double di, std::size_t j, double dj) {
    p[i] += di;
    p[j] += dj;
    const double v = f(p);
    p[i] = x[i];
    p[j] = x[j];
    return v;
  };
  std::vector<double> H(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mid = 0.5 * (plus[i] + minus[i]);
    const double fp = f_at(i, plus[i], i, 0.0);
    const double fc = f_at(i, mid, i, 0.0);
    const double fm = f_at(i, minus[i], i, 0.0);
    H[i * n + i] = (fp - 2.0 * fc + fm) / (h[i] * h[i]);
    for (std::size_t j = 0; j < i; ++j) {
      const double v = (f_at(i, plus[i], j, plus[j]) - f_at(i, plus[i], j, minus[j]) -
                        f_at(i, minus[i], j, plus[j]) + f_at(i, minus[i], j, minus[j])) /
                       ((plus[i] - minus[i]) * (plus[j] - minus[j]));
      H[i * n + j] = H[j * n + i] = v;
    }
  }
  return H;
}

MinimizeResult minimize_box_bfgs(const Objective& f, std::vector<double> x0, const Box& box,
                                 int max_iterations, double gtol) {
  const std::size_t n = x0.size();
  if (box.lower.size() != n || box.upper.size() != n)
    throw ContractError("minimize_box_bfgs: bounds do not match the parameter count");

  std::vector<double> x = box.project(std::move(x0));
  double fx = evaluate(f, x);
  if (!std::isfinite(fx)) throw DomainError("minimize_box_bfgs: objective not finite at start");

  auto projected = [&](const std::vector<double>& at, const std::vector<double>& g) {
    Vec pg = to_vec(g);
    for (std::size_t i = 0; i < n; ++i) {
      const bool lo = at[i] <= box.lower[i] && g[i] > 0.0;
      const bool hi = at[i] >= box.upper[i] && g[i] < 0.0;
      if (lo || hi) pg[static_cast<Eigen::Index>(i)] = 0.0;
    }
    return pg;
  };

  MinimizeResult res;
  Mat Hinv = Mat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  bool fresh = true;
  std::vector<double> g = numeric_gradient(f, x, box);
  Vec pg = projected(x, g);

  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it;
    const double pnorm = pg.lpNorm<Eigen::Infinity>();
    if (pnorm <= gtol * std::max(1.0, std::abs(fx))) {
      res.converged = true;
      break;
    }

    Vec d = -Hinv * pg;
    for (std::size_t i = 0; i < n; ++i)
      if (pg[static_cast<Eigen::Index>(i)] == 0.0) d[static_cast<Eigen::Index>(i)] = 0.0;
    const Vec gv = to_vec(g);
    if (gv.dot(d) >= 0.0) {
      Hinv.setIdentity();
      fresh = true;
      d = -pg;
    }
    if (fresh) {
      // Keep the first step within a unit box in parameter space.
      const double dn = d.lpNorm<Eigen::Infinity>();
      if (dn > 1.0) d /= dn;
    }

    double t = 1.0;
    bool accepted = false;
    std::vector<double> xn(n);
    double fn = fx;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + t * d[static_cast<Eigen::Index>(i)];
      xn = box.project(xn);
      fn = evaluate(f, xn);
      const Vec step = to_vec(xn) - to_vec(x);
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      if (fn <= fx + 1e-4 * gv.dot(step)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (!fresh) {
        Hinv.setIdentity();
        fresh = true;
        continue;
      }
      break;
    }

    std::vector<double> gn = numeric_gradient(f, xn, box);
    const Vec s = to_vec(xn) - to_vec(x);
    const Vec y = to_vec(gn) - gv;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) Hinv *= sy / y.dot(y);
      const double rho = 1.0 / sy;
      const Mat I = Mat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
             rho * s * s.transpose();
      fresh = false;
    }
    x = std::move(xn);
    fx = fn;
    g = std::move(gn);
    pg = projected(x, g);
    res.iterations = it + 1;
  }

  res.x = x;
  res.value = fx;
  res.projected_gradient_norm = pg.lpNorm<Eigen::Infinity>();
  if (!res.converged)
    res.converged = res.projected_gradient_norm <= gtol * std::max(1.0, std::abs(fx));
  return res;
}

std::vector<double> invert_spd(std::span<const double> m, std::size_t n) {
  const Mat M = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>(
      m.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success) return {};
  const Mat inv = llt.solve(Mat::Identity(static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(n)));
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

LeastSquaresResult levenberg_marquardt(const Residuals& r, std::size_t n_residuals,
                                       std::vector<double> x0, const Box& box,
                                       int max_iterations) {
  const std::size_t n = x0.size();
  const auto N = static_cast<Eigen::Index>(n);
  const auto M = static_cast<Eigen::Index>(n_residuals);
  if (box.lower.size() != n || box.upper.size() != n)
    throw ContractError("levenberg_marquardt: bounds do not match the parameter count");

  std::vector<double> x = box.project(std::move(x0));
  std::vector<double> res(n_residuals), tmp_p(n_residuals), tmp_m(n_residuals);
  auto eval = [&](const std::vector<double>& at, std::vector<double>& out) {
    r(at, out);
    double s = 0.0;
    for (double v : out) s += v * v;
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
  };
  auto jacobian = [&](const std::vector<double>& at) {
    Mat J(M, N);
    std::vector<double> p = at;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = fd_step(at[j]);
      double lo = std::max(box.lower[j], at[j] - h);
      double hi = std::min(box.upper[j], at[j] + h);
      p[j] = hi;
      r(p, tmp_p);
      p[j] = lo;
      r(p, tmp_m);
      p[j] = at[j];
      const double span = hi - lo;
      for (Eigen::Index i = 0; i < M; ++i)
        J(i, static_cast<Eigen::Index>(j)) =
            span > 0.0 ? (tmp_p[static_cast<std::size_t>(i)] - tmp_m[static_cast<std::size_t>(i)]) / span
                       : 0.0;
    }
    return J;
  };

  LeastSquaresResult out;
  double sse = eval(x, res);
  if (!std::isfinite(sse)) throw DomainError("levenberg_marquardt: residuals not finite at start");
  double lambda = 1e-3;
  double nu = 2.0;
  Mat J = jacobian(x);
  Vec rv = to_vec(res);
  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    const Mat A = J.transpose() * J;
    const Vec g = J.transpose() * rv;
    if (g.lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, sse) || sse < 1e-30) {
      out.converged = true;
      break;
    }
    Mat Ad = A;
    for (Eigen::Index i = 0; i < N; ++i) Ad(i, i) += lambda * std::max(A(i, i), 1e-12);
    const Vec step = Ad.ldlt().solve(-g);
    std::vector<double> xn(n);
    for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step[static_cast<Eigen::Index>(i)];
    xn = box.project(xn);
    std::vector<double> rn(n_residuals);
    const double sn = eval(xn, rn);
    const Vec dx = to_vec(xn) - to_vec(x);
    const double predicted = -(2.0 * g.dot(dx) + dx.dot(A * dx));
    const double ratio = predicted > 0.0 ? (sse - sn) / predicted : -1.0;
    if (sn < sse && ratio > 0.0) {
      const bool small_step = dx.norm() <= 1e-14 * (to_vec(x).norm() + 1e-14);
      const bool flat = (sse - sn) <= 1e-15 * sse;
      x = std::move(xn);
      sse = sn;
      res = std::move(rn);
      rv = to_vec(res);
      J = jacobian(x);
      lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * ratio - 1.0, 3));
      nu = 2.0;
      if (small_step || flat) {
        out.converged = true;
        break;
      }
    } else {
      lambda *= nu;
      nu *= 2.0;
      if (lambda > 1e16) {
        // No descent possible at working precision: a stationary point.
        out.converged = g.lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, sse);
        break;
      }
    }
  }
  out.x = x;
  out.sse = sse;
  const Mat A = J.transpose() * J;
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a[i * n + j] = A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  out.jtj_inverse = invert_spd(a, n);
  return out;
}

}  // namespace granular::opt
