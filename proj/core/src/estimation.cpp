#include "granular/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "granular/errors.hpp"
#include "granular/optimize.hpp"
#include "granular/parallel.hpp"
#include "granular/special.hpp"

namespace granular {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const double kMadFactor = std::sqrt(std::numbers::pi / 2.0);

double lookup(const std::vector<std::string>& names, const std::vector<double>& values,
              const std::string& name) {
  for (std::size_t i = 0; i < names.size() && i < values.size(); ++i)
    if (names[i] == name) return values[i];
  return kNaN;
}

void require_two(std::span<const double> g, const char* who) {
  if (g.size() < 2) throw DomainError(std::string(who) + ": need at least 2 observations");
}

std::vector<double> standard_errors(std::span<const double> cov, std::size_t n) {
  if (cov.empty()) return {};
  std::vector<double> se(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = cov[i * n + i];
    if (!(v > 0.0) || !std::isfinite(v)) return {};
    se[i] = std::sqrt(v);
  }
  return se;
}

// Sufficient statistics of the MIG likelihood for one location m.
class MigLikelihood {
 public:
  explicit MigLikelihood(std::span<const double> x) : x_(x), buf_(x.size()) {}

  double operator()(double a, double b, double m) {
    if (!(a > 0.0) || !(b > 0.0) || !(m >= 0.0)) return std::numeric_limits<double>::infinity();
    if (m != cached_m_) refresh(m);
    const double n = static_cast<double>(x_.size());
    const double log_c = mig_log_normalizer({a, b, m});
    return -n * log_c + (1.0 + b) * sum_log_ + a * sum_inv_;
  }

 private:
  void refresh(double m) {
    for (std::size_t i = 0; i < x_.size(); ++i) buf_[i] = std::log(x_[i] + m);
    sum_log_ = pairwise_sum(buf_);
    for (std::size_t i = 0; i < x_.size(); ++i) buf_[i] = 1.0 / (x_[i] + m);
    sum_inv_ = pairwise_sum(buf_);
    cached_m_ = m;
  }

  std::span<const double> x_;
  std::vector<double> buf_;
  double cached_m_ = kNaN;
  double sum_log_ = 0.0;
  double sum_inv_ = 0.0;
};

}  // namespace

double FitResult::param(const std::string& name) const { return lookup(names, params, name); }
double FitResult::se(const std::string& name) const {
  return lookup(names, standard_errors, name);
}

double mad_volatility(std::span<const double> g) {
  require_two(g, "mad_volatility");
  const double n = static_cast<double>(g.size());
  const double mean = pairwise_sum(g) / n;
  std::vector<double> dev(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) dev[i] = std::abs(g[i] - mean);
  return kMadFactor * pairwise_sum(dev) / n;
}

double sd_volatility(std::span<const double> g) {
  require_two(g, "sd_volatility");
  const double n = static_cast<double>(g.size());
  const double mean = pairwise_sum(g) / n;
  std::vector<double> dev(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) dev[i] = (g[i] - mean) * (g[i] - mean);
  return std::sqrt(pairwise_sum(dev) / (n - 1.0));
}

std::vector<double> leave_one_out_rescale(std::span<const double> series) {
  const std::size_t T = series.size();
  if (T < 3) throw DomainError("leave_one_out_rescale: need at least 3 observations");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<long double> prefix(T + 1, 0.0L);
  for (std::size_t i = 0; i < T; ++i) prefix[i + 1] = prefix[i] + sorted[i];
  const long double total = prefix[T];
  double scale = 0.0;
  for (double v : series) scale = std::max(scale, std::abs(v));

  std::vector<double> out(T);
  const long double rest = static_cast<long double>(T - 1);
  for (std::size_t t = 0; t < T; ++t) {
    const long double gt = series[t];
    const long double m = (total - gt) / rest;
    // Sum of |g_s - m| over all s, then drop s = t.
    const auto idx = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), static_cast<double>(m)) - sorted.begin());
    const long double below = m * static_cast<long double>(idx) - prefix[idx];
    const long double above = (total - prefix[idx]) - m * static_cast<long double>(T - idx);
    const long double abs_sum = below + above - std::abs(gt - m);
    const double mad = static_cast<double>(abs_sum / rest);
    if (!(mad > 1e-13 * scale)) {
      out[t] = kNaN;
      continue;
    }
    out[t] = static_cast<double>(gt - m) / (kMadFactor * mad);
  }
  return out;
}

namespace {

// Gamma moment match of 1/(x + m0): shape mean^2/var, rate mean/var.
MigParams moments_at_location(std::span<const double> samples, double m0) {
  const double n = static_cast<double>(samples.size());
  std::vector<double> y(samples.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (samples[i] + m0);
  const double mean = pairwise_sum(y) / n;
  for (auto& v : y) v = (v - mean) * (v - mean);
  const double var = pairwise_sum(y) / (n - 1.0);
  MigParams p;
  p.m = m0;
  if (var > 0.0 && mean > 0.0) {
    p.b = mean * mean / var;
    p.a = mean / var;
  }
  return p;
}

}  // namespace

MigParams mig_initial_guess(std::span<const double> samples) {
  if (samples.empty()) throw DomainError("mig_initial_guess: no samples");
  return moments_at_location(samples, 0.5 * *std::min_element(samples.begin(), samples.end()));
}

double mig_negative_log_likelihood(std::span<const double> samples, const MigParams& p) {
  p.validate();
  MigLikelihood nll(samples);
  return nll(p.a, p.b, p.m);
}

namespace {

opt::Box mig_box() { return {{1e-8, 1e-6, 0.0}, {1e8, 1e4, 1e8}}; }

opt::Box gse_box() {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  return {{1e-6, 1e-6, -kInf, 1e-6, 0.0}, {kInf, kInf, kInf, kInf, 2.0}};
}

bool inside(const opt::Box& box, const std::vector<double>& x) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= box.lower[i] && x[i] <= box.upper[i])) return false;
  return true;
}

}  // namespace

bool mig_start_in_bounds(const MigParams& p) { return inside(mig_box(), {p.a, p.b, p.m}); }

bool gse_start_in_bounds(const GseParams& p) {
  return inside(gse_box(), {p.C, p.u, p.v, p.w, p.z});
}

FitResult fit_mig_mle(std::span<const double> samples, std::optional<MigParams> init) {
  if (samples.size() < 100) throw DomainError("fit_mig_mle: need at least 100 samples");
  for (double x : samples)
    if (!(x > 0.0) || !std::isfinite(x))
      throw DomainError("fit_mig_mle: samples must be positive and finite");
  MigLikelihood nll(samples);
  MigParams start = init ? *init : mig_initial_guess(samples);
  start.validate();
  if (!mig_start_in_bounds(start)) throw DomainError("fit_mig_mle: initial value outside bounds");
  if (!init) {
    // Half the minimum is a poor location when the density is positive at
    // zero; moment matches at fractions of the median compete on likelihood.
    std::vector<double> sorted(samples.begin(), samples.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                     sorted.end());
    const double median = sorted[sorted.size() / 2];
    double best = nll(start.a, start.b, start.m);
    for (double f : {0.05, 0.1, 0.2, 0.5, 1.0, 2.0}) {
      const auto cand = moments_at_location(samples, f * median);
      if (!mig_start_in_bounds(cand)) continue;
      const double v = nll(cand.a, cand.b, cand.m);
      if (v < best) {
        best = v;
        start = cand;
      }
    }
  }

  const opt::Objective f = [&](std::span<const double> p) { return nll(p[0], p[1], p[2]); };
  const opt::Box box = mig_box();
  const auto res = opt::minimize_box_bfgs(f, {start.a, start.b, start.m}, box);

  FitResult fit;
  fit.names = {"a", "b", "m"};
  fit.params = res.x;
  fit.objective = res.value;
  fit.n_obs = samples.size();
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  if (fit.converged) {
    const auto H = opt::numeric_hessian(f, res.x, box);
    fit.standard_errors = standard_errors(opt::invert_spd(H, 3), 3);
  }
  return fit;
}

namespace {

// Half the distance between the points where the density falls to
// exp(-1/2) of its peak; exactly u for the Gaussian core.
double half_height_width(const DensityEstimate& d, double peak, double center) {
  const double level = peak * std::exp(-0.5);
  auto crossing = [&](bool right) {
    const auto c = static_cast<std::size_t>(
        std::lower_bound(d.grid.begin(), d.grid.end(), center) - d.grid.begin());
    if (right) {
      for (std::size_t i = std::max<std::size_t>(c, 1); i < d.grid.size(); ++i)
        if (d.values[i] < level) {
          const double t = (d.values[i - 1] - level) / (d.values[i - 1] - d.values[i]);
          return d.grid[i - 1] + t * (d.grid[i] - d.grid[i - 1]);
        }
      return d.grid.back();
    }
    for (std::size_t i = std::min(c, d.grid.size() - 1); i > 0; --i)
      if (d.values[i - 1] < level) {
        const double t = (d.values[i] - level) / (d.values[i] - d.values[i - 1]);
        return d.grid[i] - t * (d.grid[i] - d.grid[i - 1]);
      }
    return d.grid.front();
  };
  return std::max(0.5 * (crossing(true) - crossing(false)), 1e-3);
}

}  // namespace

GseParams gse_initial_guess(const DensityEstimate& d) {
  if (d.grid.size() < 3) throw DomainError("gse_initial_guess: grid too small");
  const auto peak_it = std::max_element(d.values.begin(), d.values.end());
  const auto peak_idx = static_cast<std::size_t>(peak_it - d.values.begin());
  GseParams p;
  p.C = std::max(*peak_it, 1e-6);
  p.v = d.grid[peak_idx];
  double mass = 0.0, dev = 0.0;
  for (std::size_t i = 1; i < d.grid.size(); ++i) {
    const double dx = d.grid[i] - d.grid[i - 1];
    mass += 0.5 * dx * (d.values[i] + d.values[i - 1]);
    dev += 0.5 * dx *
           (d.values[i] * std::abs(d.grid[i] - p.v) +
            d.values[i - 1] * std::abs(d.grid[i - 1] - p.v));
  }
  p.u = mass > 0.0 ? std::max(kMadFactor * dev / mass, 1e-3) : 1.0;
  p.w = 2.0 * p.u;
  p.z = 1.0;
  return p;
}

FitResult fit_gse_nls(const DensityEstimate& density, std::optional<GseParams> init) {
  if (density.grid.size() != density.values.size() || density.grid.size() < 6)
    throw DomainError("fit_gse_nls: density grid is malformed");
  if (density.grid.front() > -8.0 || density.grid.back() < 8.0)
    throw DomainError("fit_gse_nls: grid must cover [-8, 8]");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < density.grid.size(); ++i) {
    if (density.grid[i] < -8.0 || density.grid[i] > 8.0) continue;
    xs.push_back(density.grid[i]);
    ys.push_back(density.values[i]);
  }
  const GseParams start = init ? *init : gse_initial_guess(density);
  start.validate();

  if (!gse_start_in_bounds(start)) throw DomainError("fit_gse_nls: initial value outside bounds");
  const opt::Box box = gse_box();
  const opt::Residuals r = [&](std::span<const double> p, std::span<double> out) {
    const double C = p[0], u = p[1], v = p[2], w = p[3], z = p[4];
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double d = xs[i] - v;
      const double denom = 2.0 * u * u * (1.0 + std::pow(std::abs(xs[i]) / w, 2.0 - z));
      out[i] = C * std::exp(-d * d / denom) - ys[i];
    }
  };
  auto res = opt::levenberg_marquardt(r, xs.size(),
                                      {start.C, start.u, start.v, start.w, start.z}, box);
  if (!init) {
    // The adjusted MAD overstates the core width when the tails are strongly
    // stretched; a second start from the half-height width covers that case.
    GseParams alt = start;
    alt.u = half_height_width(density, start.C, start.v);
    alt.w = 2.0 * alt.u;
    const auto res2 =
        opt::levenberg_marquardt(r, xs.size(), {alt.C, alt.u, alt.v, alt.w, alt.z}, box);
    if (res2.sse < res.sse) res = res2;
  }
  FitResult fit;
  fit.names = {"C", "u", "v", "w", "z"};
  fit.params = res.x;
  fit.objective = res.sse;
  fit.n_obs = xs.size();
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  if (fit.converged && !res.jtj_inverse.empty()) {
    const double s2 = res.sse / static_cast<double>(xs.size() - 5);
    std::vector<double> cov = res.jtj_inverse;
    for (auto& c : cov) c *= s2;
    fit.standard_errors.resize(5);
    for (std::size_t i = 0; i < 5; ++i) fit.standard_errors[i] = std::sqrt(std::max(0.0, cov[i * 5 + i]));
  }
  return fit;
}

double gaussian_mass_fraction(const DensityEstimate& d, double w) {
  if (!(w >= 0.0)) throw DomainError("gaussian_mass_fraction: w must be >= 0");
  if (d.grid.empty() || d.grid.front() > -w || d.grid.back() < w)
    throw DomainError("gaussian_mass_fraction: grid does not cover [-w, w]");
  if (w == 0.0) return 0.0;
  auto interp = [&](double x) {
    auto it = std::lower_bound(d.grid.begin(), d.grid.end(), x);
    if (it == d.grid.begin()) return d.values.front();
    const auto j = static_cast<std::size_t>(it - d.grid.begin());
    const double t = (x - d.grid[j - 1]) / (d.grid[j] - d.grid[j - 1]);
    return d.values[j - 1] + t * (d.values[j] - d.values[j - 1]);
  };
  std::vector<double> xs{-w};
  std::vector<double> ys{interp(-w)};
  for (std::size_t i = 0; i < d.grid.size(); ++i) {
    if (d.grid[i] > -w && d.grid[i] < w) {
      xs.push_back(d.grid[i]);
      ys.push_back(d.values[i]);
    }
  }
  xs.push_back(w);
  ys.push_back(interp(w));
  std::vector<double> pieces(xs.size() - 1);
  for (std::size_t i = 1; i < xs.size(); ++i)
    pieces[i - 1] = 0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]);
  return std::clamp(pairwise_sum(pieces), 0.0, 1.0);
}

std::vector<ExponentFit> power_law_exponent_profile(std::span<const double> sizes,
                                                    std::span<const double> vols,
                                                    std::span<const double> q_list,
                                                    std::size_t n_bins) {
  const auto bins = binned_volatility_moments(sizes, vols, q_list, n_bins);
  std::vector<ExponentFit> out;
  for (std::size_t j = 0; j < q_list.size(); ++j) {
    std::vector<double> x, y;
    for (const auto& b : bins) {
      if (std::isfinite(b.moments[j]) && b.moments[j] > 0.0 && b.mean_size > 0.0) {
        x.push_back(b.mean_size);
        y.push_back(b.moments[j]);
      }
    }
    out.push_back({q_list[j], loglog_ols(x, y)});
  }
  return out;
}

double bootstrap_slope_se(std::span<const double> sizes, std::span<const double> vols,
                          double q, std::size_t n_bins, std::size_t n_bootstrap,
                          RandomStream& stream) {
  if (sizes.size() != vols.size()) throw ContractError("bootstrap_slope_se: length mismatch");
  if (n_bootstrap < 2) throw DomainError("bootstrap_slope_se: need at least 2 resamples");
  const std::size_t n = sizes.size();
  std::vector<double> bs(n), bv(n), slopes;
  const double qs[] = {q};
  for (std::size_t b = 0; b < n_bootstrap; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = stream.below(n);
      bs[i] = sizes[j];
      bv[i] = vols[j];
    }
    slopes.push_back(power_law_exponent_profile(bs, bv, qs, n_bins).front().fit.slope);
  }
  const double mean = pairwise_sum(slopes) / static_cast<double>(slopes.size());
  for (auto& s : slopes) s = (s - mean) * (s - mean);
  return std::sqrt(pairwise_sum(slopes) / static_cast<double>(n_bootstrap - 1));
}

}  // namespace granular
