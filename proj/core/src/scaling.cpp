#include "granular/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "granular/errors.hpp"
#include "granular/parallel.hpp"

namespace granular {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kKernelReach = 9.0;  // bandwidths; exp(-40.5) ~ 2.6e-18
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

double mean_of(std::span<const double> v) {
  return pairwise_sum(v) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  const double m = mean_of(v);
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1));
}

// Linear-interpolated quantile of sorted data (type 7).
double quantile_sorted(std::span<const double> s, double p) {
  const double pos = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

void kde_exact(std::span<const double> sorted, std::span<const double> grid, double h,
               std::vector<double>& out) {
  const double reach = kKernelReach * h;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - reach);
    auto hi = std::upper_bound(lo, sorted.end(), x + reach);
    double s = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double z = (x - *it) / h;
      s += std::exp(-0.5 * z * z);
    }
    out[g] = s;
  }
}

// Linear binning onto a grid of spacing ~h/64 covering the evaluation range
// plus the kernel reach; samples further out cannot reach any grid point.
bool kde_binned(std::span<const double> samples, std::span<const double> grid, double h,
                std::vector<double>& out) {
  const double reach = kKernelReach * h;
  const double lo = grid.front() - reach;
  const double hi = grid.back() + reach;
  const double span = hi - lo;
  const double nb_real = std::ceil(span / (h / 64.0)) + 1.0;
  if (nb_real > 5e7) return false;
  const auto nb = static_cast<std::size_t>(nb_real);
  const double delta = span / static_cast<double>(nb - 1);
  std::vector<double> w(nb, 0.0);
  for (double x : samples) {
    if (x < lo || x > hi) continue;
    const double pos = (x - lo) / delta;
    auto j = static_cast<std::size_t>(pos);
    if (j >= nb - 1) j = nb - 2;
    const double frac = pos - static_cast<double>(j);
    w[j] += 1.0 - frac;
    w[j + 1] += frac;
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    const double a = std::max(0.0, std::ceil((x - reach - lo) / delta));
    const double b = std::min(static_cast<double>(nb - 1), std::floor((x + reach - lo) / delta));
    double s = 0.0;
    for (auto j = static_cast<std::size_t>(a); j <= static_cast<std::size_t>(b); ++j) {
      if (w[j] == 0.0) continue;
      const double z = (x - (lo + static_cast<double>(j) * delta)) / h;
      s += w[j] * std::exp(-0.5 * z * z);
    }
    out[g] = s;
  }
  return true;
}

std::vector<double> kde_on_regular_grid(std::span<const double> sorted, double h,
                                        std::size_t points, double& lo_out, double& step) {
  const double lo = sorted.front() - 3.0 * h;
  const double hi = sorted.back() + 3.0 * h;
  lo_out = lo;
  step = (hi - lo) / static_cast<double>(points - 1);
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) grid[i] = lo + step * static_cast<double>(i);
  std::vector<double> values(points);
  kde_exact(sorted, grid, h, values);
  return values;
}

}  // namespace

double BinnedStats::moment(double q) const {
  for (std::size_t j = 0; j < q_list.size(); ++j)
    if (q_list[j] == q) return moments[j];
  return kNaN;
}

std::vector<std::size_t> equal_count_bins(std::span<const double> keys, std::size_t n_bins) {
  if (keys.empty()) throw DomainError("equal_count_bins: no keys");
  if (n_bins < 1) throw DomainError("equal_count_bins: n_bins must be >= 1");
  if (n_bins > keys.size()) throw DomainError("equal_count_bins: more bins than keys");
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  const std::size_t base = keys.size() / n_bins;
  const std::size_t extra = keys.size() % n_bins;
  std::vector<std::size_t> bin(keys.size());
  std::size_t pos = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    for (std::size_t j = 0; j < len; ++j) bin[order[pos++]] = b;
  }
  return bin;
}

std::vector<std::vector<std::size_t>> bin_members(std::span<const std::size_t> assignment,
                                                  std::size_t n_bins) {
  std::vector<std::vector<std::size_t>> members(n_bins);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] >= n_bins) throw ContractError("bin_members: bin index out of range");
    members[assignment[i]].push_back(i);
  }
  return members;
}

std::vector<BinnedStats> binned_volatility_moments(std::span<const double> sizes,
                                                   std::span<const double> vols,
                                                   std::span<const double> q_list,
                                                   std::size_t n_bins) {
  if (sizes.size() != vols.size())
    throw ContractError("binned_volatility_moments: sizes and vols differ in length");
  const auto members = bin_members(equal_count_bins(sizes, n_bins), n_bins);
  std::vector<BinnedStats> out(n_bins);
  std::vector<double> buf;
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto& st = out[b];
    st.bin_index = b;
    st.n_firms = members[b].size();
    st.q_list.assign(q_list.begin(), q_list.end());
    buf.clear();
    for (auto i : members[b]) buf.push_back(sizes[i]);
    st.mean_size = mean_of(buf);
    for (double q : q_list) {
      buf.clear();
      for (auto i : members[b])
        if (std::isfinite(vols[i])) buf.push_back(std::pow(vols[i], q));
      st.moments.push_back(buf.empty() ? kNaN : mean_of(buf));
    }
  }
  return out;
}

ScalingFit linear_ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("linear_ols: length mismatch");
  if (x.size() < 3) throw DomainError("linear_ols: need at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = mean_of(x);
  const double my = mean_of(y);
  std::vector<double> sxx(x.size()), sxy(x.size()), syy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx[i] = (x[i] - mx) * (x[i] - mx);
    sxy[i] = (x[i] - mx) * (y[i] - my);
    syy[i] = (y[i] - my) * (y[i] - my);
  }
  const double Sxx = pairwise_sum(sxx);
  const double Sxy = pairwise_sum(sxy);
  const double Syy = pairwise_sum(syy);
  if (!(Sxx > 0.0)) throw DomainError("linear_ols: x values are all equal");
  ScalingFit fit;
  fit.slope = Sxy / Sxx;
  fit.intercept = my - fit.slope * mx;
  const double sse = std::max(0.0, Syy - fit.slope * Sxy);
  fit.slope_se = std::sqrt(sse / (n - 2.0) / Sxx);
  fit.r_squared = Syy > 0.0 ? 1.0 - sse / Syy : 1.0;
  return fit;
}

ScalingFit loglog_ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("loglog_ols: length mismatch");
  if (x.size() < 3) throw DomainError("loglog_ols: need at least 3 points");
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw DomainError("loglog_ols: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return linear_ols(lx, ly);
}

ScalingFit loglog_wls(std::span<const double> x, std::span<const double> y,
                      std::span<const double> weights) {
  if (x.size() != y.size() || x.size() != weights.size())
    throw ContractError("loglog_wls: length mismatch");
  if (x.size() < 3) throw DomainError("loglog_wls: need at least 3 points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !(weights[i] > 0.0))
      throw DomainError("loglog_wls: values and weights must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double W = pairwise_sum(weights);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = weights[i] * lx[i];
  const double mx = pairwise_sum(t) / W;
  for (std::size_t i = 0; i < n; ++i) t[i] = weights[i] * ly[i];
  const double my = pairwise_sum(t) / W;
  std::vector<double> sxx(n), sxy(n), syy(n);
  for (std::size_t i = 0; i < n; ++i) {
    sxx[i] = weights[i] * (lx[i] - mx) * (lx[i] - mx);
    sxy[i] = weights[i] * (lx[i] - mx) * (ly[i] - my);
    syy[i] = weights[i] * (ly[i] - my) * (ly[i] - my);
  }
  const double Sxx = pairwise_sum(sxx);
  const double Sxy = pairwise_sum(sxy);
  const double Syy = pairwise_sum(syy);
  if (!(Sxx > 0.0)) throw DomainError("loglog_wls: x values are all equal");
  ScalingFit fit;
  fit.slope = Sxy / Sxx;
  fit.intercept = my - fit.slope * mx;
  const double sse = std::max(0.0, Syy - fit.slope * Sxy);
  fit.slope_se = std::sqrt(sse / (static_cast<double>(n) - 2.0) / Sxx);
  fit.r_squared = Syy > 0.0 ? 1.0 - sse / Syy : 1.0;
  return fit;
}

double normal_reference_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw DomainError("bandwidth: need at least 2 samples");
  const double sd = sample_sd(samples);
  if (!(sd > 0.0)) throw DomainError("bandwidth: samples have zero dispersion");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 1.06 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

DensityEstimate kde_gaussian(std::span<const double> samples, std::span<const double> grid) {
  return kde_gaussian(samples, grid, normal_reference_bandwidth(samples));
}

DensityEstimate kde_gaussian(std::span<const double> samples, std::span<const double> grid,
                             double bandwidth) {
  if (samples.size() < 2) throw DomainError("kde_gaussian: need at least 2 samples");
  if (!(bandwidth > 0.0)) throw DomainError("kde_gaussian: bandwidth must be > 0");
  if (grid.empty()) throw DomainError("kde_gaussian: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw DomainError("kde_gaussian: grid must increase");

  DensityEstimate est;
  est.grid.assign(grid.begin(), grid.end());
  est.values.assign(grid.size(), 0.0);
  est.bandwidth = bandwidth;
  est.n_samples = samples.size();

  const double work = static_cast<double>(samples.size()) * static_cast<double>(grid.size());
  bool done = false;
  if (work > 2e7) done = kde_binned(samples, grid, bandwidth, est.values);
  if (!done) {
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    kde_exact(sorted, grid, bandwidth, est.values);
  }
  const double norm = kInvSqrt2Pi / (bandwidth * static_cast<double>(samples.size()));
  for (auto& v : est.values) v *= norm;
  return est;
}

std::vector<double> regular_grid(double lo, double hi, std::size_t n_points) {
  if (n_points < 2 || !(hi > lo)) throw DomainError("regular_grid: invalid range");
  std::vector<double> g(n_points);
  const double step = (hi - lo) / static_cast<double>(n_points - 1);
  for (std::size_t i = 0; i < n_points; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;
  return g;
}

std::vector<std::vector<double>> rescale_collapse(
    const std::vector<std::vector<double>>& bins) {
  std::vector<std::vector<double>> out(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].empty()) throw DomainError("rescale_collapse: empty bin");
    const double m = mean_of(bins[b]);
    out[b].resize(bins[b].size());
    for (std::size_t i = 0; i < bins[b].size(); ++i)
      out[b][i] = m > 0.0 ? bins[b][i] / m : kNaN;
  }
  return out;
}

HillEstimate hill_estimator(std::span<const double> samples, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction < 1.0))
    throw DomainError("hill_estimator: top_fraction must lie in (0, 1)");
  const auto k = static_cast<std::size_t>(
      std::floor(top_fraction * static_cast<double>(samples.size())));
  if (k < 50) throw DomainError("hill_estimator: fewer than 50 tail samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k), s.end(),
                   std::greater<>());
  const double threshold = s[k];
  if (!(threshold > 0.0)) throw DomainError("hill_estimator: tail threshold must be > 0");
  std::vector<double> logs(k);
  for (std::size_t i = 0; i < k; ++i) logs[i] = std::log(s[i] / threshold);
  const double mean_log = pairwise_sum(logs) / static_cast<double>(k);
  if (!(mean_log > 0.0)) throw DomainError("hill_estimator: degenerate tail (equal samples)");
  HillEstimate est;
  est.k = k;
  est.index = 1.0 / mean_log;
  est.se = est.index / std::sqrt(static_cast<double>(k));
  return est;
}

HillProfile hill_profile(std::span<const double> samples) {
  HillProfile p;
  p.fractions = {0.005, 0.01, 0.02, 0.05};
  std::vector<double> ok;
  for (double f : p.fractions) {
    try {
      p.estimates.push_back(hill_estimator(samples, f));
      ok.push_back(p.estimates.back().index);
    } catch (const DomainError&) {
      p.estimates.push_back({kNaN, kNaN, 0});
    }
  }
  if (ok.size() >= 2) {
    std::sort(ok.begin(), ok.end());
    const double med = quantile_sorted(ok, 0.5);
    p.relative_spread = (ok.back() - ok.front()) / med;
    p.stable = p.relative_spread <= 0.15;
  } else {
    p.relative_spread = kNaN;
  }
  return p;
}

double ks_distance(std::span<const double> samples,
                   const std::function<double(double)>& cdf) {
  if (samples.empty()) throw DomainError("ks_distance: no samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  return std::clamp(d, 0.0, 1.0);
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

int count_kde_modes(std::span<const double> sorted_samples, double bandwidth,
                    std::size_t grid_points) {
  double lo = 0.0, step = 0.0;
  const auto v = kde_on_regular_grid(sorted_samples, bandwidth, grid_points, lo, step);
  const double peak = *std::max_element(v.begin(), v.end());
  const double floor = peak * 1e-10;
  int modes = 0;
  int trend = 1;  // +1 rising, -1 falling
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = v[i] - v[i - 1];
    if (d > 0.0) {
      trend = 1;
    } else if (d < 0.0) {
      if (trend == 1 && v[i - 1] > floor) ++modes;
      trend = -1;
    }
  }
  return std::max(modes, 1);
}

ModeTest mode_count(std::span<const double> samples, std::size_t n_bootstrap,
                    RandomStream& stream) {
  if (samples.size() < 100) throw DomainError("mode_count: need at least 100 samples");
  if (n_bootstrap < 1) throw DomainError("mode_count: n_bootstrap must be >= 1");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double range = sorted.back() - sorted.front();
  if (!(range > 0.0)) return {1, 1.0, 0.0};
  const double mean = mean_of(sorted);
  const double sd = sample_sd(sorted);

  auto critical = [&](int m) {
    double hi = range;
    while (count_kde_modes(sorted, hi) > m) hi *= 2.0;
    double lo = hi * 1e-6;
    if (count_kde_modes(sorted, lo) <= m) return lo;
    for (int it = 0; it < 40; ++it) {
      const double mid = std::sqrt(lo * hi);
      if (count_kde_modes(sorted, mid) <= m) hi = mid; else lo = mid;
    }
    return hi;
  };

  ModeTest result;
  std::vector<double> boot(sorted.size());
  constexpr int kMaxModes = 6;
  for (int m = 1; m <= kMaxModes; ++m) {
    const double h = critical(m);
    const double shrink = 1.0 / std::sqrt(1.0 + h * h / (sd * sd));
    std::size_t exceed = 0;
    for (std::size_t b = 0; b < n_bootstrap; ++b) {
      for (auto& y : boot) {
        const double x = sorted[stream.below(sorted.size())];
        y = mean + (x - mean + h * stream.normal()) * shrink;
      }
      std::sort(boot.begin(), boot.end());
      if (count_kde_modes(boot, h) > m) ++exceed;
    }
    const double p = static_cast<double>(exceed) / static_cast<double>(n_bootstrap);
    if (m == 1) {
      result.p_value_two_modes = p;
      result.critical_bandwidth = h;
    }
    if (p >= 0.05 || m == kMaxModes) {
      result.n_modes = m;
      break;
    }
  }
  return result;
}

}  // namespace granular
