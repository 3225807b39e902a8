#include "granular/app/experiments.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "granular/distributions.hpp"
#include "granular/errors.hpp"
#include "granular/estimation.hpp"
#include "granular/model.hpp"
#include "granular/parallel.hpp"
#include "granular/rng.hpp"
#include "granular/scaling.hpp"
#include "granular/special.hpp"

namespace granular::app {

Check within(int criterion, std::string name, double value, double target, double tol) {
  return {criterion, std::move(name), value, Relation::Within, target, tol,
          std::abs(value - target) <= tol};
}

Check below(int criterion, std::string name, double value, double bound) {
  return {criterion, std::move(name), value, Relation::Below, bound, 0.0, value < bound};
}

Check above(int criterion, std::string name, double value, double bound) {
  return {criterion, std::move(name), value, Relation::Above, bound, 0.0, value > bound};
}

Check in_range(int criterion, std::string name, double value, double lo, double hi) {
  return {criterion, std::move(name), value, Relation::InRange, lo, hi,
          value >= lo && value <= hi};
}

std::string format_check(const Check& c) {
  char buf[160];
  switch (c.relation) {
    case Relation::Within:
      std::snprintf(buf, sizeof buf, "(target %.6g +- %.3g)", c.a, c.b);
      break;
    case Relation::Below:
      std::snprintf(buf, sizeof buf, "(must be < %.6g)", c.a);
      break;
    case Relation::Above:
      std::snprintf(buf, sizeof buf, "(must be > %.6g)", c.a);
      break;
    case Relation::InRange:
      std::snprintf(buf, sizeof buf, "(must lie in [%.6g, %.6g])", c.a, c.b);
      break;
  }
  char value[48];
  std::snprintf(value, sizeof value, "%.6g", c.value);
  return std::string(c.pass ? "PASS  " : "FAIL  ") + c.name + " = " + value + " " + buf;
}

bool ExperimentResult::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

nlohmann::json verdict_json(const ExperimentResult& result) {
  static const char* relations[] = {"within", "below", "above", "in_range"};
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : result.checks) {
    nlohmann::json j = {{"name", c.name},
                        {"value", number(c.value)},
                        {"relation", relations[static_cast<int>(c.relation)]},
                        {"pass", c.pass}};
    if (c.criterion > 0) j["criterion"] = c.criterion;
    switch (c.relation) {
      case Relation::Within:
        j["target"] = number(c.a);
        j["tolerance"] = number(c.b);
        break;
      case Relation::Below:
      case Relation::Above:
        j["bound"] = number(c.a);
        break;
      case Relation::InRange:
        j["lower"] = number(c.a);
        j["upper"] = number(c.b);
        break;
    }
    checks.push_back(std::move(j));
  }
  return {{"experiment", result.id},
          {"verdict", result.pass() ? "PASS" : "FAIL"},
          {"checks", checks},
          {"summary", result.summary}};
}

const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> catalog = {
      {"fig1_left", "pooled growth-rate density vs Gaussian fit and a volatility mixture"},
      {"fig1_right", "binned volatility-size relation from a simulated quarterly panel"},
      {"fig3", "rescaled volatility collapse and MIG self-fit calibration"},
      {"fig4", "binned volatility moments q=1..4 vs size"},
      {"fig5", "homogeneous vs heterogeneous rescaling of growth rates with GSE fits"},
      {"table1", "GSE self-fit recovery and fit to a Gaussian-MIG mixture"},
      {"prop2_scaling", "E[H|K], E[sqrt H|K] and median H vs K for a fixed count"},
      {"prop3_tail", "firm-size tail, few-sub-unit fraction and growth tail"},
      {"prop7_aggregation", "size tail and few-sub-unit fraction after pairwise merging"},
      {"laplace_sum", "Laplace-sum density vs Monte Carlo and numeric convolution"},
  };
  return catalog;
}

const ExperimentInfo* find_experiment(const std::string& id) {
  for (const auto& e : experiment_catalog())
    if (e.id == id) return &e;
  return nullptr;
}

namespace {

// Published MIG fit of the rescaled volatilities.
constexpr MigParams kPublishedMig{4.788, 4.620, 0.326};

// Published GSE vectors (C, u, v, w, z) for the whole sample.
constexpr std::array<double, 5> kGseHeterogeneous{0.494, 0.863, 0.023, 1.777, 0.407};
constexpr std::array<double, 5> kGseHomogeneous{0.764, 0.432, 0.014, 0.673, 0.412};

// GSE fit (C, u, v, w, z, mass on [-w, w]) to the KDE of the Gaussian-MIG
// mixture at scale 1 and the default seed, locked from the first validated run.
constexpr std::uint64_t kGoldenSeed = 20240501;
constexpr std::array<double, 6> kGoldenMixtureFit{0.6673140837839939,      0.23952957330119554,
                                                  -0.00022337240006917218, 0.25786587835743446,
                                                  0.802721519245286,       0.30747745368970447};
constexpr double kGoldenRelTol = 1e-6;

std::size_t scaled(double n, double scale, std::size_t min) {
  return std::max(min, static_cast<std::size_t>(std::llround(n * scale)));
}

ModelParams wb_params(double mu, double alpha) {
  ModelParams p;
  p.mu = mu;
  p.alpha = alpha;
  p.sigma0 = 0.1;
  p.k_mode = CountMode::Pareto;
  return p;
}

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

double mean_of(std::span<const double> v) {
  return pairwise_sum(v) / static_cast<double>(v.size());
}

double median_of(std::span<const double> v) {
  auto s = sorted_copy(v);
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

double excess_kurtosis(std::span<const double> v) {
  const double m = mean_of(v);
  std::vector<double> d2(v.size()), d4(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - m;
    d2[i] = d * d;
    d4[i] = d2[i] * d2[i];
  }
  const double m2 = mean_of(d2);
  return mean_of(d4) / (m2 * m2) - 3.0;
}

// Empirical CCDF at log-spaced points, for plotting tails.
Table ccdf_table(std::span<const double> values, const std::string& column) {
  const auto s = sorted_copy(values);
  Table t{{column, "ccdf"}, {}};
  const double lo = std::max(s.front(), 1e-12);
  const double hi = s.back();
  if (!(hi > lo)) return t;
  const std::size_t n_points = 200;
  for (std::size_t i = 0; i < n_points; ++i) {
    const double x = lo * std::pow(hi / lo, static_cast<double>(i) / (n_points - 1));
    const auto above_x = s.end() - std::upper_bound(s.begin(), s.end(), x);
    t.add(x, static_cast<double>(above_x) / static_cast<double>(s.size()));
  }
  return t;
}

struct FewSubunitFit {
  std::vector<FewSubunitBin> bins;
  ScalingFit fit;
};

// Fraction of firms with at most k_threshold sub-units in 10 equal-count
// bins over the largest 2% of firms, fitted as a power of the bin's
// geometric-mean size with binomial inverse-variance weights.
FewSubunitFit few_subunit_slope(std::span<const FirmSummary> firms, std::uint64_t k_threshold) {
  std::vector<double> sizes(firms.size());
  for (std::size_t i = 0; i < firms.size(); ++i) sizes[i] = firms[i].size;
  const auto s = sorted_copy(sizes);
  const std::size_t top = std::max<std::size_t>(
      10, static_cast<std::size_t>(std::floor(0.02 * static_cast<double>(s.size()))));
  const std::size_t start = s.size() - top;
  std::vector<double> edges;
  for (std::size_t b = 0; b < 10; ++b) edges.push_back(s[start + b * top / 10]);
  edges.push_back(s.back());
  FewSubunitFit out;
  out.bins = fraction_few_subunits(firms, edges, k_threshold);
  std::vector<double> x, y, w;
  for (const auto& b : out.bins) {
    if (b.n_firms == 0 || !(b.fraction > 0.0) || !(b.fraction < 1.0)) continue;
    x.push_back(std::exp(b.log_mean_size));
    y.push_back(b.fraction);
    w.push_back(static_cast<double>(b.n_firms) * b.fraction / (1.0 - b.fraction));
  }
  if (x.size() < 3) {
    out.fit.slope = std::nan("");
    return out;
  }
  out.fit = loglog_wls(x, y, w);
  return out;
}

Table few_subunit_table(const std::vector<FewSubunitBin>& bins) {
  Table t{{"bin", "mean_size", "geometric_mean_size", "n_firms", "fraction"}, {}};
  for (std::size_t i = 0; i < bins.size(); ++i)
    t.add(i + 1, bins[i].mean_size, std::exp(bins[i].log_mean_size), bins[i].n_firms,
          bins[i].fraction);
  return t;
}

double hill_or_nan(std::span<const double> v, double fraction) {
  try {
    return hill_estimator(v, fraction).index;
  } catch (const DomainError&) {
    return std::nan("");
  }
}

ExperimentResult prop2_scaling(const ExperimentOptions& o) {
  ExperimentResult r;
  ModelParams p;
  p.mu = 1.5;
  p.k_mode = CountMode::Fixed;
  const std::size_t n = scaled(10000, o.scale, 200);
  Table t{{"K", "n_firms", "mean_h", "mean_sqrt_h", "median_h"}, {}};
  std::vector<double> ks, mh, msh, medh;
  for (int e = 6; e <= 14; ++e) {
    const std::uint64_t K = std::uint64_t{1} << e;
    auto h = sample_hhi(p, K, n, o.seed, o.threads);
    std::vector<double> root(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) root[i] = std::sqrt(h[i]);
    ks.push_back(static_cast<double>(K));
    mh.push_back(mean_of(h));
    msh.push_back(mean_of(root));
    medh.push_back(median_of(h));
    t.add(K, n, mh.back(), msh.back(), medh.back());
  }
  r.tables.emplace_back("hhi_scaling.csv", std::move(t));
  const auto f_mean = loglog_ols(ks, mh);
  const auto f_root = loglog_ols(ks, msh);
  const auto f_med = loglog_ols(ks, medh);
  r.checks.push_back(within(1, "slope_mean_H", f_mean.slope, -0.5, 0.05));
  r.checks.push_back(within(1, "slope_mean_sqrt_H", f_root.slope, -1.0 / 3.0, 0.05));
  r.checks.push_back(within(2, "slope_median_H", f_med.slope, -2.0 / 3.0, 0.07));
  r.summary = {{"mu", p.mu}, {"firms_per_K", n},
               {"slope_se_mean_H", f_mean.slope_se}, {"slope_se_mean_sqrt_H", f_root.slope_se},
               {"slope_se_median_H", f_med.slope_se}};
  return r;
}

ExperimentResult prop3_tail(const ExperimentOptions& o) {
  ExperimentResult r;
  const auto p = wb_params(1.6, 1.2);
  const std::size_t n = scaled(1e6, o.scale, 20000);
  const auto firms = summarize_population(p, n, o.seed, true, o.threads);

  std::vector<double> sizes(n), abs_g(n);
  for (std::size_t i = 0; i < n; ++i) {
    sizes[i] = firms[i].size;
    abs_g[i] = std::abs(firms[i].growth);
  }
  const double hill_size = hill_or_nan(sizes, 0.01);
  const auto few = few_subunit_slope(firms, 2);
  const double hill_growth = hill_or_nan(abs_g, 0.005);

  // Volatility-rescaled growth of firms with many sub-units, per size bin.
  constexpr std::uint64_t kLargeK = 10;
  constexpr std::size_t kFirmsPerBin = 10000;
  std::vector<double> big_sizes, big_g;
  for (const auto& f : firms) {
    if (f.count < kLargeK) continue;
    big_sizes.push_back(f.size);
    big_g.push_back(f.growth / (p.sigma0 * std::sqrt(f.hhi)));
  }
  const std::size_t n_ks_bins = std::max<std::size_t>(1, big_sizes.size() / kFirmsPerBin);
  const auto members = bin_members(equal_count_bins(big_sizes, n_ks_bins), n_ks_bins);
  Table ks{{"bin", "mean_size", "n_firms", "ks_vs_normal"}, {}};
  double ks_max = 0.0;
  for (std::size_t b = 0; b < n_ks_bins; ++b) {
    std::vector<double> g, s;
    for (auto i : members[b]) {
      g.push_back(big_g[i]);
      s.push_back(big_sizes[i]);
    }
    const double d = ks_distance(g, [](double x) { return special::normal_cdf(x); });
    ks_max = std::max(ks_max, d);
    ks.add(b + 1, mean_of(s), g.size(), d);
  }

  r.tables.emplace_back("size_ccdf.csv", ccdf_table(sizes, "size"));
  r.tables.emplace_back("abs_growth_ccdf.csv", ccdf_table(abs_g, "abs_growth"));
  r.tables.emplace_back("few_subunits.csv", few_subunit_table(few.bins));
  r.tables.emplace_back("rescaled_growth_ks.csv", std::move(ks));
  r.checks.push_back(within(3, "hill_size_top1pct", hill_size, p.alpha, 0.15));
  r.checks.push_back(within(3, "few_subunit_fraction_slope", few.fit.slope, p.alpha - p.mu, 0.1));
  r.checks.push_back(within(5, "hill_abs_growth_top0.5pct", hill_growth, p.mu, 0.15));
  r.checks.push_back(below(5, "max_ks_rescaled_growth_large_K", ks_max, 0.02));
  r.summary = {{"n_firms", n},
               {"few_subunit_threshold", 2},
               {"few_subunit_slope_se", number(few.fit.slope_se)},
               {"large_K_threshold", kLargeK},
               {"large_K_firms", big_sizes.size()},
               {"ks_bins", n_ks_bins},
               {"hill_profile_abs_growth", nlohmann::json::array()}};
  const auto prof = hill_profile(abs_g);
  for (std::size_t i = 0; i < prof.fractions.size(); ++i)
    r.summary["hill_profile_abs_growth"].push_back(
        {{"top_fraction", prof.fractions[i]}, {"index", number(prof.estimates[i].index)}});
  return r;
}

ExperimentResult prop7_aggregation(const ExperimentOptions& o) {
  ExperimentResult r;
  const auto p = wb_params(1.6, 1.2);
  const std::size_t n = scaled(1e6, o.scale, 20000);
  constexpr std::size_t kGroup = 2;
  std::vector<FirmSummary> merged;
  {
    const auto firms = draw_population(p, n, o.seed, o.threads);
    RandomStream stream(o.seed, StreamTag::Aggregation);
    const auto groups = aggregate_firms(firms, kGroup, stream);
    merged.reserve(groups.size());
    for (const auto& g : groups) merged.push_back(summarize(g));
  }
  std::vector<double> sizes(merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i) sizes[i] = merged[i].size;
  const double hill_size = hill_or_nan(sizes, 0.01);
  const auto few = few_subunit_slope(merged, 2 * kGroup);

  r.tables.emplace_back("size_ccdf_merged.csv", ccdf_table(sizes, "size"));
  r.tables.emplace_back("few_subunits_merged.csv", few_subunit_table(few.bins));
  r.checks.push_back(within(6, "hill_size_top1pct_merged", hill_size, p.alpha, 0.15));
  r.checks.push_back(
      within(6, "few_subunit_fraction_slope_merged", few.fit.slope, p.alpha - p.mu, 0.1));
  r.summary = {{"n_firms_before", n},
               {"n_firms_after", merged.size()},
               {"group_size", kGroup},
               {"few_subunit_threshold", 2 * kGroup},
               {"few_subunit_slope_se", number(few.fit.slope_se)}};
  return r;
}

ExperimentResult fig4(const ExperimentOptions& o) {
  ExperimentResult r;
  const auto p = wb_params(1.25, 1.1);
  const std::size_t n = scaled(1e6, o.scale, 20000);
  const auto firms = summarize_population(p, n, o.seed, false, o.threads);
  std::vector<double> sizes(n), vols(n);
  for (std::size_t i = 0; i < n; ++i) {
    sizes[i] = firms[i].size;
    vols[i] = p.sigma0 * std::sqrt(firms[i].hhi);
  }
  const std::vector<double> qs{1, 2, 3, 4};
  const auto binned = binned_volatility_moments(sizes, vols, qs, 25);
  Table t{{"bin", "mean_size", "n_firms", "moment_q1", "moment_q2", "moment_q3", "moment_q4"}, {}};
  for (const auto& b : binned)
    t.add(b.bin_index + 1, b.mean_size, b.n_firms, b.moments[0], b.moments[1], b.moments[2],
          b.moments[3]);
  const auto profile = power_law_exponent_profile(sizes, vols, qs, 25);
  Table e{{"q", "slope", "se", "r2"}, {}};
  for (const auto& x : profile) e.add(x.q, x.fit.slope, x.fit.slope_se, x.fit.r_squared);
  r.tables.emplace_back("binned_moments.csv", std::move(t));
  r.tables.emplace_back("exponents.csv", std::move(e));
  r.checks.push_back(within(4, "slope_q1", profile[0].fit.slope, -(p.mu - 1.0) / p.mu, 0.03));
  for (std::size_t j = 1; j < 4; ++j)
    r.checks.push_back(within(4, "slope_q" + std::to_string(j + 1), profile[j].fit.slope,
                              p.alpha - p.mu, 0.1));
  r.summary = {{"n_firms", n}, {"mu", p.mu}, {"alpha", p.alpha}, {"volatility", "theoretical"}};
  return r;
}

ExperimentResult fig3(const ExperimentOptions& o) {
  ExperimentResult r;
  // Collapse of the volatility distribution across size bins.
  const auto p = wb_params(1.6, 1.2);
  constexpr std::size_t kBins = 25;
  const std::size_t n = scaled(250000, o.scale, 2500);
  const auto firms = summarize_population(p, n, o.seed, false, o.threads);
  std::vector<double> sizes(n), vols(n);
  for (std::size_t i = 0; i < n; ++i) {
    sizes[i] = firms[i].size;
    vols[i] = p.sigma0 * std::sqrt(firms[i].hhi);
  }
  const auto members = bin_members(equal_count_bins(sizes, kBins), kBins);
  std::vector<std::vector<double>> per_bin(kBins);
  for (std::size_t b = 0; b < kBins; ++b)
    for (auto i : members[b]) per_bin[b].push_back(vols[i]);
  const auto rescaled = rescale_collapse(per_bin);
  std::vector<double> pooled;
  for (const auto& b : rescaled) pooled.insert(pooled.end(), b.begin(), b.end());

  const std::array<std::size_t, 3> chosen{5, 15, 25};
  Table ks{{"bin_a", "bin_b", "ks"}, {}};
  double ks_max = 0.0;
  for (std::size_t i = 0; i < chosen.size(); ++i)
    for (std::size_t j = i + 1; j < chosen.size(); ++j) {
      const double d = ks_two_sample(rescaled[chosen[i] - 1], rescaled[chosen[j] - 1]);
      ks_max = std::max(ks_max, d);
      ks.add(chosen[i], chosen[j], d);
    }
  const auto sp = sorted_copy(pooled);
  const auto grid = regular_grid(0.0, sp[static_cast<std::size_t>(0.999 * (sp.size() - 1))], 512);
  Table dens{{"x", "bin_5", "bin_15", "bin_25", "pooled"}, {}};
  std::vector<DensityEstimate> d;
  for (auto b : chosen) {
    try {
      d.push_back(kde_gaussian(rescaled[b - 1], grid));
    } catch (const DomainError&) {
      d.push_back({grid, std::vector<double>(grid.size(), std::nan("")), 0.0, 0});
    }
  }
  d.push_back(kde_gaussian(pooled, grid));
  for (std::size_t i = 0; i < grid.size(); ++i)
    dens.add(grid[i], d[0].values[i], d[1].values[i], d[2].values[i], d[3].values[i]);
  r.tables.emplace_back("collapse_ks.csv", std::move(ks));
  r.tables.emplace_back("rescaled_volatility_density.csv", std::move(dens));
  r.tables.emplace_back("rescaled_volatility_ccdf.csv", ccdf_table(pooled, "rescaled_volatility"));
  r.checks.push_back(below(7, "max_pairwise_ks_bins_5_15_25", ks_max, 0.05));
  r.checks.push_back(within(7, "hill_pooled_rescaled_volatility_top1pct",
                            hill_or_nan(pooled, 0.01), p.mu, 0.15));

  // Wald-interval calibration of the MIG shape over replications.
  const std::size_t reps = scaled(200, o.scale, 5);
  const std::size_t m = scaled(24000, o.scale, 2000);
  std::vector<FitResult> fits(reps);
  parallel_for(reps, o.threads, [&](std::size_t rep) {
    RandomStream stream(o.seed, StreamTag::Sampler, rep, 8);
    std::vector<double> x(m);
    for (auto& v : x) v = mig_sample(kPublishedMig, stream.uniform());
    fits[rep] = fit_mig_mle(x);
  });
  Table reps_t{{"replication", "a", "b", "m", "se_a", "se_b", "se_m", "converged", "covered"}, {}};
  std::size_t covered = 0;
  std::vector<double> b_hat;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    const auto& f = fits[rep];
    const bool has_se = f.converged && f.standard_errors.size() == 3;
    const double se_b = has_se ? f.standard_errors[1] : std::nan("");
    const bool cov = has_se && std::abs(f.params[1] - kPublishedMig.b) < 1.96 * se_b;
    covered += cov ? 1 : 0;
    b_hat.push_back(f.params[1]);
    reps_t.add(rep, f.params[0], f.params[1], f.params[2],
               has_se ? f.standard_errors[0] : std::nan(""), se_b,
               has_se ? f.standard_errors[2] : std::nan(""), f.converged ? 1 : 0, cov ? 1 : 0);
  }
  r.tables.emplace_back("mig_replications.csv", std::move(reps_t));
  const double coverage = static_cast<double>(covered) / static_cast<double>(reps);
  r.checks.push_back(in_range(8, "mig_b_wald95_coverage", coverage, 0.90, 0.99));
  r.checks.push_back(within(8, "mig_b_median", median_of(b_hat), kPublishedMig.b, 0.05));

  nlohmann::json pooled_fit = nullptr;
  try {
    std::vector<double> positive;
    for (double v : pooled)
      if (v > 0.0) positive.push_back(v);
    const auto f = fit_mig_mle(positive);
    pooled_fit = {{"a", f.params[0]}, {"b", f.params[1]}, {"m", f.params[2]},
                  {"converged", f.converged}};
  } catch (const DomainError&) {
  }
  r.summary = {{"n_firms", n},
               {"firms_per_bin", n / kBins},
               {"replications", reps},
               {"samples_per_replication", m},
               {"mig_fit_pooled_rescaled_volatility", pooled_fit}};
  return r;
}

std::vector<double> mixture_draws(std::size_t n, std::uint64_t seed, std::uint32_t minor,
                                  unsigned threads) {
  constexpr std::size_t kChunk = 65536;
  std::vector<double> g(n);
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    RandomStream stream(seed, StreamTag::Sampler, c, minor);
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double sigma = mig_sample(kPublishedMig, stream.uniform());
      g[i] = sigma * stream.normal();
    }
  });
  return g;
}

Table gse_row_header() {
  return {{"label", "C", "se_C", "u", "se_u", "v", "se_v", "w", "se_w", "z", "se_z",
           "mass_within_w", "sse", "converged"},
          {}};
}

void add_gse_row(Table& t, const std::string& label, const FitResult& f, double mass) {
  std::vector<std::string> row{label};
  for (std::size_t i = 0; i < 5; ++i) {
    row.push_back(csv::format_double(f.params[i]));
    row.push_back(csv::format_double(f.standard_errors.empty() ? std::nan("")
                                                               : f.standard_errors[i]));
  }
  row.push_back(csv::format_double(mass));
  row.push_back(csv::format_double(f.objective));
  row.push_back(f.converged ? "1" : "0");
  t.rows.push_back(std::move(row));
}

ExperimentResult table1(const ExperimentOptions& o) {
  ExperimentResult r;
  const auto grid = regular_grid(-8.0, 8.0, 2500);
  Table fits = gse_row_header();

  double worst = 0.0;
  for (const auto& [label, v] : {std::pair{"published_heterogeneous", kGseHeterogeneous},
                                 std::pair{"published_homogeneous", kGseHomogeneous}}) {
    const GseParams truth{v[0], v[1], v[2], v[3], v[4]};
    DensityEstimate exact{grid, std::vector<double>(grid.size()), 0.0, 0};
    for (std::size_t i = 0; i < grid.size(); ++i) exact.values[i] = gse_pdf(grid[i], truth);
    const auto f = fit_gse_nls(exact);
    for (std::size_t i = 0; i < 5; ++i)
      worst = std::max(worst, std::abs(f.params[i] - v[i]) / std::max(std::abs(v[i]), 1e-3));
    add_gse_row(fits, std::string("selffit_") + label, f, gaussian_mass_fraction(exact, f.params[3]));
  }
  r.checks.push_back(below(9, "selffit_max_relative_error", worst, 1e-6));

  const std::size_t n = scaled(1e6, o.scale, 20000);
  const auto g = mixture_draws(n, o.seed, 9, o.threads);
  const auto kde = kde_gaussian(g, grid);
  const auto f = fit_gse_nls(kde);
  const double mass = gaussian_mass_fraction(kde, f.params[3]);
  add_gse_row(fits, "gaussian_mig_mixture", f, mass);
  r.checks.push_back(below(9, "mixture_fit_z", f.params[4], 1.0));
  if (o.scale == 1.0 && o.seed == kGoldenSeed) {
    const std::array<double, 6> got{f.params[0], f.params[1], f.params[2],
                                    f.params[3], f.params[4], mass};
    double dev = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      const double ref = kGoldenMixtureFit[i];
      dev = std::max(dev, std::isnan(ref) ? std::numeric_limits<double>::infinity()
                                          : std::abs(got[i] - ref) / std::max(std::abs(ref), 1e-3));
    }
    r.checks.push_back(below(9, "mixture_fit_golden_max_relative_deviation", dev, kGoldenRelTol));
  }
  Table dens{{"x", "kde", "gse_fit"}, {}};
  const GseParams fp{f.params[0], f.params[1], f.params[2], f.params[3], f.params[4]};
  for (std::size_t i = 0; i < grid.size(); ++i) dens.add(grid[i], kde.values[i], gse_pdf(grid[i], fp));
  r.tables.emplace_back("gse_fits.csv", std::move(fits));
  r.tables.emplace_back("mixture_density.csv", std::move(dens));
  r.summary = {{"mixture_draws", n},
               {"bandwidth", kde.bandwidth},
               {"gaussian_mass_fraction", mass},
               {"mixture_fit", {{"C", f.params[0]}, {"u", f.params[1]}, {"v", f.params[2]},
                                {"w", f.params[3]}, {"z", f.params[4]}}}};
  return r;
}

// Mass on [-w, w]; a crossover beyond the grid means the whole grid is core.
double mass_within(const DensityEstimate& d, double w) {
  return gaussian_mass_fraction(d, std::min(w, d.grid.back()));
}

ExperimentResult fig5(const ExperimentOptions& o) {
  ExperimentResult r;
  const std::size_t n_firms = scaled(24000, o.scale, 500);
  constexpr std::size_t kT = 40;
  std::vector<std::vector<double>> series(n_firms);
  parallel_for(n_firms, o.threads, [&](std::size_t i) {
    RandomStream stream(o.seed, StreamTag::Sampler, i, 5);
    const double sigma = mig_sample(kPublishedMig, stream.uniform());
    series[i].resize(kT);
    for (auto& v : series[i]) v = sigma * stream.normal();
  });
  std::vector<double> all;
  for (const auto& s : series) all.insert(all.end(), s.begin(), s.end());
  const double m = mean_of(all);
  const double scale = mad_volatility(all);
  std::vector<double> hom(all.size()), het;
  for (std::size_t i = 0; i < all.size(); ++i) hom[i] = (all[i] - m) / scale;
  std::size_t missing = 0;
  for (const auto& s : series)
    for (double v : leave_one_out_rescale(s)) {
      if (std::isfinite(v)) {
        het.push_back(v);
      } else {
        ++missing;
      }
    }
  const auto grid = regular_grid(-8.0, 8.0, 2500);
  const auto d_hom = kde_gaussian(hom, grid);
  const auto d_het = kde_gaussian(het, grid);
  const auto f_hom = fit_gse_nls(d_hom);
  const auto f_het = fit_gse_nls(d_het);
  const double mass_hom = mass_within(d_hom, f_hom.params[3]);
  const double mass_het = mass_within(d_het, f_het.params[3]);

  Table fits = gse_row_header();
  add_gse_row(fits, "homogeneous", f_hom, mass_hom);
  add_gse_row(fits, "heterogeneous", f_het, mass_het);
  const GseParams ph{f_hom.params[0], f_hom.params[1], f_hom.params[2], f_hom.params[3],
                     f_hom.params[4]};
  const GseParams pt{f_het.params[0], f_het.params[1], f_het.params[2], f_het.params[3],
                     f_het.params[4]};
  Table dens{{"x", "homogeneous", "heterogeneous", "gse_homogeneous", "gse_heterogeneous",
              "standard_normal"},
             {}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    dens.add(x, d_hom.values[i], d_het.values[i], gse_pdf(x, ph), gse_pdf(x, pt),
             std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi));
  }
  r.tables.emplace_back("gse_fits.csv", std::move(fits));
  r.tables.emplace_back("rescaled_growth_density.csv", std::move(dens));
  r.checks.push_back(above(0, "mass_heterogeneous_minus_homogeneous", mass_het - mass_hom, 0.0));
  r.checks.push_back(above(0, "heterogeneous_fit_converged", f_het.converged ? 1.0 : 0.0, 0.5));
  r.summary = {{"n_firms", n_firms},
               {"growth_rates_per_firm", kT},
               {"leave_one_out_missing", missing},
               {"mass_homogeneous", mass_hom},
               {"mass_heterogeneous", mass_het}};
  return r;
}

// Quarterly panel of the double-granularity model reduced to per-firm annual
// growth, average size, and initial theoretical volatility.
struct GrowthPanel {
  std::vector<double> mean_size;
  std::vector<double> theoretical_vol;
  std::vector<std::vector<double>> growth;
  std::uint64_t clamp_count = 0;
};

GrowthPanel simulate_growth_panel(const ModelParams& p, std::size_t n_firms,
                                  std::size_t n_periods, const ExperimentOptions& o) {
  const auto panel = simulate_panel(p, n_firms, n_periods, o.seed, o.threads);
  GrowthPanel out;
  out.clamp_count = panel.clamp_count;
  out.mean_size.assign(n_firms, 0.0);
  out.growth.resize(n_firms);
  for (std::size_t f = 0; f < n_firms; ++f) {
    const auto* rec = &panel.records[f * n_periods];
    double s = 0.0;
    for (std::size_t t = 0; t < n_periods; ++t) s += rec[t].size;
    out.mean_size[f] = s / static_cast<double>(n_periods);
    for (std::size_t t = 0; t + 4 < n_periods; ++t)
      out.growth[f].push_back(std::log(rec[t + 4].size / rec[t].size));
  }
  const auto summaries = summarize_population(p, n_firms, o.seed, false, o.threads);
  for (const auto& s : summaries)
    out.theoretical_vol.push_back(2.0 * p.sigma0 * std::sqrt(s.hhi));
  return out;
}

ExperimentResult fig1_right(const ExperimentOptions& o) {
  ExperimentResult r;
  const auto p = wb_params(1.25, 1.1);
  const std::size_t n = scaled(20000, o.scale, 500);
  const auto panel = simulate_growth_panel(p, n, 44, o);
  std::vector<double> mad(n);
  for (std::size_t i = 0; i < n; ++i) mad[i] = mad_volatility(panel.growth[i]);
  const std::vector<double> q1{1.0};
  const auto b_mad = binned_volatility_moments(panel.mean_size, mad, q1, 25);
  const auto b_th = binned_volatility_moments(panel.mean_size, panel.theoretical_vol, q1, 25);
  Table t{{"bin", "mean_size", "n_firms", "mean_mad_volatility", "mean_theoretical_volatility"}, {}};
  std::vector<double> xs, y_mad, y_th;
  for (std::size_t b = 0; b < b_mad.size(); ++b) {
    t.add(b + 1, b_mad[b].mean_size, b_mad[b].n_firms, b_mad[b].moments[0], b_th[b].moments[0]);
    xs.push_back(b_mad[b].mean_size);
    y_mad.push_back(b_mad[b].moments[0]);
    y_th.push_back(b_th[b].moments[0]);
  }
  const auto f_mad = loglog_ols(xs, y_mad);
  const auto f_th = loglog_ols(xs, y_th);
  r.tables.emplace_back("binned_volatility.csv", std::move(t));
  r.checks.push_back(
      within(0, "slope_mad_minus_slope_theoretical", f_mad.slope - f_th.slope, 0.0, 0.05));
  r.summary = {{"n_firms", n},
               {"periods", 44},
               {"beta_mad", -f_mad.slope},
               {"beta_mad_se", f_mad.slope_se},
               {"beta_theoretical", -f_th.slope},
               {"clamp_count", panel.clamp_count}};
  return r;
}

ExperimentResult fig1_left(const ExperimentOptions& o) {
  ExperimentResult r;
  const auto p = wb_params(1.25, 1.1);
  const std::size_t n = scaled(20000, o.scale, 500);
  const auto panel = simulate_growth_panel(p, n, 44, o);

  std::vector<double> g;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < n; ++i)
    for (double v : panel.growth[i]) {
      g.push_back(v);
      owner.push_back(i);
    }
  const double m = mean_of(g);
  for (auto& v : g) v -= m;
  double var = 0.0;
  for (double v : g) var += v * v;
  const double sd = std::sqrt(var / static_cast<double>(g.size() - 1));

  // Volatility from the binned power law, bootstrapped over firms.
  std::vector<double> mad(n);
  for (std::size_t i = 0; i < n; ++i) mad[i] = mad_volatility(panel.growth[i]);
  const std::vector<double> q1{1.0};
  const auto prof = power_law_exponent_profile(panel.mean_size, mad, q1, 25);
  const double slope = prof[0].fit.slope;
  const double intercept = prof[0].fit.intercept;
  RandomStream stream(o.seed, StreamTag::Bootstrap, 1);
  std::vector<double> mix(g.size());
  for (auto& v : mix) {
    const auto j = stream.below(n);
    v = std::exp(intercept) * std::pow(panel.mean_size[j], slope) * stream.normal();
  }
  double mvar = 0.0;
  for (double v : mix) mvar += v * v;
  const double msd = std::sqrt(mvar / static_cast<double>(mix.size() - 1));

  const auto s = sorted_copy(g);
  const auto grid = regular_grid(s.front(), s.back(), 10000);
  const auto d_emp = kde_gaussian(g, grid);
  const auto d_mix = kde_gaussian(mix, grid);
  Table t{{"x", "empirical", "gaussian_fit", "mixture", "mixture_gaussian_fit"}, {}};
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    t.add(x, d_emp.values[i], c / sd * std::exp(-0.5 * x * x / (sd * sd)), d_mix.values[i],
          c / msd * std::exp(-0.5 * x * x / (msd * msd)));
  }
  r.tables.emplace_back("growth_density.csv", std::move(t));
  const double k_emp = excess_kurtosis(g);
  const double k_mix = excess_kurtosis(mix);
  r.checks.push_back(above(0, "excess_kurtosis_pooled_growth", k_emp, 0.0));
  r.checks.push_back(above(0, "excess_kurtosis_volatility_mixture", k_mix, 0.0));
  r.summary = {{"n_firms", n},
               {"growth_rates", g.size()},
               {"sd", sd},
               {"bandwidth", d_emp.bandwidth},
               {"beta", -slope},
               {"clamp_count", panel.clamp_count}};
  return r;
}

// Probability mass of the k-Laplace-sum density over [lo, hi].
double laplace_sum_mass(int k, double lo, double hi) {
  using boost::math::quadrature::gauss_kronrod;
  const auto f = [k](double y) { return laplace_sum_pdf(k, y); };
  if (lo < 0.0 && hi > 0.0)
    return gauss_kronrod<double, 31>::integrate(f, lo, 0.0, 10, 1e-13) +
           gauss_kronrod<double, 31>::integrate(f, 0.0, hi, 10, 1e-13);
  return gauss_kronrod<double, 31>::integrate(f, lo, hi, 10, 1e-13);
}

// Density of (X1 + X2) / sqrt(2) by direct quadrature of the convolution,
// split at the two kinks of the integrand.
double laplace_self_convolution(double y) {
  using boost::math::quadrature::gauss_kronrod;
  const double s = std::numbers::sqrt2 * y;
  const auto f = [s](double x) { return laplace_pdf(x) * laplace_pdf(s - x); };
  const double a = std::min(0.0, s), b = std::max(0.0, s);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double total = gauss_kronrod<double, 61>::integrate(f, -kInf, a, 15, 1e-14) +
                 gauss_kronrod<double, 61>::integrate(f, b, kInf, 15, 1e-14);
  if (b > a) total += gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
  return std::numbers::sqrt2 * total;
}

ExperimentResult laplace_sum(const ExperimentOptions& o) {
  ExperimentResult r;
  const std::size_t n = scaled(1e7, o.scale, 100000);
  constexpr std::size_t kBins = 200;
  constexpr double kLo = -6.0, kHi = 6.0;
  constexpr double kWidth = (kHi - kLo) / kBins;
  constexpr std::size_t kChunk = 1 << 17;
  for (int k : {2, 4, 8}) {
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<std::vector<std::uint64_t>> partial(chunks, std::vector<std::uint64_t>(kBins, 0));
    const double inv_root_k = 1.0 / std::sqrt(static_cast<double>(k));
    parallel_for(chunks, o.threads, [&](std::size_t c) {
      RandomStream stream(o.seed, StreamTag::Sampler, c, static_cast<std::uint32_t>(100 + k));
      const std::size_t end = std::min(n, (c + 1) * kChunk);
      auto& h = partial[c];
      for (std::size_t i = c * kChunk; i < end; ++i) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += laplace_sample(stream.uniform());
        const double y = s * inv_root_k;
        if (y < kLo || y >= kHi) continue;
        const auto b = std::min(kBins - 1, static_cast<std::size_t>((y - kLo) / kWidth));
        ++h[b];
      }
    });
    Table t{{"bin_lo", "bin_hi", "count", "mc_density", "exact_density", "z"}, {}};
    double z_max = 0.0;
    const double N = static_cast<double>(n);
    for (std::size_t b = 0; b < kBins; ++b) {
      std::uint64_t count = 0;
      for (const auto& h : partial) count += h[b];
      const double lo = kLo + static_cast<double>(b) * kWidth;
      const double hi = lo + kWidth;
      const double pb = laplace_sum_mass(k, lo, hi);
      const double se = std::sqrt(pb * (1.0 - pb) / N);
      const double z = std::abs(static_cast<double>(count) / N - pb) / se;
      z_max = std::max(z_max, z);
      t.add(lo, hi, count, static_cast<double>(count) / N / kWidth, pb / kWidth, z);
    }
    r.tables.emplace_back("histogram_k" + std::to_string(k) + ".csv", std::move(t));
    r.checks.push_back(below(10, "max_binomial_z_k" + std::to_string(k), z_max, 3.0));
  }
  Table conv{{"y", "closed_form", "convolution", "abs_error"}, {}};
  double worst = 0.0;
  for (int i = 0; i <= 240; ++i) {
    const double y = -6.0 + 0.05 * i;
    const double a = laplace_sum_pdf(2, y);
    const double b = laplace_self_convolution(y);
    worst = std::max(worst, std::abs(a - b));
    conv.add(y, a, b, std::abs(a - b));
  }
  r.tables.emplace_back("convolution_k2.csv", std::move(conv));
  r.checks.push_back(below(10, "max_abs_error_g2_vs_convolution", worst, 1e-8));
  r.summary = {{"sums_per_k", n}, {"bins", kBins}, {"range", {kLo, kHi}}};
  return r;
}

}  // namespace

ExperimentResult run_experiment(const std::string& id, const ExperimentOptions& options) {
  if (!(options.scale > 0.0)) throw ContractError("experiment scale must be > 0");
  ExperimentResult r;
  if (id == "prop2_scaling") {
    r = prop2_scaling(options);
  } else if (id == "prop3_tail") {
    r = prop3_tail(options);
  } else if (id == "prop7_aggregation") {
    r = prop7_aggregation(options);
  } else if (id == "fig1_left") {
    r = fig1_left(options);
  } else if (id == "fig1_right") {
    r = fig1_right(options);
  } else if (id == "fig3") {
    r = fig3(options);
  } else if (id == "fig4") {
    r = fig4(options);
  } else if (id == "fig5") {
    r = fig5(options);
  } else if (id == "table1") {
    r = table1(options);
  } else if (id == "laplace_sum") {
    r = laplace_sum(options);
  } else {
    throw ContractError("unknown experiment '" + id + "'");
  }
  r.id = id;
  r.summary["seed"] = options.seed;
  r.summary["scale"] = options.scale;
  return r;
}

}  // namespace granular::app
