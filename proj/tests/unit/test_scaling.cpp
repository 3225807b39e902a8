#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "granular/distributions.hpp"
#include "granular/errors.hpp"
#include "granular/rng.hpp"
#include "granular/scaling.hpp"

using namespace granular;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed, double mu = 0.0, double sd = 1.0) {
  RandomStream s(seed, StreamTag::Generic);
  std::vector<double> v(n);
  for (auto& x : v) x = mu + sd * s.normal();
  return v;
}

double trapezoid(const DensityEstimate& d) {
  double m = 0.0;
  for (std::size_t i = 1; i < d.grid.size(); ++i)
    m += 0.5 * (d.grid[i] - d.grid[i - 1]) * (d.values[i] + d.values[i - 1]);
  return m;
}

}  // namespace

TEST(EqualCountBins, SmallExamples) {
  const std::vector<double> k{4.0, 1.0, 3.0, 2.0};
  EXPECT_EQ(equal_count_bins(k, 2), (std::vector<std::size_t>{1, 0, 1, 0}));
  const std::vector<double> same(5, 1.0);
  EXPECT_EQ(equal_count_bins(same, 2), (std::vector<std::size_t>{0, 0, 0, 1, 1}));
  EXPECT_THROW(equal_count_bins(k, 5), DomainError);
  EXPECT_THROW(equal_count_bins({}, 1), DomainError);
}

TEST(EqualCountBins, TwentyFiveBinsOfRealisticSample) {
  RandomStream s(1, StreamTag::Generic);
  std::vector<double> k(24233);
  for (auto& v : k) v = s.uniform();
  const auto bins = equal_count_bins(k, 25);
  std::vector<std::size_t> count(25, 0);
  for (auto b : bins) ++count[b];
  for (auto c : count) EXPECT_TRUE(c == 969 || c == 970) << c;
  // Partition with monotone boundaries.
  std::vector<double> hi(25, -1.0), lo(25, 2.0);
  for (std::size_t i = 0; i < k.size(); ++i) {
    hi[bins[i]] = std::max(hi[bins[i]], k[i]);
    lo[bins[i]] = std::min(lo[bins[i]], k[i]);
  }
  for (std::size_t b = 1; b < 25; ++b) EXPECT_LE(hi[b - 1], lo[b]);
}

TEST(BinnedMoments, Examples) {
  const std::vector<double> sizes{1.0, 1.0};
  const std::vector<double> vols{1.0, 2.0};
  const std::vector<double> q{2.0};
  const auto b = binned_volatility_moments(sizes, vols, q, 1);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_DOUBLE_EQ(b[0].moment(2.0), 2.5);
  EXPECT_THROW(binned_volatility_moments(sizes, std::vector<double>{1.0}, q, 1), ContractError);
}

TEST(BinnedMoments, PermutationInvariantWithinBins) {
  RandomStream s(2, StreamTag::Generic);
  std::vector<double> sizes(1000), vols(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    sizes[i] = static_cast<double>(i + 1);
    vols[i] = s.uniform();
  }
  const std::vector<double> q{1.0, 2.0};
  const auto a = binned_volatility_moments(sizes, vols, q, 10);
  // Swap two firms inside bin 3 (indices 300..399).
  std::swap(vols[310], vols[377]);
  std::swap(sizes[310], sizes[377]);
  const auto b = binned_volatility_moments(sizes, vols, q, 10);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_NEAR(a[i].moments[0], b[i].moments[0], 1e-15);
    EXPECT_NEAR(a[i].moments[1], b[i].moments[1], 1e-15);
  }
}

TEST(PowerLaws, ExactCurveRecovered) {
  std::vector<double> sizes, vols;
  for (int i = 0; i < 500; ++i) {
    sizes.push_back(std::pow(10.0, i / 100.0));
    vols.push_back(3.0 * std::pow(sizes.back(), -0.2));
  }
  const std::vector<double> q{1.0};
  const auto b = binned_volatility_moments(sizes, vols, q, 25);
  std::vector<double> x, y;
  for (const auto& s : b) {
    x.push_back(s.mean_size);
    y.push_back(s.moments[0]);
  }
  EXPECT_NEAR(loglog_ols(x, y).slope, -0.2, 2e-3);
}

TEST(LoglogOls, ExactLine) {
  const std::vector<double> x{1, 2, 4, 8, 16};
  std::vector<double> y;
  for (double v : x) y.push_back(10.0 * std::pow(v, -0.5));
  const auto f = loglog_ols(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-14);
  EXPECT_NEAR(f.intercept, std::log(10.0), 1e-13);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
  EXPECT_THROW(loglog_ols(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DomainError);
  EXPECT_THROW(loglog_ols(std::vector<double>{1, 2, 0}, std::vector<double>{1, 2, 3}), DomainError);
}

TEST(LoglogOls, SlopeInvariantUnderRescaledY) {
  const std::vector<double> x{1, 2, 3, 5, 8, 13};
  const std::vector<double> y{2.0, 1.7, 1.1, 0.9, 0.95, 0.6};
  std::vector<double> y2;
  for (double v : y) y2.push_back(v * 37.0);
  const auto a = loglog_ols(x, y);
  const auto b = loglog_ols(x, y2);
  EXPECT_NEAR(a.slope, b.slope, 1e-13);
  EXPECT_NEAR(a.slope_se, b.slope_se, 1e-13);
  EXPECT_GT(a.slope_se, 0.0);
  EXPECT_NEAR(b.intercept - a.intercept, std::log(37.0), 1e-13);
}

TEST(LoglogWls, EqualWeightsReduceToOls) {
  const std::vector<double> x{1, 2, 3, 5, 8, 13};
  const std::vector<double> y{2.0, 1.7, 1.1, 0.9, 0.95, 0.6};
  const std::vector<double> w(6, 2.5);
  const auto a = loglog_ols(x, y);
  const auto b = loglog_wls(x, y, w);
  EXPECT_NEAR(a.slope, b.slope, 1e-13);
  EXPECT_NEAR(a.intercept, b.intercept, 1e-13);
}

TEST(Kde, RejectsDegenerateInput) {
  const std::vector<double> grid{0.0, 1.0};
  EXPECT_THROW(kde_gaussian(std::vector<double>{1.0}, grid), DomainError);
  EXPECT_THROW(kde_gaussian(std::vector<double>{2.0, 2.0, 2.0}, grid), DomainError);
}

TEST(Kde, BandwidthRule) {
  const auto x = normals(1000, 3);
  const double h = normal_reference_bandwidth(x);
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / 1000.0;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / 999.0);
  auto q = [&](double p) {
    const double pos = p * 999.0;
    const auto lo = static_cast<std::size_t>(pos);
    return s[lo] + (pos - lo) * (s[lo + 1] - s[lo]);
  };
  const double iqr = q(0.75) - q(0.25);
  EXPECT_NEAR(h, 1.06 * std::min(sd, iqr / 1.34) * std::pow(1000.0, -0.2), 1e-14);
  // Zero IQR with positive spread falls back to the standard deviation.
  std::vector<double> spiky(100, 0.0);
  spiky[0] = -5.0;
  spiky[99] = 5.0;
  EXPECT_GT(normal_reference_bandwidth(spiky), 0.0);
}

TEST(Kde, RecoversStandardNormal) {
  const auto x = normals(1000000, 4);
  const auto grid = regular_grid(-3.0, 3.0, 601);
  const auto d = kde_gaussian(x, grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double phi = std::exp(-0.5 * grid[i] * grid[i]) / std::sqrt(2.0 * std::numbers::pi);
    worst = std::max(worst, std::abs(d.values[i] - phi));
  }
  EXPECT_LT(worst, 0.01);
}

TEST(Kde, BinnedPathAgreesWithExactSums) {
  const auto x = normals(40000, 5);
  const auto grid = regular_grid(-4.0, 4.0, 801);  // 3.2e7 > binning threshold
  const auto binned = kde_gaussian(x, grid);
  const std::vector<double> coarse(grid.begin(), grid.begin() + 400);
  const auto exact = kde_gaussian(x, coarse, binned.bandwidth);  // 1.6e7, exact sums
  for (std::size_t i = 0; i < coarse.size(); ++i)
    EXPECT_NEAR(binned.values[i], exact.values[i], 1e-5 * exact.values[i] + 1e-9);
}

TEST(Kde, IntegratesToOneAndIsNonNegative) {
  const auto x = normals(5000, 6, 1.0, 2.0);
  const double h = normal_reference_bandwidth(x);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const auto d = kde_gaussian(x, regular_grid(*lo - 5 * h, *hi + 5 * h, 4000));
  EXPECT_NEAR(trapezoid(d), 1.0, 0.01);
  for (double v : d.values) EXPECT_GE(v, 0.0);
  EXPECT_EQ(d.n_samples, 5000u);
}

TEST(Kde, SymmetricSamplesGiveSymmetricDensity) {
  auto half = normals(500, 7);
  std::vector<double> x;
  const double c = 0.75;
  for (double v : half) {
    x.push_back(c + v);
    x.push_back(c - v);
  }
  const auto grid = regular_grid(c - 4.0, c + 4.0, 801);
  const auto d = kde_gaussian(x, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(d.values[i], d.values[grid.size() - 1 - i], 1e-10);
}

TEST(RescaleCollapse, Examples) {
  const auto out = rescale_collapse({{2.0, 4.0}, {1.0, 1.0, 4.0}});
  EXPECT_NEAR(out[0][0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(out[0][1], 4.0 / 3.0, 1e-15);
  for (const auto& b : out)
    EXPECT_NEAR(std::accumulate(b.begin(), b.end(), 0.0) / b.size(), 1.0, 1e-15);
  const auto scaled = rescale_collapse({{20.0, 40.0}, {10.0, 10.0, 40.0}});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < out[b].size(); ++i) EXPECT_NEAR(out[b][i], scaled[b][i], 1e-15);
  EXPECT_THROW(rescale_collapse({{}}), DomainError);
}

TEST(Hill, ParetoIndexRecovered) {
  RandomStream s(8, StreamTag::Generic);
  std::vector<double> x(1000000);
  for (auto& v : x) v = pareto_sample({1.0, 1.5}, s.uniform());
  const auto h = hill_estimator(x, 0.01);
  EXPECT_NEAR(h.index, 1.5, 0.1);
  EXPECT_EQ(h.k, 10000u);
  EXPECT_NEAR(h.se, h.index / 100.0, 1e-15);
  EXPECT_TRUE(hill_profile(x).stable);
}

TEST(Hill, ThinTailHasNoPlateau) {
  RandomStream s(9, StreamTag::Generic);
  std::vector<double> x(1000000);
  for (auto& v : x) v = -std::log(s.uniform());
  const auto p = hill_profile(x);
  ASSERT_EQ(p.estimates.size(), 4u);
  // The estimated index rises as the tail fraction shrinks.
  EXPECT_GT(p.estimates[0].index, p.estimates[3].index);
  EXPECT_FALSE(p.stable);
}

TEST(Hill, Degenerate) {
  const std::vector<double> same(10000, 3.0);
  EXPECT_THROW(hill_estimator(same, 0.01), DomainError);
  const std::vector<double> few(1000, 1.0);
  EXPECT_THROW(hill_estimator(few, 0.01), DomainError);
}

TEST(Ks, Examples) {
  const boost::math::normal n;
  const std::vector<double> one{0.0};
  EXPECT_DOUBLE_EQ(ks_distance(one, [&](double x) { return boost::math::cdf(n, x); }), 0.5);
  RandomStream s(10, StreamTag::Generic);
  std::vector<double> u(100000);
  for (auto& v : u) v = s.uniform();
  EXPECT_LT(ks_distance(u, [](double x) { return std::clamp(x, 0.0, 1.0); }), 0.01);
  const auto x = normals(10000, 11);
  EXPECT_LT(ks_distance(x, [&](double v) { return boost::math::cdf(n, v); }), 1.63 / 100.0);
  EXPECT_THROW(ks_distance({}, [](double) { return 0.0; }), DomainError);
}

TEST(Ks, TwoSample) {
  const auto a = normals(5000, 12);
  const auto b = normals(5000, 13);
  const auto c = normals(5000, 14, 1.0);
  EXPECT_LT(ks_two_sample(a, b), 1.63 * std::sqrt(2.0 / 5000.0));
  EXPECT_GT(ks_two_sample(a, c), 0.3);
  EXPECT_DOUBLE_EQ(ks_two_sample(a, a), 0.0);
}

TEST(ModeCount, Unimodal) {
  const auto x = normals(400, 15);
  RandomStream s(1, StreamTag::Bootstrap);
  const auto m = mode_count(x, 200, s);
  EXPECT_EQ(m.n_modes, 1);
  EXPECT_GT(m.p_value_two_modes, 0.1);
}

TEST(ModeCount, Bimodal) {
  const auto left = normals(200, 16, -3.0);
  const auto right = normals(200, 17, 3.0);
  std::vector<double> x(400);
  std::copy(left.begin(), left.end(), x.begin());
  std::copy(right.begin(), right.end(), x.begin() + 200);
  RandomStream s(2, StreamTag::Bootstrap);
  const auto m = mode_count(x, 200, s);
  EXPECT_EQ(m.n_modes, 2);
  EXPECT_LT(m.p_value_two_modes, 0.01);
}

TEST(ModeCount, NearConstant) {
  auto x = normals(300, 18, 0.0, 1e-9);
  for (auto& v : x) v += 5.0;
  RandomStream s(3, StreamTag::Bootstrap);
  EXPECT_EQ(mode_count(x, 100, s).n_modes, 1);
  EXPECT_THROW(mode_count(std::vector<double>(50, 1.0), 10, s), DomainError);
}
