#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "granular/distributions.hpp"
#include "granular/errors.hpp"
#include "granular/estimation.hpp"
#include "granular/optimize.hpp"
#include "granular/rng.hpp"

using namespace granular;

namespace {

const double kAdj = std::sqrt(std::numbers::pi / 2.0);

// Direct O(T^2) leave-one-out rescaling.
std::vector<double> loo_brute(const std::vector<double>& g) {
  std::vector<double> out(g.size());
  for (std::size_t t = 0; t < g.size(); ++t) {
    std::vector<double> rest;
    for (std::size_t s = 0; s < g.size(); ++s)
      if (s != t) rest.push_back(g[s]);
    const double m = std::accumulate(rest.begin(), rest.end(), 0.0) / rest.size();
    double mad = 0.0;
    for (double v : rest) mad += std::abs(v - m);
    mad /= rest.size();
    out[t] = mad == 0.0 ? std::nan("") : (g[t] - m) / (kAdj * mad);
  }
  return out;
}

std::vector<double> mig_draws(const MigParams& p, std::size_t n, std::uint64_t seed) {
  RandomStream s(seed, StreamTag::Sampler);
  std::vector<double> x(n);
  for (auto& v : x) v = mig_sample(p, s.uniform());
  return x;
}

DensityEstimate gse_curve(const GseParams& p) {
  DensityEstimate d;
  d.grid = regular_grid(-8.0, 8.0, 1601);
  for (double x : d.grid) d.values.push_back(gse_pdf(x, p));
  d.bandwidth = 0.1;
  d.n_samples = 0;
  return d;
}

}  // namespace

TEST(Volatility, MadExamples) {
  EXPECT_DOUBLE_EQ(mad_volatility(std::vector<double>{3.0, 3.0, 3.0}), 0.0);
  EXPECT_NEAR(mad_volatility(std::vector<double>{-1.0, 1.0}), 1.2533141373155003, 1e-15);
  EXPECT_THROW(mad_volatility(std::vector<double>{1.0}), DomainError);
}

TEST(Volatility, MadUnbiasedForGaussian) {
  RandomStream s(1, StreamTag::Generic);
  std::vector<double> g(1000000);
  for (auto& v : g) v = 0.3 * s.normal();
  EXPECT_NEAR(mad_volatility(g), 0.3, 0.3 * 0.005);
}

TEST(Volatility, SdExamplesAndEquivariance) {
  EXPECT_NEAR(sd_volatility(std::vector<double>{-1.0, 1.0}), std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(sd_volatility(std::vector<double>{2.0, 2.0, 2.0}), 0.0);
  const std::vector<double> g{0.1, -0.3, 0.25, 0.05, -0.1};
  std::vector<double> h;
  for (double v : g) h.push_back(4.0 * v + 9.0);
  EXPECT_NEAR(sd_volatility(h), 4.0 * sd_volatility(g), 1e-13);
  EXPECT_NEAR(mad_volatility(h), 4.0 * mad_volatility(g), 1e-13);
}

TEST(LeaveOneOut, MatchesDirectComputation) {
  RandomStream s(2, StreamTag::Generic);
  for (std::size_t T : {3u, 4u, 7u, 40u, 301u}) {
    std::vector<double> g(T);
    for (auto& v : g) v = s.normal() * 0.2 + 0.01;
    const auto fast = leave_one_out_rescale(g);
    const auto slow = loo_brute(g);
    for (std::size_t t = 0; t < T; ++t) EXPECT_NEAR(fast[t], slow[t], 1e-10) << T << " " << t;
  }
}

TEST(LeaveOneOut, DegenerateElementIsMissing) {
  const auto out = leave_one_out_rescale(std::vector<double>{0.0, 0.0, 5.0});
  EXPECT_TRUE(std::isnan(out[2]));
  EXPECT_FALSE(std::isnan(out[0]));
  EXPECT_THROW(leave_one_out_rescale(std::vector<double>{1.0, 2.0}), DomainError);
}

TEST(LeaveOneOut, AffineInvariant) {
  const std::vector<double> g{0.1, -0.3, 0.25, 0.05, -0.1, 0.4, -0.2};
  std::vector<double> h;
  for (double v : g) h.push_back(2.5 * v - 1.0);
  const auto a = leave_one_out_rescale(g);
  const auto b = leave_one_out_rescale(h);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(LeaveOneOut, LongGaussianSeriesIsStandardized) {
  RandomStream s(3, StreamTag::Generic);
  std::vector<double> g(100000);
  for (auto& v : g) v = 2.0 + 0.7 * s.normal();
  const auto out = leave_one_out_rescale(g);
  EXPECT_NEAR(std::accumulate(out.begin(), out.end(), 0.0) / out.size(), 0.0, 0.01);
  EXPECT_NEAR(mad_volatility(out), 1.0, 0.01);
}

TEST(MigFit, RecoversPublishedShape) {
  const MigParams truth{4.788, 4.620, 0.326};
  const auto x = mig_draws(truth, 24000, 4);
  const auto fit = fit_mig_mle(x);
  ASSERT_TRUE(fit.converged);
  ASSERT_EQ(fit.standard_errors.size(), 3u);
  EXPECT_LT(std::abs(fit.param("b") - truth.b), 3.0 * fit.se("b"));
  EXPECT_LT(std::abs(fit.param("a") - truth.a), 3.0 * fit.se("a"));
  EXPECT_LT(std::abs(fit.param("m") - truth.m), 3.0 * fit.se("m"));
  const MigParams start = mig_initial_guess(x);
  EXPECT_LE(fit.objective, mig_negative_log_likelihood(x, start));
  EXPECT_NEAR(fit.objective, mig_negative_log_likelihood(x, {fit.params[0], fit.params[1], fit.params[2]}),
              1e-9 * std::abs(fit.objective));
}

TEST(MigFit, NestedInverseGamma) {
  const auto x = mig_draws({2.0, 3.0, 0.0}, 20000, 5);
  const auto fit = fit_mig_mle(x);
  ASSERT_TRUE(fit.converged);
  EXPECT_LT(fit.param("m"), 2.0 * fit.se("m") + 1e-9);
  EXPECT_NEAR(fit.param("b"), 3.0, 4.0 * fit.se("b"));
}

TEST(MigFit, ObjectiveNeverWorseThanStart) {
  const auto x = mig_draws({1.0, 2.0, 0.5}, 2000, 6);
  for (const MigParams init : {MigParams{1.0, 1.0, 0.1}, MigParams{10.0, 10.0, 2.0}}) {
    const auto fit = fit_mig_mle(x, init);
    EXPECT_LE(fit.objective, mig_negative_log_likelihood(x, init));
  }
}

TEST(MigFit, DefaultStartAvoidsExponentialLimit) {
  const MigParams truth{4.788, 4.620, 0.326};
  for (std::uint64_t seed = 10; seed < 30; ++seed) {
    const auto fit = fit_mig_mle(mig_draws(truth, 24000, seed));
    EXPECT_LT(fit.param("b"), 20.0) << seed;
    EXPECT_LT(fit.param("m"), 5.0) << seed;
  }
}

TEST(MigFit, Preconditions) {
  std::vector<double> few(99, 1.0);
  EXPECT_THROW(fit_mig_mle(few), DomainError);
  std::vector<double> bad(200, 1.0);
  bad[5] = -1.0;
  EXPECT_THROW(fit_mig_mle(bad), DomainError);
  std::vector<double> ok(200, 1.0);
  EXPECT_THROW(fit_mig_mle(ok, MigParams{-1.0, 1.0, 0.0}), DomainError);
}

TEST(GseFit, ZeroResidualRecovery) {
  const GseParams truth{0.5, 0.9, 0.0, 1.8, 0.4};
  const auto fit = fit_gse_nls(gse_curve(truth));
  ASSERT_TRUE(fit.converged);
  EXPECT_LT(fit.objective, 1e-10);
  EXPECT_NEAR(fit.param("C"), truth.C, 1e-6);
  EXPECT_NEAR(fit.param("u"), truth.u, 1e-6);
  EXPECT_NEAR(fit.param("v"), truth.v, 1e-6);
  EXPECT_NEAR(fit.param("w"), truth.w, 1e-6);
  EXPECT_NEAR(fit.param("z"), truth.z, 1e-6);
}

TEST(GseFit, ZeroResidualPublishedVector) {
  const GseParams truth{0.483, 0.894, -0.006, 1.905, 0.377};
  const auto fit = fit_gse_nls(gse_curve(truth));
  ASSERT_TRUE(fit.converged);
  EXPECT_LT(fit.objective, 1e-10);
  const std::vector<double> expected{0.483, 0.894, -0.006, 1.905, 0.377};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(fit.params[i], expected[i], 1e-6);
}

TEST(GseFit, ZeroResidualHomogeneousVector) {
  const GseParams truth{0.764, 0.432, 0.014, 0.673, 0.412};
  const auto fit = fit_gse_nls(gse_curve(truth));
  ASSERT_TRUE(fit.converged);
  EXPECT_LT(fit.objective, 1e-10);
  EXPECT_NEAR(fit.param("u"), truth.u, 1e-6);
  EXPECT_NEAR(fit.param("w"), truth.w, 1e-6);
}

TEST(GseFit, Preconditions) {
  DensityEstimate narrow;
  narrow.grid = regular_grid(-4.0, 4.0, 100);
  narrow.values.assign(100, 0.1);
  EXPECT_THROW(fit_gse_nls(narrow), DomainError);
  EXPECT_THROW(fit_gse_nls(gse_curve({0.5, 0.9, 0.0, 1.8, 0.4}), GseParams{0.5, 0.9, 0.0, 1.8, 3.0}),
               DomainError);
}

TEST(GaussianMass, Examples) {
  DensityEstimate d;
  d.grid = regular_grid(-8.0, 8.0, 16001);
  for (double x : d.grid) d.values.push_back(std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi));
  EXPECT_NEAR(gaussian_mass_fraction(d, 1.96), 0.95, 1e-4);
  EXPECT_NEAR(gaussian_mass_fraction(d, 1e-9), 0.0, 1e-8);
  EXPECT_EQ(gaussian_mass_fraction(d, 0.0), 0.0);
  EXPECT_THROW(gaussian_mass_fraction(d, 9.0), DomainError);
}

TEST(ExponentProfile, PurePowerLaw) {
  std::vector<double> sizes, vols;
  for (int i = 0; i < 2500; ++i) {
    sizes.push_back(std::pow(10.0, i / 500.0));
    vols.push_back(std::pow(sizes.back(), -0.2));
  }
  // Equal sizes within a bin make each binned moment exact.
  std::vector<double> s2, v2;
  for (int b = 0; b < 25; ++b)
    for (int j = 0; j < 40; ++j) {
      s2.push_back(std::pow(10.0, b / 5.0));
      v2.push_back(std::pow(s2.back(), -0.2));
    }
  const std::vector<double> q{1, 2, 3, 4};
  const auto prof = power_law_exponent_profile(s2, v2, q);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(prof[i].fit.slope, -0.2 * q[i], 1e-12);
  const auto approx = power_law_exponent_profile(sizes, vols, q);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(approx[i].fit.slope, -0.2 * q[i], 0.01);
}

TEST(ExponentProfile, BootstrapSeIsPositive) {
  RandomStream s(7, StreamTag::Generic);
  std::vector<double> sizes(2000), vols(2000);
  for (std::size_t i = 0; i < 2000; ++i) {
    sizes[i] = pareto_sample({1.0, 1.2}, s.uniform());
    vols[i] = std::pow(sizes[i], -0.2) * std::exp(0.3 * s.normal());
  }
  RandomStream b(8, StreamTag::Bootstrap);
  const double se = bootstrap_slope_se(sizes, vols, 1.0, 10, 50, b);
  EXPECT_GT(se, 0.0);
  EXPECT_LT(se, 0.1);
}

TEST(Optimizer, RosenbrockInBox) {
  const opt::Objective f = [](std::span<const double> x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  const opt::Box box{{-2.0, -2.0}, {2.0, 2.0}};
  const auto r = opt::minimize_box_bfgs(f, {-1.2, 1.0}, box);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
  const opt::Box tight{{-2.0, -2.0}, {0.5, 2.0}};
  const auto c = opt::minimize_box_bfgs(f, {-1.2, 1.0}, tight);
  EXPECT_NEAR(c.x[0], 0.5, 1e-12);
  EXPECT_NEAR(c.x[1], 0.25, 1e-4);
}

TEST(Optimizer, HessianOfQuadratic) {
  const opt::Objective f = [](std::span<const double> x) {
    return 3.0 * x[0] * x[0] + 2.0 * x[0] * x[1] + 5.0 * x[1] * x[1];
  };
  const opt::Box box{{0.0, -10.0}, {10.0, 10.0}};
  const auto H = opt::numeric_hessian(f, std::vector<double>{0.0, 1.0}, box);
  EXPECT_NEAR(H[0], 6.0, 1e-5);
  EXPECT_NEAR(H[1], 2.0, 1e-5);
  EXPECT_NEAR(H[3], 10.0, 1e-5);
}
