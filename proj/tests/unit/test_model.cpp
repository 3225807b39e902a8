#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>
#include <vector>

#include "granular/errors.hpp"
#include "granular/model.hpp"
#include "granular/scaling.hpp"

using namespace granular;

namespace {

ModelParams fixed(std::uint64_t K, double mu = 1.5, double sigma0 = 0.1) {
  ModelParams p;
  p.mu = mu;
  p.k_mode = CountMode::Fixed;
  p.fixed_count = K;
  p.sigma0 = sigma0;
  return p;
}

ModelParams pareto_count(double alpha, double mu, double sigma0 = 0.1) {
  ModelParams p;
  p.mu = mu;
  p.alpha = alpha;
  p.k_mode = CountMode::Pareto;
  p.sigma0 = sigma0;
  return p;
}

Firm firm_of(std::vector<double> s) { return Firm{std::move(s)}; }

}  // namespace

TEST(ModelParams, Validation) {
  EXPECT_NO_THROW(fixed(3).validate());
  EXPECT_THROW(fixed(3, 1.0).validate(), DomainError);
  EXPECT_THROW(fixed(3, 2.0).validate(), DomainError);
  EXPECT_THROW(fixed(0).validate(), DomainError);
  EXPECT_THROW(pareto_count(1.7, 1.6).validate(), DomainError);
  EXPECT_THROW(pareto_count(1.0, 1.6).validate(), DomainError);
  auto p = fixed(2);
  p.shock_law = ShockLaw::StudentT;
  p.shock_dof = 2.0;
  EXPECT_THROW(p.validate(), DomainError);
}

TEST(DrawFirm, FixedCount) {
  RandomStream s(1, StreamTag::FirmStructure);
  const Firm f = draw_firm(fixed(1), s);
  ASSERT_EQ(f.count(), 1u);
  EXPECT_GE(f.sub_unit_sizes[0], 1.0);
  const Firm g = draw_firm(fixed(17), s);
  EXPECT_EQ(g.count(), 17u);
  for (double v : g.sub_unit_sizes) EXPECT_GE(v, 1.0);
}

TEST(DrawFirm, ParetoCountTail) {
  const auto p = pareto_count(1.2, 1.6);
  const std::size_t n = 1000000;
  std::vector<std::uint64_t> k(n);
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream s(77, StreamTag::FirmStructure, i);
    k[i] = draw_count(p, s);
  }
  for (std::uint64_t kk : {2u, 3u, 5u, 10u, 30u, 100u}) {
    const double expect = std::pow(static_cast<double>(kk), -1.2);
    const double emp = static_cast<double>(std::count_if(k.begin(), k.end(),
                                                         [&](auto v) { return v >= kk; })) /
                       static_cast<double>(n);
    EXPECT_NEAR(emp, expect, 3.0 * std::sqrt(expect * (1 - expect) / n)) << kk;
  }
}

TEST(DrawFirm, LawOfLargeNumbers) {
  const Firm f = draw_firm(fixed(10000), 5, 0);
  EXPECT_NEAR(f.size() / 10000.0, 3.0, 0.15);
}

TEST(DrawFirm, IndexedDrawIsReproducible) {
  const auto p = pareto_count(1.2, 1.6);
  EXPECT_EQ(draw_firm(p, 9, 123).sub_unit_sizes, draw_firm(p, 9, 123).sub_unit_sizes);
  EXPECT_NE(draw_firm(p, 9, 123).sub_unit_sizes, draw_firm(p, 9, 124).sub_unit_sizes);
}

TEST(Hhi, Examples) {
  EXPECT_DOUBLE_EQ(hhi(firm_of({1})), 1.0);
  EXPECT_DOUBLE_EQ(hhi(firm_of({1, 1, 1, 1})), 0.25);
  EXPECT_DOUBLE_EQ(hhi(firm_of({3, 1})), 0.625);
  EXPECT_THROW(hhi(firm_of({})), ContractError);
}

TEST(Hhi, BoundsOnRandomFirms) {
  const auto p = pareto_count(1.2, 1.6);
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const Firm f = draw_firm(p, 3, i);
    const double h = hhi(f);
    EXPECT_GE(h, 1.0 / static_cast<double>(f.count()) * (1 - 1e-12));
    EXPECT_LE(h, 1.0 + 1e-12);
  }
}

TEST(GrowthRate, Examples) {
  const std::vector<double> a{1, -1};
  EXPECT_DOUBLE_EQ(growth_rate(firm_of({2, 2}), a, 0.1), 0.0);
  const std::vector<double> b{1.7};
  EXPECT_DOUBLE_EQ(growth_rate(firm_of({1}), b, 0.1), 0.1 * 1.7);
  const std::vector<double> c{1, 1};
  EXPECT_DOUBLE_EQ(growth_rate(firm_of({3, 1}), c, 0.1), 0.1);
  EXPECT_THROW(growth_rate(firm_of({3, 1}), b, 0.1), ContractError);
}

TEST(GrowthRate, ScaleInvariant) {
  const Firm f = draw_firm(fixed(50), 2, 0);
  Firm g = f;
  for (auto& s : g.sub_unit_sizes) s *= 7.25;
  RandomStream r(4, StreamTag::SubunitShock);
  std::vector<double> eta(50);
  for (auto& e : eta) e = r.normal();
  EXPECT_NEAR(growth_rate(f, eta, 0.2), growth_rate(g, eta, 0.2), 1e-15);
}

TEST(TheoreticalVolatility, Examples) {
  EXPECT_DOUBLE_EQ(theoretical_volatility(firm_of({1}), 0.2), 0.2);
  EXPECT_NEAR(theoretical_volatility(firm_of({3, 1}), 0.2), 0.2 * std::sqrt(0.625), 1e-15);
  EXPECT_NEAR(theoretical_volatility(firm_of(std::vector<double>(16, 2.0)), 0.2), 0.05, 1e-15);
}

TEST(SimulatePanel, ZeroShocksKeepSizes) {
  const Panel p = simulate_panel(pareto_count(1.2, 1.6, 0.0), 50, 6, 1);
  ASSERT_EQ(p.records.size(), 300u);
  for (std::size_t i = 0; i < p.records.size(); ++i)
    EXPECT_EQ(p.records[i].size, p.records[i - i % 6].size);
  EXPECT_EQ(p.clamp_count, 0u);
}

TEST(SimulatePanel, RecordLayout) {
  const Panel p = simulate_panel(fixed(3), 7, 5, 2);
  ASSERT_EQ(p.records.size(), 35u);
  for (std::size_t i = 0; i < 35; ++i) {
    EXPECT_EQ(p.records[i].firm_id, static_cast<std::int64_t>(i / 5));
    EXPECT_EQ(p.records[i].period, static_cast<std::int64_t>(i % 5));
    EXPECT_GT(p.records[i].size, 0.0);
  }
  EXPECT_THROW(simulate_panel(fixed(3), 0, 5, 2), DomainError);
  EXPECT_THROW(simulate_panel(fixed(3), 3, 1, 2), DomainError);
}

TEST(SimulatePanel, SingleUnitGrowthVariance) {
  const double sigma0 = 0.05;
  const Panel p = simulate_panel(fixed(1, 1.5, sigma0), 100000, 2, 3);
  std::vector<double> g(100000);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = p.records[2 * i + 1].size / p.records[2 * i].size - 1.0;
  const double mean = std::accumulate(g.begin(), g.end(), 0.0) / g.size();
  double var = 0.0;
  for (double v : g) var += (v - mean) * (v - mean);
  var /= (g.size() - 1);
  EXPECT_NEAR(var, sigma0 * sigma0, 0.03 * sigma0 * sigma0);
}

TEST(SimulatePanel, DeterministicAcrossThreadCounts) {
  const auto params = pareto_count(1.2, 1.6, 0.3);
  const Panel a = simulate_panel(params, 500, 8, 11, 1);
  const Panel b = simulate_panel(params, 500, 8, 11, 4);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i)
    ASSERT_EQ(a.records[i].size, b.records[i].size);
  EXPECT_EQ(a.clamp_count, b.clamp_count);
}

TEST(SimulatePanel, ClampsLargeNegativeShocks) {
  const Panel p = simulate_panel(fixed(4, 1.5, 0.6), 2000, 4, 5);
  EXPECT_GT(p.clamp_count, 0u);
  for (const auto& r : p.records) EXPECT_GT(r.size, 0.0);
}

TEST(SimulatePanel, FirstPeriodGrowthMatchesSummary) {
  const auto params = pareto_count(1.2, 1.6, 0.05);
  const Panel p = simulate_panel(params, 200, 2, 21);
  for (std::size_t i = 0; i < 200; ++i) {
    const auto s = summarize_firm(params, 21, i, true);
    EXPECT_DOUBLE_EQ(s.size, p.records[2 * i].size);
    EXPECT_NEAR(s.growth, p.records[2 * i + 1].size / p.records[2 * i].size - 1.0, 1e-12);
  }
}

TEST(FixedFirmGrowth, GaussianWithTheoreticalSd) {
  auto params = fixed(400, 1.5, 0.1);
  const Firm f = draw_firm(params, 8, 0);
  const double sd = theoretical_volatility(f, params.sigma0);
  std::vector<double> g(10000), eta(400);
  for (std::size_t r = 0; r < g.size(); ++r) {
    RandomStream s(8, StreamTag::SubunitShock, 0, static_cast<std::uint32_t>(r));
    for (auto& e : eta) e = s.normal();
    g[r] = growth_rate(f, eta, params.sigma0);
  }
  const boost::math::normal ref(0.0, sd);
  const double d = ks_distance(g, [&](double x) { return boost::math::cdf(ref, x); });
  EXPECT_LT(d, 1.63 / std::sqrt(10000.0));  // KS p > 0.01
}

TEST(FewSubunits, TrivialCases) {
  std::vector<Firm> ones;
  for (int i = 1; i <= 20; ++i) ones.push_back(firm_of({static_cast<double>(i)}));
  const std::vector<double> edges{0.0, 5.0, 10.0, 25.0};
  for (const auto& b : fraction_few_subunits(ones, edges, 2)) EXPECT_EQ(b.fraction, 1.0);

  std::vector<Firm> many;
  for (int i = 1; i <= 20; ++i) many.push_back(firm_of({1.0, 1.0, static_cast<double>(i)}));
  const auto bins = fraction_few_subunits(many, std::vector<double>{0.0, 10.0, 30.0, 100.0}, 2);
  EXPECT_EQ(bins[0].fraction, 0.0);
  EXPECT_EQ(bins[1].fraction, 0.0);
  EXPECT_TRUE(std::isnan(bins[2].fraction));
  EXPECT_EQ(bins[2].n_firms, 0u);
}

TEST(Aggregation, IdentityForGroupsOfOne) {
  const auto firms = draw_population(pareto_count(1.2, 1.6), 300, 4);
  RandomStream s(1, StreamTag::Aggregation);
  auto merged = aggregate_firms(firms, 1, s);
  auto key = [](const std::vector<Firm>& v) {
    std::vector<std::vector<double>> k;
    for (const auto& f : v) k.push_back(f.sub_unit_sizes);
    std::sort(k.begin(), k.end());
    return k;
  };
  EXPECT_EQ(key(firms), key(merged));
}

TEST(Aggregation, ConservesSubunits) {
  const auto firms = draw_population(pareto_count(1.2, 1.6), 301, 4);
  RandomStream s(1, StreamTag::Aggregation);
  const auto merged = aggregate_firms(firms, 2, s);
  EXPECT_EQ(merged.size(), 151u);
  std::vector<double> before, after;
  std::size_t k_before = 0, k_after = 0;
  for (const auto& f : firms) {
    before.insert(before.end(), f.sub_unit_sizes.begin(), f.sub_unit_sizes.end());
    k_before += f.count();
  }
  for (const auto& f : merged) {
    after.insert(after.end(), f.sub_unit_sizes.begin(), f.sub_unit_sizes.end());
    k_after += f.count();
  }
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  EXPECT_EQ(before, after);
  EXPECT_EQ(k_before, k_after);
  RandomStream t(1, StreamTag::Aggregation);
  EXPECT_THROW(aggregate_firms(firms, 302, t), DomainError);
  EXPECT_THROW(aggregate_firms(firms, 0, t), DomainError);
}

TEST(ConditionalHhi, SingleUnitIsDegenerate) {
  const auto m = conditional_hhi_moment_mc(fixed(1), 1, 0.7, 100, 3);
  EXPECT_EQ(m.mean, 1.0);
  EXPECT_EQ(m.se, 0.0);
}

TEST(ConditionalHhi, ScalingSlopes) {
  const auto params = fixed(1, 1.5);
  std::vector<double> ks, m1, mh;
  for (int e = 6; e <= 12; e += 2) {
    const auto K = std::uint64_t{1} << e;
    ks.push_back(static_cast<double>(K));
    m1.push_back(conditional_hhi_moment_mc(params, K, 1.0, 4000, 12).mean);
    mh.push_back(conditional_hhi_moment_mc(params, K, 0.5, 4000, 12).mean);
  }
  EXPECT_NEAR(loglog_ols(ks, m1).slope, -0.5, 0.07);
  EXPECT_NEAR(loglog_ols(ks, mh).slope, -1.0 / 3.0, 0.07);
}
