#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "granular/csv.hpp"
#include "granular/errors.hpp"
#include "granular/model.hpp"
#include "granular/panel.hpp"

using namespace granular;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("granular_panel_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }

  fs::path write(const std::string& name, const std::string& body) const {
    const fs::path p = path_ / name;
    std::ofstream(p) << body;
    return p;
  }

 private:
  fs::path path_;
};

RawObservation obs(const std::string& id, int year, int quarter, double size, int fiscal = 12) {
  return {id, year, quarter, size, fiscal};
}

}  // namespace

TEST(Csv, ParsesQuotedFieldsAndBlankLines) {
  std::istringstream in("a,b,c\n1,\"x,y\",3\n\n\"q\"\"t\",2, 4 \n");
  const auto t = csv::parse(in, "mem");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "x,y");
  EXPECT_EQ(t.rows[1][0], "q\"t");
  EXPECT_EQ(t.rows[1][2], "4");
  EXPECT_EQ(t.line_numbers[1], 4u);
  EXPECT_EQ(*t.column("c"), 2u);
}

TEST(Csv, FieldCountMismatchNamesLine) {
  std::istringstream in("a,b\n1,2\n3\n");
  try {
    csv::parse(in, "mem");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("mem:3"), std::string::npos);
  }
}

TEST(Csv, NumberFormattingRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) {
    EXPECT_EQ(*csv::to_double(csv::format_double(v)), v);
  }
  EXPECT_EQ(csv::format_double(std::nan("")), "nan");
  EXPECT_FALSE(csv::to_double("abc"));
  EXPECT_FALSE(csv::to_double("1.5x"));
  EXPECT_EQ(*csv::to_integer(" 42 "), 42);
  EXPECT_EQ(csv::escape("a,b"), "\"a,b\"");
}

TEST(Ingest, WellFormedFile) {
  TempDir dir;
  const auto p = dir.write("in.csv", "firm_id,year,quarter,size\nf1,2000,1,100\nf1,2000,2,110.5\n");
  const auto o = ingest_csv(p);
  ASSERT_EQ(o.size(), 2u);
  EXPECT_EQ(o[1].firm_id, "f1");
  EXPECT_EQ(o[1].quarter, 2);
  EXPECT_DOUBLE_EQ(o[1].nominal_size, 110.5);
  EXPECT_FALSE(o[0].fiscal_year_end_month.has_value());
}

TEST(Ingest, SchemaMapping) {
  TempDir dir;
  const auto p = dir.write("in.csv", "gvkey,fyear,fqtr,sale,fyr\nA,2001,3,5,12\nB,2001,3,6,6\n");
  CsvSchema schema{"gvkey", "fyear", "fqtr", "sale", "fyr"};
  const auto o = ingest_csv(p, schema);
  ASSERT_EQ(o.size(), 2u);
  EXPECT_EQ(*o[0].fiscal_year_end_month, 12);
  EXPECT_EQ(*o[1].fiscal_year_end_month, 6);
}

TEST(Ingest, ErrorsCarryLocation) {
  TempDir dir;
  auto expect_error = [&](const std::string& body, const std::string& fragment) {
    const auto p = dir.write("bad.csv", body);
    try {
      ingest_csv(p);
      ADD_FAILURE() << "no error for " << body;
    } catch (const InputError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  expect_error("firm_id,year,quarter,size\nf1,2000,1,abc\n", "bad.csv:2");
  expect_error("firm_id,year,quarter,size\nf1,2000,1,1\nf1,2000,1,2\n", "duplicate");
  expect_error("firm_id,year,quarter,size\nf1,2000,1,1\nf1,2000,1,2\n", "bad.csv:3");
  expect_error("firm_id,year,size\nf1,2000,1\n", "missing column 'quarter'");
  expect_error("firm_id,year,quarter,size\nf1,2000,5,1\n", "quarter");
  expect_error("firm_id,year,quarter,size\nf1,2000,1,-3\n", "positive");
  EXPECT_THROW(ingest_csv(dir.write("x", "") / "nope.csv"), InputError);
}

TEST(Deflate, Examples) {
  DeflatorSeries d;
  d.index[{2000, 1}] = 1.0;
  d.index[{2000, 2}] = 0.5;
  const std::vector<RawObservation> o{obs("a", 2000, 1, 100), obs("a", 2000, 2, 100)};
  const auto r = deflate(o, d);
  EXPECT_DOUBLE_EQ(r[0], 100.0);
  EXPECT_DOUBLE_EQ(r[1], 200.0);
  const std::vector<RawObservation> missing{obs("a", 1999, 4, 100)};
  EXPECT_THROW(deflate(missing, d), DomainError);
}

TEST(Deflate, ReadsSeriesFile) {
  TempDir dir;
  const auto p = dir.write("defl.csv", "year,quarter,index\n2000,1,1\n2000,2,1.02\n");
  const auto d = DeflatorSeries::read_csv(p);
  EXPECT_DOUBLE_EQ(d.index.at({2000, 2}), 1.02);
}

TEST(Normalize, Examples) {
  const std::vector<RawObservation> o{obs("a", 2000, 1, 3), obs("b", 2000, 1, 1),
                                      obs("a", 2001, 1, 10), obs("b", 2001, 2, 30),
                                      obs("c", 2001, 3, 20)};
  const auto n = normalize_by_year(o, {3, 1, 10, 30, 20});
  EXPECT_DOUBLE_EQ(n[0], 1.5);
  EXPECT_DOUBLE_EQ(n[1], 0.5);
  EXPECT_NEAR((n[2] + n[3] + n[4]) / 3.0, 1.0, 1e-12);
  EXPECT_NEAR(n[2], 0.5, 1e-15);
}

TEST(Growth, Examples) {
  const std::vector<RawObservation> o{obs("a", 2000, 1, 100), obs("a", 2001, 1, 200),
                                      obs("a", 2000, 2, 50), obs("b", 2000, 1, 7),
                                      obs("b", 2001, 1, 7)};
  const auto g = annual_log_growth(o, {100, 200, 50, 7, 7});
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].firm_id, "a");
  EXPECT_NEAR(g[0].g, std::log(2.0), 1e-15);
  EXPECT_EQ(g[1].firm_id, "b");
  EXPECT_EQ(g[1].g, 0.0);
}

TEST(Growth, NormalizationShiftsByYearlyConstant) {
  auto params = ModelParams{};
  params.k_mode = CountMode::Pareto;
  params.alpha = 1.2;
  params.mu = 1.6;
  params.sigma0 = 0.1;
  const auto panel = simulate_panel(params, 30, 12, 4);
  const auto o = panel_to_observations(panel);
  std::vector<double> raw;
  for (const auto& r : o) raw.push_back(r.nominal_size);
  const auto norm = normalize_by_year(o, raw);
  const auto g_raw = annual_log_growth(o, raw);
  const auto g_norm = annual_log_growth(o, norm);
  ASSERT_EQ(g_raw.size(), g_norm.size());
  std::map<int, double> factor;
  for (std::size_t i = 0; i < o.size(); ++i) factor[o[i].year] = norm[i] / raw[i];
  for (std::size_t i = 0; i < g_raw.size(); ++i) {
    const double shift = std::log(factor[g_raw[i].year + 1]) - std::log(factor[g_raw[i].year]);
    EXPECT_NEAR(g_norm[i].g - g_raw[i].g, shift, 1e-12);
  }
}

TEST(Filter, MinimumCountsAndFiscalFlag) {
  std::vector<RawObservation> o;
  std::vector<GrowthRecord> g;
  for (int q = 0; q < 30; ++q) g.push_back({"long", 2000 + q / 4, q % 4 + 1, 0.01});
  for (int q = 0; q < 5; ++q) g.push_back({"mid", 2000 + q / 4, q % 4 + 1, 0.01});
  g.push_back({"short", 2000, 1, 0.01});
  o.push_back(obs("long", 2000, 1, 1));
  o.push_back(obs("mid", 2000, 1, 1, 6));
  o.push_back(obs("short", 2000, 1, 1));
  o.push_back({"nofy", 2000, 1, 1.0, std::nullopt});
  for (int q = 0; q < 3; ++q) g.push_back({"nofy", 2000, q + 1, 0.0});

  const auto a = filter_firms(g, o, 2, false);
  EXPECT_EQ(a.firms_in, 4u);
  EXPECT_EQ(a.firms_retained, 3u);
  EXPECT_EQ(a.firms_in, a.firms_retained + a.exclusions.size());
  EXPECT_EQ(a.exclusions[0].firm_id, "short");

  const auto b = filter_firms(g, o, 20, false);
  EXPECT_EQ(b.firms_retained, 1u);
  EXPECT_LE(b.firms_retained, a.firms_retained);

  const auto c = filter_firms(g, o, 2, true);
  EXPECT_EQ(c.firms_retained, 1u);
  EXPECT_EQ(c.firms_in, c.firms_retained + c.exclusions.size());
  std::size_t fiscal = 0;
  for (const auto& e : c.exclusions) fiscal += e.reason == "fiscal_year_not_december";
  EXPECT_EQ(fiscal, 2u);
}

TEST(Descriptive, Examples) {
  const std::vector<GrowthRecord> g{{"a", 2000, 1, 0.0}};
  const auto rows = descriptive_stats({1.0, 1.0}, g);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].variable, "size");
  EXPECT_DOUBLE_EQ(rows[0].mean, 1.0);
  EXPECT_DOUBLE_EQ(rows[0].sd, 0.0);
  EXPECT_EQ(rows[0].n, 2u);
}

TEST(Descriptive, SimulatedPanelGrowthCount) {
  ModelParams params;
  params.k_mode = CountMode::Pareto;
  params.alpha = 1.2;
  params.mu = 1.6;
  const std::size_t periods = 24;
  const auto panel = simulate_panel(params, 50, periods, 9);
  const auto o = panel_to_observations(panel);
  std::vector<double> sizes;
  for (const auto& r : o) sizes.push_back(r.nominal_size);
  const auto g = annual_log_growth(o, sizes);
  const auto rows = descriptive_stats(sizes, g);
  EXPECT_EQ(rows[3].variable, "growth_count");
  EXPECT_DOUBLE_EQ(rows[3].mean, static_cast<double>(periods - 4));
}
