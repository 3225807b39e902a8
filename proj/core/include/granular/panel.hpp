#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "granular/model.hpp"

namespace granular {

struct RawObservation {
  std::string firm_id;
  int year = 0;
  int quarter = 1;  // 1..4
  double nominal_size = 0.0;
  std::optional<int> fiscal_year_end_month;
};

// Column names in the input file. An empty fiscal_month disables that column.
struct CsvSchema {
  std::string firm_id = "firm_id";
  std::string year = "year";
  std::string quarter = "quarter";
  std::string size = "size";
  std::string fiscal_month;
};

// Rows come back in file order. Errors name the file and line.
std::vector<RawObservation> ingest_csv(const std::filesystem::path& path,
                                       const CsvSchema& schema = {});

struct DeflatorSeries {
  std::map<std::pair<int, int>, double> index;  // (year, quarter) -> level

  // Reads a `year,quarter,index` file.
  static DeflatorSeries read_csv(const std::filesystem::path& path);
};

// Real size = nominal / deflator index, per observation.
std::vector<double> deflate(const std::vector<RawObservation>& obs,
                            const DeflatorSeries& deflator);

// Within each year, size * N_y / (sum of sizes in that year).
std::vector<double> normalize_by_year(const std::vector<RawObservation>& obs,
                                      const std::vector<double>& sizes);

struct GrowthRecord {
  std::string firm_id;
  int year = 0;
  int quarter = 1;
  double g = 0.0;
};

// ln S(t+4) - ln S(t) for every observation with a same-firm observation
// exactly four quarters later; ordered by firm, then period.
std::vector<GrowthRecord> annual_log_growth(const std::vector<RawObservation>& obs,
                                            const std::vector<double>& sizes);

struct Exclusion {
  std::string firm_id;
  std::string reason;  // "too_few_growth_rates" or "fiscal_year_not_december"
  std::size_t n_growth = 0;
};

struct FilterResult {
  std::vector<GrowthRecord> growth;
  std::vector<Exclusion> exclusions;
  std::size_t firms_in = 0;
  std::size_t firms_retained = 0;
};

// Keeps firms with at least min_growth_obs growth rates and, when
// fiscal_december_only is set, whose fiscal year ends in December on every
// observation. Firms failing both are logged once, under the first reason.
FilterResult filter_firms(const std::vector<GrowthRecord>& growth,
                          const std::vector<RawObservation>& obs,
                          std::size_t min_growth_obs, bool fiscal_december_only);

struct StatRow {
  std::string variable;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Rows: size, growth_rate, volatility (adjusted MAD per firm), growth_count.
std::vector<StatRow> descriptive_stats(const std::vector<double>& sizes,
                                       const std::vector<GrowthRecord>& growth);

struct FirmGrowthSeries {
  std::string firm_id;
  std::vector<double> g;
};

// Growth records grouped per firm in first-appearance order.
std::vector<FirmGrowthSeries> group_by_firm(const std::vector<GrowthRecord>& growth);

// Simulated panel as quarterly observations: period p maps to year
// base_year + p / 4 and quarter p % 4 + 1, fiscal year ending in December.
std::vector<RawObservation> panel_to_observations(const Panel& panel, int base_year = 2000);

}  // namespace granular
