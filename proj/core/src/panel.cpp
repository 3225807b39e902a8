#include "granular/panel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "granular/csv.hpp"
#include "granular/errors.hpp"
#include "granular/estimation.hpp"
#include "granular/parallel.hpp"

namespace granular {

namespace {

std::size_t require_column(const csv::Table& t, const std::string& name,
                           const std::filesystem::path& path) {
  auto c = t.column(name);
  if (!c) throw InputError(path.string() + ": missing column '" + name + "'");
  return *c;
}

long long quarter_index(int year, int quarter) {
  return static_cast<long long>(year) * 4 + (quarter - 1);
}

StatRow summarize_row(const std::string& name, std::vector<double> v) {
  StatRow row;
  row.variable = name;
  row.n = v.size();
  if (v.empty()) {
    row.mean = row.sd = row.min = row.max = std::nan("");
    return row;
  }
  const double n = static_cast<double>(v.size());
  row.mean = pairwise_sum(v) / n;
  row.min = *std::min_element(v.begin(), v.end());
  row.max = *std::max_element(v.begin(), v.end());
  for (auto& x : v) x = (x - row.mean) * (x - row.mean);
  row.sd = v.size() > 1 ? std::sqrt(pairwise_sum(v) / (n - 1.0)) : 0.0;
  return row;
}

}  // namespace

std::vector<RawObservation> ingest_csv(const std::filesystem::path& path,
                                       const CsvSchema& schema) {
  const csv::Table t = csv::read(path);
  const auto c_id = require_column(t, schema.firm_id, path);
  const auto c_year = require_column(t, schema.year, path);
  const auto c_quarter = require_column(t, schema.quarter, path);
  const auto c_size = require_column(t, schema.size, path);
  std::optional<std::size_t> c_fiscal;
  if (!schema.fiscal_month.empty()) c_fiscal = require_column(t, schema.fiscal_month, path);

  std::vector<RawObservation> out;
  out.reserve(t.rows.size());
  std::map<std::tuple<std::string, int, int>, std::size_t> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path.string() + ":" + std::to_string(t.line_numbers[r]);
    RawObservation o;
    o.firm_id = row[c_id];
    if (o.firm_id.empty()) throw InputError(where + ": empty firm id");
    const auto year = csv::to_integer(row[c_year]);
    if (!year) throw InputError(where + ": year '" + row[c_year] + "' is not an integer");
    const auto quarter = csv::to_integer(row[c_quarter]);
    if (!quarter || *quarter < 1 || *quarter > 4)
      throw InputError(where + ": quarter '" + row[c_quarter] + "' is not in 1..4");
    const auto size = csv::to_double(row[c_size]);
    if (!size) throw InputError(where + ": size '" + row[c_size] + "' is not numeric");
    if (!(*size > 0.0) || !std::isfinite(*size))
      throw InputError(where + ": size must be positive");
    o.year = static_cast<int>(*year);
    o.quarter = static_cast<int>(*quarter);
    o.nominal_size = *size;
    if (c_fiscal && !row[*c_fiscal].empty()) {
      const auto m = csv::to_integer(row[*c_fiscal]);
      if (!m || *m < 1 || *m > 12)
        throw InputError(where + ": fiscal year-end month '" + row[*c_fiscal] +
                         "' is not in 1..12");
      o.fiscal_year_end_month = static_cast<int>(*m);
    }
    const auto key = std::make_tuple(o.firm_id, o.year, o.quarter);
    if (auto it = seen.find(key); it != seen.end()) {
      throw InputError(where + ": duplicate key (" + o.firm_id + ", " +
                       std::to_string(o.year) + ", Q" + std::to_string(o.quarter) +
                       "), first seen on line " + std::to_string(t.line_numbers[it->second]));
    }
    seen.emplace(key, r);
    out.push_back(std::move(o));
  }
  return out;
}

DeflatorSeries DeflatorSeries::read_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const auto c_year = require_column(t, "year", path);
  const auto c_quarter = require_column(t, "quarter", path);
  const auto c_index = require_column(t, "index", path);
  DeflatorSeries d;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path.string() + ":" + std::to_string(t.line_numbers[r]);
    const auto y = csv::to_integer(t.rows[r][c_year]);
    const auto q = csv::to_integer(t.rows[r][c_quarter]);
    const auto v = csv::to_double(t.rows[r][c_index]);
    if (!y || !q || *q < 1 || *q > 4) throw InputError(where + ": bad year or quarter");
    if (!v || !(*v > 0.0)) throw InputError(where + ": index must be a positive number");
    if (!d.index.emplace(std::make_pair(static_cast<int>(*y), static_cast<int>(*q)), *v).second)
      throw InputError(where + ": duplicate deflator period");
  }
  return d;
}

std::vector<double> deflate(const std::vector<RawObservation>& obs,
                            const DeflatorSeries& deflator) {
  std::vector<double> out(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    auto it = deflator.index.find({obs[i].year, obs[i].quarter});
    if (it == deflator.index.end()) {
      throw DomainError("deflate: no deflator for " + std::to_string(obs[i].year) + "Q" +
                        std::to_string(obs[i].quarter));
    }
    out[i] = obs[i].nominal_size / it->second;
  }
  return out;
}

std::vector<double> normalize_by_year(const std::vector<RawObservation>& obs,
                                      const std::vector<double>& sizes) {
  if (obs.size() != sizes.size()) throw ContractError("normalize_by_year: length mismatch");
  std::map<int, std::vector<std::size_t>> by_year;
  for (std::size_t i = 0; i < obs.size(); ++i) by_year[obs[i].year].push_back(i);
  std::vector<double> out(sizes.size());
  std::vector<double> buf;
  for (const auto& [year, idx] : by_year) {
    buf.clear();
    for (auto i : idx) buf.push_back(sizes[i]);
    const double total = pairwise_sum(buf);
    if (!(total > 0.0)) throw DomainError("normalize_by_year: non-positive yearly total");
    const double factor = static_cast<double>(idx.size()) / total;
    for (auto i : idx) out[i] = sizes[i] * factor;
  }
  return out;
}

std::vector<GrowthRecord> annual_log_growth(const std::vector<RawObservation>& obs,
                                            const std::vector<double>& sizes) {
  if (obs.size() != sizes.size()) throw ContractError("annual_log_growth: length mismatch");
  std::vector<std::size_t> order(obs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Firms keep their first-appearance order; periods ascend within a firm.
  std::unordered_map<std::string, std::size_t> first_seen;
  for (std::size_t i = 0; i < obs.size(); ++i) first_seen.emplace(obs[i].firm_id, i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto fa = first_seen.at(obs[a].firm_id);
    const auto fb = first_seen.at(obs[b].firm_id);
    if (fa != fb) return fa < fb;
    return quarter_index(obs[a].year, obs[a].quarter) < quarter_index(obs[b].year, obs[b].quarter);
  });

  std::vector<GrowthRecord> out;
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start;
    while (end < order.size() && obs[order[end]].firm_id == obs[order[start]].firm_id) ++end;
    std::map<long long, std::size_t> by_period;
    for (std::size_t j = start; j < end; ++j)
      by_period.emplace(quarter_index(obs[order[j]].year, obs[order[j]].quarter), order[j]);
    for (const auto& [period, i] : by_period) {
      auto later = by_period.find(period + 4);
      if (later == by_period.end()) continue;
      if (!(sizes[i] > 0.0) || !(sizes[later->second] > 0.0))
        throw DomainError("annual_log_growth: sizes must be positive");
      out.push_back({obs[i].firm_id, obs[i].year, obs[i].quarter,
                     std::log(sizes[later->second]) - std::log(sizes[i])});
    }
    start = end;
  }
  return out;
}

std::vector<FirmGrowthSeries> group_by_firm(const std::vector<GrowthRecord>& growth) {
  std::vector<FirmGrowthSeries> out;
  std::unordered_map<std::string, std::size_t> where;
  for (const auto& g : growth) {
    auto [it, inserted] = where.emplace(g.firm_id, out.size());
    if (inserted) out.push_back({g.firm_id, {}});
    out[it->second].g.push_back(g.g);
  }
  return out;
}

FilterResult filter_firms(const std::vector<GrowthRecord>& growth,
                          const std::vector<RawObservation>& obs,
                          std::size_t min_growth_obs, bool fiscal_december_only) {
  FilterResult res;
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& g : growth) ++counts[g.firm_id];

  std::vector<std::string> firms;
  std::unordered_map<std::string, bool> december;
  for (const auto& o : obs) {
    auto [it, inserted] = december.emplace(o.firm_id, true);
    if (inserted) firms.push_back(o.firm_id);
    if (o.fiscal_year_end_month.value_or(0) != 12) it->second = false;
  }
  for (const auto& g : growth) {
    if (december.emplace(g.firm_id, false).second) firms.push_back(g.firm_id);
  }
  res.firms_in = firms.size();

  std::set<std::string> keep;
  for (const auto& f : firms) {
    const std::size_t n = counts.count(f) ? counts.at(f) : 0;
    if (n < min_growth_obs) {
      res.exclusions.push_back({f, "too_few_growth_rates", n});
    } else if (fiscal_december_only && !december.at(f)) {
      res.exclusions.push_back({f, "fiscal_year_not_december", n});
    } else {
      keep.insert(f);
    }
  }
  res.firms_retained = keep.size();
  for (const auto& g : growth)
    if (keep.count(g.firm_id)) res.growth.push_back(g);
  return res;
}

std::vector<StatRow> descriptive_stats(const std::vector<double>& sizes,
                                       const std::vector<GrowthRecord>& growth) {
  std::vector<double> g;
  g.reserve(growth.size());
  for (const auto& r : growth) g.push_back(r.g);
  std::vector<double> vols, counts;
  for (const auto& f : group_by_firm(growth)) {
    counts.push_back(static_cast<double>(f.g.size()));
    if (f.g.size() >= 2) vols.push_back(mad_volatility(f.g));
  }
  return {summarize_row("size", sizes), summarize_row("growth_rate", std::move(g)),
          summarize_row("volatility", std::move(vols)),
          summarize_row("growth_count", std::move(counts))};
}

std::vector<RawObservation> panel_to_observations(const Panel& panel, int base_year) {
  std::vector<RawObservation> out;
  out.reserve(panel.records.size());
  for (const auto& r : panel.records) {
    RawObservation o;
    o.firm_id = std::to_string(r.firm_id);
    o.year = base_year + static_cast<int>(r.period / 4);
    o.quarter = static_cast<int>(r.period % 4) + 1;
    o.nominal_size = r.size;
    o.fiscal_year_end_month = 12;
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace granular
