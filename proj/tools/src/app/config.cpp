#include "granular/app/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "granular/csv.hpp"
#include "granular/errors.hpp"

namespace granular::app {

const std::vector<KeyDoc>& documented_keys() {
  static const std::vector<KeyDoc> keys = {
      {"run.seed", "20240501", "master seed for every random stream"},
      {"run.threads", "0", "worker threads; 0 uses the available parallelism"},
      {"run.out_dir", "out", "directory receiving all outputs"},
      {"model.mu", "1.6", "sub-unit size tail exponent, in (1, 2)"},
      {"model.alpha", "1.2", "sub-unit count tail exponent, in (1, mu)"},
      {"model.s0", "1", "minimal sub-unit size"},
      {"model.sigma0", "0.1", "sub-unit shock scale"},
      {"model.count_mode", "pareto", "pareto or fixed"},
      {"model.fixed_count", "1", "sub-units per firm when count_mode = fixed"},
      {"model.shock_law", "gaussian", "gaussian, laplace or student_t"},
      {"model.shock_dof", "5", "Student-t degrees of freedom (> 2)"},
      {"simulate.n_firms", "10000", "firms in the simulated panel"},
      {"simulate.n_periods", "44", "recorded periods per firm, initial state included"},
      {"analyze.panel", "", "panel CSV with columns firm_id,period,size"},
      {"analyze.lag", "4", "growth horizon in periods"},
      {"analyze.n_bins", "25", "equal-count size bins"},
      {"analyze.q_list", "1,2,3,4", "volatility moments to bin and fit"},
      {"analyze.volatility", "mad", "mad (adjusted mean absolute deviation) or sd"},
      {"analyze.min_growth", "2", "minimum growth rates per firm"},
      {"analyze.density_bins", "5,15,25", "1-based bins whose rescaled volatility densities are written"},
      {"analyze.grid_points", "2500", "points of the growth-rate density grid"},
      {"analyze.grid_min", "-8", "lower end of the growth-rate density grid"},
      {"analyze.grid_max", "8", "upper end of the growth-rate density grid"},
      {"analyze.bootstrap", "200", "firm-level bootstrap resamples for the slope s.e."},
      {"fit.family", "mig", "mig or gse"},
      {"fit.input", "", "CSV holding the samples or the density"},
      {"fit.column", "value", "sample column (input_kind = samples)"},
      {"fit.input_kind", "samples", "samples, or density (columns x,density; gse only)"},
      {"fit.init", "", "optional start: a,b,m for mig or C,u,v,w,z for gse"},
      {"fit.grid_points", "2500", "KDE grid points when gse is fitted to samples"},
      {"fit.grid_min", "-8", "KDE grid lower end"},
      {"fit.grid_max", "8", "KDE grid upper end"},
      {"ingest.input", "", "raw quarterly CSV"},
      {"ingest.deflator", "", "optional year,quarter,index CSV"},
      {"ingest.firm_id_column", "firm_id", "input column holding the firm id"},
      {"ingest.year_column", "year", "input column holding the calendar year"},
      {"ingest.quarter_column", "quarter", "input column holding the quarter 1..4"},
      {"ingest.size_column", "size", "input column holding nominal size"},
      {"ingest.fiscal_month_column", "", "input column holding the fiscal year end month"},
      {"ingest.normalize", "true", "divide sizes by the yearly cross-sectional mean"},
      {"ingest.min_growth", "2", "minimum annual growth rates per firm"},
      {"ingest.fiscal_december_only", "false", "keep only firms closing accounts in December"},
      {"reproduce.scale", "1", "multiplier on experiment sample sizes"},
  };
  return keys;
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char c : text + ",") {
    if (c == ',') {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item += c;
    }
  }
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : documented_keys()) values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown config key '" + key + "'");
  it->second = trim(value);
}

void RunConfig::load_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ValidationError("config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ValidationError("config key '" + section + "' outside a section");
    for (const auto& [key, value] : body) set(section + "." + key, value.data());
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ValidationError("override '" + assignment + "' is not section.key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const auto v = csv::to_double(get(key));
  if (!v || !std::isfinite(*v)) throw ValidationError(key + ": expected a number, got '" + get(key) + "'");
  return *v;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const auto v = csv::to_integer(get(key));
  if (!v) throw ValidationError(key + ": expected an integer, got '" + get(key) + "'");
  return *v;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  const std::string& text = get(key);
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ValidationError(key + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get(key))) {
    const auto v = csv::to_double(item);
    if (!v) throw ValidationError(key + ": '" + item + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::size_t> RunConfig::get_index_list(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(get(key))) {
    const auto v = csv::to_integer(item);
    if (!v || *v < 1) throw ValidationError(key + ": '" + item + "' is not a positive integer");
    out.push_back(static_cast<std::size_t>(*v));
  }
  return out;
}

unsigned RunConfig::threads() const {
  const auto t = get_uint("run.threads");
  if (t > 1024) throw ValidationError("run.threads must be at most 1024");
  return static_cast<unsigned>(t);
}

ModelParams RunConfig::model() const {
  ModelParams p;
  p.mu = get_double("model.mu");
  p.alpha = get_double("model.alpha");
  p.s0 = get_double("model.s0");
  p.sigma0 = get_double("model.sigma0");
  const auto& mode = get("model.count_mode");
  if (mode == "pareto") {
    p.k_mode = CountMode::Pareto;
  } else if (mode == "fixed") {
    p.k_mode = CountMode::Fixed;
  } else {
    throw ValidationError("model.count_mode must be pareto or fixed");
  }
  p.fixed_count = get_uint("model.fixed_count");
  const auto& law = get("model.shock_law");
  if (law == "gaussian") {
    p.shock_law = ShockLaw::Gaussian;
  } else if (law == "laplace") {
    p.shock_law = ShockLaw::Laplace;
  } else if (law == "student_t") {
    p.shock_law = ShockLaw::StudentT;
  } else {
    throw ValidationError("model.shock_law must be gaussian, laplace or student_t");
  }
  p.shock_dof = get_double("model.shock_dof");
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  }
  return p;
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [k, v] : values_) {
    if (k == "run.threads" || k == "run.out_dir") continue;
    for (char c : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string RunConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

}  // namespace granular::app
