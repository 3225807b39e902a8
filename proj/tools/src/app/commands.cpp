#include "granular/app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>

#include "granular/app/experiments.hpp"
#include "granular/app/output.hpp"
#include "granular/csv.hpp"
#include "granular/errors.hpp"
#include "granular/estimation.hpp"
#include "granular/panel.hpp"
#include "granular/rng.hpp"
#include "granular/scaling.hpp"

namespace granular::app {

namespace {

namespace fs = std::filesystem;

void require_file(const RunConfig& config, const std::string& key) {
  const auto& path = config.get(key);
  if (path.empty()) throw ValidationError(key + " is required");
  if (!fs::is_regular_file(path)) throw ValidationError(key + ": no such file '" + path + "'");
}

std::size_t positive(const RunConfig& config, const std::string& key, std::size_t min = 1) {
  const auto v = config.get_uint(key);
  if (v < min) throw ValidationError(key + " must be at least " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

double column_value(const csv::Table& t, std::size_t row, std::size_t col,
                    const std::string& source) {
  const auto v = csv::to_double(t.rows[row][col]);
  if (!v)
    throw InputError(source + ":" + std::to_string(t.line_numbers[row]) + ": '" +
                     t.rows[row][col] + "' is not a number");
  return *v;
}

std::size_t require_column(const csv::Table& t, const std::string& name,
                           const std::string& source) {
  const auto c = t.column(name);
  if (!c) throw InputError(source + ": missing column '" + name + "'");
  return *c;
}

std::string q_label(double q) { return csv::format_double(q); }

// Per-firm panel rows in first-appearance order.
struct FirmSeries {
  std::string id;
  std::map<std::int64_t, double> size_by_period;
};

std::vector<FirmSeries> read_panel(const fs::path& path) {
  const auto t = csv::read(path);
  const auto source = path.string();
  const auto c_id = require_column(t, "firm_id", source);
  const auto c_period = require_column(t, "period", source);
  const auto c_size = require_column(t, "size", source);
  std::vector<FirmSeries> firms;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto where = source + ":" + std::to_string(t.line_numbers[r]);
    const auto period = csv::to_integer(t.rows[r][c_period]);
    if (!period) throw InputError(where + ": period is not an integer");
    const double size = column_value(t, r, c_size, source);
    if (!(size > 0.0) || !std::isfinite(size)) throw InputError(where + ": size must be positive");
    const auto& id = t.rows[r][c_id];
    auto [it, inserted] = index.try_emplace(id, firms.size());
    if (inserted) firms.push_back({id, {}});
    if (!firms[it->second].size_by_period.emplace(*period, size).second)
      throw InputError(where + ": duplicate (firm_id, period)");
  }
  return firms;
}

}  // namespace

int cmd_simulate(const RunConfig& config, std::ostream& log) {
  const auto params = config.model();
  const auto n_firms = positive(config, "simulate.n_firms");
  const auto n_periods = positive(config, "simulate.n_periods");
  const auto threads = config.threads();

  const auto panel = simulate_panel(params, n_firms, n_periods, config.seed(), threads);
  const auto summaries = summarize_population(params, n_firms, config.seed(), false, threads);

  OutputDir out(config.out_dir(), config, "simulate");
  Table rows{{"firm_id", "period", "size"}, {}};
  rows.rows.reserve(panel.records.size());
  for (const auto& r : panel.records) rows.add(r.firm_id, r.period, r.size);
  out.write_csv("panel.csv", rows, {{"clamp_count", panel.clamp_count}});

  Table firms{{"firm_id", "n_subunits", "initial_size", "hhi", "theoretical_volatility"}, {}};
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto& s = summaries[i];
    firms.add(i, s.count, s.size, s.hhi, params.sigma0 * std::sqrt(s.hhi));
  }
  out.write_csv("firms.csv", firms);
  log << "simulate: " << n_firms << " firms x " << n_periods << " periods, "
      << panel.clamp_count << " clamped multipliers\n";
  return kExitOk;
}

int cmd_analyze(const RunConfig& config, std::ostream& log) {
  require_file(config, "analyze.panel");
  const auto lag = static_cast<std::int64_t>(positive(config, "analyze.lag"));
  const auto n_bins = positive(config, "analyze.n_bins", 3);
  const auto q_list = config.get_double_list("analyze.q_list");
  if (q_list.empty()) throw ValidationError("analyze.q_list is empty");
  for (double q : q_list)
    if (!(q > 0.0)) throw ValidationError("analyze.q_list entries must be positive");
  const auto& vol_kind = config.get("analyze.volatility");
  if (vol_kind != "mad" && vol_kind != "sd")
    throw ValidationError("analyze.volatility must be mad or sd");
  const auto min_growth = std::max<std::size_t>(2, config.get_uint("analyze.min_growth"));
  const auto density_bins = config.get_index_list("analyze.density_bins");
  for (auto b : density_bins)
    if (b > n_bins) throw ValidationError("analyze.density_bins entry exceeds analyze.n_bins");
  const auto grid_points = positive(config, "analyze.grid_points", 3);
  const double grid_min = config.get_double("analyze.grid_min");
  const double grid_max = config.get_double("analyze.grid_max");
  if (!(grid_max > grid_min)) throw ValidationError("analyze.grid_max must exceed grid_min");
  const auto n_boot = config.get_uint("analyze.bootstrap");

  const auto firms = read_panel(config.get("analyze.panel"));
  std::vector<std::string> ids;
  std::vector<double> sizes, vols;
  std::vector<std::vector<double>> growth;
  for (const auto& f : firms) {
    std::vector<double> g;
    for (const auto& [p, s] : f.size_by_period) {
      const auto later = f.size_by_period.find(p + lag);
      if (later != f.size_by_period.end()) g.push_back(std::log(later->second / s));
    }
    if (g.size() < min_growth) continue;
    double mean_size = 0.0;
    for (const auto& [p, s] : f.size_by_period) mean_size += s;
    mean_size /= static_cast<double>(f.size_by_period.size());
    ids.push_back(f.id);
    sizes.push_back(mean_size);
    vols.push_back(vol_kind == "mad" ? mad_volatility(g) : sd_volatility(g));
    growth.push_back(std::move(g));
  }
  if (sizes.size() < n_bins)
    throw DomainError("analyze: " + std::to_string(sizes.size()) +
                      " firms with enough growth rates, fewer than the bin count");

  OutputDir out(config.out_dir(), config, "analyze");

  const auto binned = binned_volatility_moments(sizes, vols, q_list, n_bins);
  Table bins{{"bin", "mean_size", "n_firms"}, {}};
  for (double q : q_list) bins.header.push_back("moment_q" + q_label(q));
  for (const auto& b : binned) {
    std::vector<std::string> row{std::to_string(b.bin_index + 1), csv::format_double(b.mean_size),
                                 std::to_string(b.n_firms)};
    for (double m : b.moments) row.push_back(csv::format_double(m));
    bins.rows.push_back(std::move(row));
  }
  out.write_csv("binned.csv", bins);

  const auto profile = power_law_exponent_profile(sizes, vols, q_list, n_bins);
  Table exps{{"q", "slope", "se", "r2"}, {}};
  nlohmann::json exponent_json = nlohmann::json::array();
  for (std::size_t j = 0; j < profile.size(); ++j) {
    const auto& e = profile[j];
    exps.add(e.q, e.fit.slope, e.fit.slope_se, e.fit.r_squared);
    double boot = std::nan("");
    if (n_boot > 1) {
      RandomStream stream(config.seed(), StreamTag::Bootstrap, j);
      boot = bootstrap_slope_se(sizes, vols, e.q, n_bins, n_boot, stream);
    }
    exponent_json.push_back({{"q", e.q},
                             {"slope", number(e.fit.slope)},
                             {"se", number(e.fit.slope_se)},
                             {"bootstrap_se", number(boot)},
                             {"r2", number(e.fit.r_squared)}});
  }
  out.write_csv("exponents.csv", exps);

  // Volatility rescaled by its bin mean.
  const auto assignment = equal_count_bins(sizes, n_bins);
  const auto members = bin_members(assignment, n_bins);
  std::vector<double> rescaled(vols.size());
  std::vector<std::vector<double>> per_bin(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    double mean = 0.0;
    for (auto i : members[b]) mean += vols[i];
    mean /= static_cast<double>(members[b].size());
    for (auto i : members[b]) {
      rescaled[i] = mean > 0.0 ? vols[i] / mean : std::nan("");
      if (std::isfinite(rescaled[i])) per_bin[b].push_back(rescaled[i]);
    }
  }
  Table collapse{{"firm_id", "bin", "mean_size", "rescaled_volatility"}, {}};
  for (std::size_t i = 0; i < ids.size(); ++i)
    collapse.add(ids[i], assignment[i] + 1, sizes[i], rescaled[i]);
  out.write_csv("collapse.csv", collapse);

  std::vector<double> pooled;
  for (const auto& b : per_bin) pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  const double vmax = pooled[static_cast<std::size_t>(0.999 * static_cast<double>(pooled.size() - 1))];
  const auto vgrid = regular_grid(0.0, std::max(vmax, 1e-6), 512);
  Table vdens{{"x"}, {}};
  std::vector<DensityEstimate> vcols;
  for (auto b : density_bins) {
    vdens.header.push_back("bin_" + std::to_string(b));
    if (per_bin[b - 1].size() >= 2 && normal_reference_bandwidth(per_bin[b - 1]) > 0.0) {
      vcols.push_back(kde_gaussian(per_bin[b - 1], vgrid));
    } else {
      vcols.push_back({vgrid, std::vector<double>(vgrid.size(), std::nan("")), 0.0, 0});
    }
  }
  vdens.header.push_back("pooled");
  vcols.push_back(kde_gaussian(pooled, vgrid));
  for (std::size_t i = 0; i < vgrid.size(); ++i) {
    std::vector<std::string> row{csv::format_double(vgrid[i])};
    for (const auto& d : vcols) row.push_back(csv::format_double(d.values[i]));
    vdens.rows.push_back(std::move(row));
  }
  out.write_csv("density_volatility.csv", vdens);

  // Growth rates rescaled homogeneously and firm by firm.
  std::vector<double> all_g;
  for (const auto& g : growth) all_g.insert(all_g.end(), g.begin(), g.end());
  const double g_mean = std::accumulate(all_g.begin(), all_g.end(), 0.0) /
                        static_cast<double>(all_g.size());
  const double g_scale = mad_volatility(all_g);
  std::vector<double> homogeneous, heterogeneous;
  std::size_t loo_missing = 0;
  for (double g : all_g) homogeneous.push_back((g - g_mean) / g_scale);
  for (const auto& g : growth) {
    if (g.size() < 3) {
      loo_missing += g.size();
      continue;
    }
    for (double v : leave_one_out_rescale(g)) {
      if (std::isfinite(v)) {
        heterogeneous.push_back(v);
      } else {
        ++loo_missing;
      }
    }
  }
  const auto ggrid = regular_grid(grid_min, grid_max, grid_points);
  const auto d_hom = kde_gaussian(homogeneous, ggrid);
  std::optional<DensityEstimate> d_het;
  if (heterogeneous.size() >= 2) d_het = kde_gaussian(heterogeneous, ggrid);
  Table gdens{{"x", "homogeneous", "heterogeneous"}, {}};
  for (std::size_t i = 0; i < ggrid.size(); ++i)
    gdens.add(ggrid[i], d_hom.values[i], d_het ? d_het->values[i] : std::nan(""));
  out.write_csv("density_growth.csv", gdens,
                {{"bandwidth_homogeneous", d_hom.bandwidth},
                 {"bandwidth_heterogeneous", number(d_het ? d_het->bandwidth : std::nan(""))},
                 {"leave_one_out_missing", loo_missing}});

  nlohmann::json summary = {{"firms_in_panel", firms.size()},
                            {"firms_used", sizes.size()},
                            {"growth_rates", all_g.size()},
                            {"volatility", vol_kind},
                            {"lag", lag},
                            {"exponents", exponent_json},
                            {"leave_one_out_missing", loo_missing}};
  const auto q1 = std::find_if(profile.begin(), profile.end(),
                               [](const ExponentFit& e) { return e.q == 1.0; });
  if (q1 != profile.end()) {
    summary["beta"] = number(-q1->fit.slope);
    summary["beta_se"] = number(q1->fit.slope_se);
  }
  const auto hill = hill_profile(pooled);
  nlohmann::json hill_json = nlohmann::json::array();
  for (std::size_t i = 0; i < hill.fractions.size(); ++i)
    hill_json.push_back({{"top_fraction", hill.fractions[i]},
                         {"index", number(hill.estimates[i].index)},
                         {"se", number(hill.estimates[i].se)}});
  summary["rescaled_volatility_hill"] = hill_json;
  out.write_json("scaling.json", summary);
  log << "analyze: " << sizes.size() << " firms, " << all_g.size() << " growth rates";
  if (q1 != profile.end()) log << ", beta = " << -q1->fit.slope;
  log << "\n";
  return kExitOk;
}

int cmd_fit(const RunConfig& config, bool strict, std::ostream& log) {
  require_file(config, "fit.input");
  const auto& family = config.get("fit.family");
  if (family != "mig" && family != "gse") throw ValidationError("fit.family must be mig or gse");
  const auto& kind = config.get("fit.input_kind");
  if (kind != "samples" && kind != "density")
    throw ValidationError("fit.input_kind must be samples or density");
  if (family == "mig" && kind == "density")
    throw ValidationError("fit.input_kind = density is only valid for gse");
  const auto init_values = config.get_double_list("fit.init");
  std::optional<MigParams> mig_init;
  std::optional<GseParams> gse_init;
  if (!init_values.empty()) {
    if (family == "mig") {
      if (init_values.size() != 3) throw ValidationError("fit.init needs a,b,m for mig");
      mig_init = MigParams{init_values[0], init_values[1], init_values[2]};
      if (!mig_start_in_bounds(*mig_init) || !(mig_init->a > 0.0) || !(mig_init->b > 0.0))
        throw ValidationError("fit.init lies outside the mig search box");
    } else {
      if (init_values.size() != 5) throw ValidationError("fit.init needs C,u,v,w,z for gse");
      gse_init = GseParams{init_values[0], init_values[1], init_values[2], init_values[3],
                           init_values[4]};
      if (!gse_start_in_bounds(*gse_init))
        throw ValidationError("fit.init lies outside the gse search box");
    }
  }
  const auto grid_points = positive(config, "fit.grid_points", 6);
  const double grid_min = config.get_double("fit.grid_min");
  const double grid_max = config.get_double("fit.grid_max");
  if (family == "gse" && (grid_min > -8.0 || grid_max < 8.0))
    throw ValidationError("fit grid must cover [-8, 8]");

  const fs::path input = config.get("fit.input");
  const auto table = csv::read(input);
  const auto source = input.string();

  FitResult fit;
  Table curve;
  nlohmann::json extra = nlohmann::json::object();
  if (family == "mig") {
    const auto col = require_column(table, config.get("fit.column"), source);
    std::vector<double> samples;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
      samples.push_back(column_value(table, r, col, source));
    fit = fit_mig_mle(samples, mig_init);
    const MigParams p{fit.params[0], fit.params[1], fit.params[2]};
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const auto grid = regular_grid(0.0, sorted[static_cast<std::size_t>(
                                             0.999 * static_cast<double>(sorted.size() - 1))],
                                   512);
    const auto kde = kde_gaussian(samples, grid);
    curve.header = {"x", "kde", "mig_pdf"};
    for (std::size_t i = 0; i < grid.size(); ++i) curve.add(grid[i], kde.values[i], mig_pdf(grid[i], p));
  } else {
    DensityEstimate density;
    if (kind == "samples") {
      const auto col = require_column(table, config.get("fit.column"), source);
      std::vector<double> samples;
      for (std::size_t r = 0; r < table.rows.size(); ++r)
        samples.push_back(column_value(table, r, col, source));
      density = kde_gaussian(samples, regular_grid(grid_min, grid_max, grid_points));
      extra["bandwidth"] = density.bandwidth;
    } else {
      const auto cx = require_column(table, "x", source);
      const auto cd = require_column(table, "density", source);
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        density.grid.push_back(column_value(table, r, cx, source));
        density.values.push_back(column_value(table, r, cd, source));
      }
    }
    fit = fit_gse_nls(density, gse_init);
    const GseParams p{fit.params[0], fit.params[1], fit.params[2], fit.params[3], fit.params[4]};
    extra["gaussian_mass_fraction"] = gaussian_mass_fraction(density, p.w);
    curve.header = {"x", "density", "gse_pdf"};
    for (std::size_t i = 0; i < density.grid.size(); ++i)
      curve.add(density.grid[i], density.values[i], gse_pdf(density.grid[i], p));
  }

  nlohmann::json params = nlohmann::json::object(), se = nlohmann::json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    params[fit.names[i]] = number(fit.params[i]);
    se[fit.names[i]] = fit.standard_errors.empty() ? nlohmann::json(nullptr)
                                                   : number(fit.standard_errors[i]);
  }
  nlohmann::json body = {{"family", family},     {"params", params},
                         {"se", se},             {"objective", number(fit.objective)},
                         {"n_obs", fit.n_obs},   {"converged", fit.converged},
                         {"iterations", fit.iterations}};
  for (auto& [k, v] : extra.items()) body[k] = v;

  OutputDir out(config.out_dir(), config, "fit");
  out.write_json("fit.json", body);
  out.write_csv("fit_curve.csv", curve);
  log << "fit: " << family << (fit.converged ? " converged" : " did NOT converge") << " after "
      << fit.iterations << " iterations, objective " << fit.objective << "\n";
  return strict && !fit.converged ? kExitStrictFail : kExitOk;
}

int cmd_ingest(const RunConfig& config, std::ostream& log) {
  require_file(config, "ingest.input");
  if (!config.get("ingest.deflator").empty()) require_file(config, "ingest.deflator");
  CsvSchema schema{config.get("ingest.firm_id_column"), config.get("ingest.year_column"),
                   config.get("ingest.quarter_column"), config.get("ingest.size_column"),
                   config.get("ingest.fiscal_month_column")};
  const bool normalize = config.get_bool("ingest.normalize");
  const auto min_growth = config.get_uint("ingest.min_growth");
  const bool december = config.get_bool("ingest.fiscal_december_only");
  if (december && schema.fiscal_month.empty())
    throw ValidationError("ingest.fiscal_december_only needs ingest.fiscal_month_column");

  const auto obs = ingest_csv(config.get("ingest.input"), schema);
  std::vector<double> sizes;
  if (config.get("ingest.deflator").empty()) {
    for (const auto& o : obs) sizes.push_back(o.nominal_size);
  } else {
    sizes = deflate(obs, DeflatorSeries::read_csv(config.get("ingest.deflator")));
  }
  if (normalize) sizes = normalize_by_year(obs, sizes);
  const auto growth = annual_log_growth(obs, sizes);
  const auto filtered = filter_firms(growth, obs, min_growth, december);

  std::map<std::string, bool> kept;
  for (const auto& g : filtered.growth) kept[g.firm_id] = true;
  std::vector<double> kept_sizes;
  Table panel{{"firm_id", "period", "size"}, {}};
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!kept.count(obs[i].firm_id)) continue;
    kept_sizes.push_back(sizes[i]);
    panel.add(obs[i].firm_id, static_cast<std::int64_t>(obs[i].year) * 4 + obs[i].quarter - 1,
              sizes[i]);
  }

  OutputDir out(config.out_dir(), config, "ingest");
  Table g{{"firm_id", "year", "quarter", "g"}, {}};
  for (const auto& r : filtered.growth) g.add(r.firm_id, r.year, r.quarter, r.g);
  out.write_csv("growth.csv", g);
  Table ex{{"firm_id", "reason", "n_growth"}, {}};
  std::map<std::string, std::size_t> by_reason;
  for (const auto& e : filtered.exclusions) {
    ex.add(e.firm_id, e.reason, e.n_growth);
    ++by_reason[e.reason];
  }
  out.write_csv("exclusions.csv", ex);
  out.write_csv("panel.csv", panel);
  Table stats{{"variable", "n", "mean", "sd", "min", "max"}, {}};
  if (!kept_sizes.empty()) {
    for (const auto& s : descriptive_stats(kept_sizes, filtered.growth))
      stats.add(s.variable, s.n, s.mean, s.sd, s.min, s.max);
  }
  out.write_csv("stats.csv", stats);
  out.write_json("ingest.json", {{"rows_in", obs.size()},
                                 {"firms_in", filtered.firms_in},
                                 {"firms_retained", filtered.firms_retained},
                                 {"exclusions", by_reason},
                                 {"growth_rates", filtered.growth.size()}});
  log << "ingest: " << obs.size() << " rows, " << filtered.firms_retained << " of "
      << filtered.firms_in << " firms retained\n";
  return kExitOk;
}

int cmd_reproduce(const std::string& experiment_id, const RunConfig& config, bool strict,
                  std::ostream& log) {
  const auto* info = find_experiment(experiment_id);
  if (info == nullptr) {
    std::string ids;
    for (const auto& e : experiment_catalog()) ids += "\n  " + e.id + "  " + e.description;
    throw ValidationError("unknown experiment '" + experiment_id + "'; available:" + ids);
  }
  const double scale = config.get_double("reproduce.scale");
  if (!(scale > 0.0 && scale <= 100.0)) throw ValidationError("reproduce.scale must lie in (0, 100]");
  ExperimentOptions options{config.seed(), config.threads(), scale};

  const auto result = run_experiment(experiment_id, options);
  OutputDir out(config.out_dir() / experiment_id, config, "reproduce " + experiment_id);
  for (const auto& [name, table] : result.tables) out.write_csv(name, table);
  out.write_json("verdict.json", verdict_json(result));
  for (const auto& c : result.checks) log << format_check(c) << "\n";
  log << "reproduce " << experiment_id << ": " << (result.pass() ? "PASS" : "FAIL") << "\n";
  return strict && !result.pass() ? kExitStrictFail : kExitOk;
}

}  // namespace granular::app
