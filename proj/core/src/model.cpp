#include "granular/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "granular/distributions.hpp"
#include "granular/errors.hpp"
#include "granular/parallel.hpp"

namespace granular {

namespace {

// Pairwise sum of f(i) for i in [0, n); same tree shape as pairwise_sum.
template <class F>
double pairwise_reduce(std::size_t begin, std::size_t end, const F& f) {
  constexpr std::size_t kLeaf = 32;
  if (end - begin <= kLeaf) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += f(i);
    return s;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  return pairwise_reduce(begin, mid, f) + pairwise_reduce(mid, end, f);
}

void fill_sizes(const ModelParams& params, std::uint64_t count, RandomStream& stream,
                std::vector<double>& out) {
  out.resize(count);
  const double inv_mu = -1.0 / params.mu;
  for (auto& s : out) s = params.s0 * std::pow(stream.uniform(), inv_mu);
}

}  // namespace

void ModelParams::validate() const {
  if (!(mu > 1.0 && mu < 2.0)) throw DomainError("ModelParams: mu must lie in (1, 2)");
  if (!(s0 > 0.0) || !std::isfinite(s0)) throw DomainError("ModelParams: s0 must be > 0");
  if (!(sigma0 >= 0.0) || !std::isfinite(sigma0))
    throw DomainError("ModelParams: sigma0 must be >= 0");
  if (k_mode == CountMode::Fixed) {
    if (fixed_count < 1) throw DomainError("ModelParams: fixed count must be >= 1");
  } else if (!(alpha > 1.0 && alpha < mu)) {
    throw DomainError("ModelParams: Pareto count mode requires 1 < alpha < mu");
  }
  if (shock_law == ShockLaw::StudentT && !(shock_dof > 2.0))
    throw DomainError("ModelParams: Student-t shocks need dof > 2");
}

double Firm::size() const noexcept { return pairwise_sum(sub_unit_sizes); }

double draw_shock(const ModelParams& params, RandomStream& stream) {
  switch (params.shock_law) {
    case ShockLaw::Gaussian:
      return stream.normal();
    case ShockLaw::Laplace:
      return laplace_sample(stream.uniform());
    case ShockLaw::StudentT:
      return student_t_unit_sample(params.shock_dof, stream);
  }
  return 0.0;
}

std::uint64_t draw_count(const ModelParams& params, RandomStream& stream) {
  if (params.k_mode == CountMode::Fixed) return params.fixed_count;
  const double k = std::floor(std::pow(stream.uniform(), -1.0 / params.alpha));
  if (!(k < static_cast<double>(kMaxSubunitCount))) return kMaxSubunitCount;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(k));
}

Firm draw_firm(const ModelParams& params, RandomStream& stream) {
  params.validate();
  Firm firm;
  fill_sizes(params, draw_count(params, stream), stream, firm.sub_unit_sizes);
  return firm;
}

Firm draw_firm(const ModelParams& params, std::uint64_t seed, std::uint64_t index) {
  RandomStream stream(seed, StreamTag::FirmStructure, index);
  return draw_firm(params, stream);
}

double hhi(std::span<const double> sizes) {
  if (sizes.empty()) throw ContractError("hhi: firm has no sub-units");
  const double total = pairwise_sum(sizes);
  if (!(total > 0.0)) throw ContractError("hhi: firm size must be positive");
  return pairwise_reduce(0, sizes.size(), [&](std::size_t i) {
    const double w = sizes[i] / total;
    return w * w;
  });
}

double hhi(const Firm& firm) { return hhi(firm.sub_unit_sizes); }

double growth_rate(const Firm& firm, std::span<const double> shocks, double sigma0) {
  const auto& s = firm.sub_unit_sizes;
  if (shocks.size() != s.size())
    throw ContractError("growth_rate: need one shock per sub-unit");
  const double total = firm.size();
  const double weighted =
      pairwise_reduce(0, s.size(), [&](std::size_t i) { return s[i] * shocks[i]; });
  return sigma0 * weighted / total;
}

double theoretical_volatility(const Firm& firm, double sigma0) {
  return sigma0 * std::sqrt(hhi(firm));
}

FirmSummary summarize(const Firm& firm) {
  return {firm.size(), hhi(firm), firm.count(), 0.0};
}

FirmSummary summarize_firm(const ModelParams& params, std::uint64_t seed,
                           std::uint64_t index, bool with_growth) {
  thread_local Firm firm;
  thread_local std::vector<double> shocks;
  RandomStream stream(seed, StreamTag::FirmStructure, index);
  fill_sizes(params, draw_count(params, stream), stream, firm.sub_unit_sizes);
  FirmSummary out = summarize(firm);
  if (with_growth) {
    RandomStream shock_stream(seed, StreamTag::SubunitShock, index, 0);
    shocks.resize(firm.count());
    for (auto& e : shocks) e = draw_shock(params, shock_stream);
    out.growth = growth_rate(firm, shocks, params.sigma0);
  }
  return out;
}

std::vector<FirmSummary> summarize_population(const ModelParams& params,
                                              std::size_t n_firms, std::uint64_t seed,
                                              bool with_growth, unsigned threads) {
  params.validate();
  std::vector<FirmSummary> out(n_firms);
  parallel_for(n_firms, threads, [&](std::size_t i) {
    out[i] = summarize_firm(params, seed, i, with_growth);
  });
  return out;
}

std::vector<Firm> draw_population(const ModelParams& params, std::size_t n_firms,
                                  std::uint64_t seed, unsigned threads) {
  params.validate();
  std::vector<Firm> out(n_firms);
  parallel_for(n_firms, threads,
               [&](std::size_t i) { out[i] = draw_firm(params, seed, i); });
  return out;
}

Panel simulate_panel(const ModelParams& params, std::size_t n_firms,
                     std::size_t n_periods, std::uint64_t seed, unsigned threads) {
  params.validate();
  if (n_firms < 1) throw DomainError("simulate_panel: n_firms must be >= 1");
  if (n_periods < 2) throw DomainError("simulate_panel: n_periods must be >= 2");
  if (n_periods > std::numeric_limits<std::uint32_t>::max())
    throw DomainError("simulate_panel: too many periods");

  Panel panel;
  panel.records.resize(n_firms * n_periods);
  std::vector<std::uint64_t> clamps(n_firms, 0);
  parallel_for(n_firms, threads, [&](std::size_t i) {
    Firm firm = draw_firm(params, seed, i);
    auto* row = &panel.records[i * n_periods];
    const auto id = static_cast<std::int64_t>(i);
    row[0] = {id, 0, firm.size()};
    for (std::size_t t = 1; t < n_periods; ++t) {
      RandomStream shocks(seed, StreamTag::SubunitShock, i,
                          static_cast<std::uint32_t>(t - 1));
      for (auto& s : firm.sub_unit_sizes) {
        double mult = 1.0 + params.sigma0 * draw_shock(params, shocks);
        if (mult < kMultiplierFloor) {
          mult = kMultiplierFloor;
          ++clamps[i];
        }
        s *= mult;
      }
      row[t] = {id, static_cast<std::int64_t>(t), firm.size()};
    }
  });
  for (auto c : clamps) panel.clamp_count += c;
  return panel;
}

std::vector<FewSubunitBin> fraction_few_subunits(std::span<const FirmSummary> firms,
                                                 std::span<const double> size_bin_edges,
                                                 std::uint64_t k_threshold) {
  if (size_bin_edges.size() < 2)
    throw DomainError("fraction_few_subunits: need at least two bin edges");
  if (!std::is_sorted(size_bin_edges.begin(), size_bin_edges.end()))
    throw DomainError("fraction_few_subunits: bin edges must be increasing");
  const std::size_t n_bins = size_bin_edges.size() - 1;
  std::vector<std::vector<double>> sizes(n_bins), logs(n_bins);
  std::vector<std::size_t> few(n_bins, 0);
  for (const auto& f : firms) {
    if (f.size < size_bin_edges.front() || f.size > size_bin_edges.back()) continue;
    auto it = std::upper_bound(size_bin_edges.begin(), size_bin_edges.end(), f.size);
    std::size_t b = static_cast<std::size_t>(it - size_bin_edges.begin()) - 1;
    b = std::min(b, n_bins - 1);
    sizes[b].push_back(f.size);
    logs[b].push_back(std::log(f.size));
    if (f.count <= k_threshold) ++few[b];
  }
  std::vector<FewSubunitBin> out(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t n = sizes[b].size();
    out[b].n_firms = n;
    if (n == 0) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out[b].mean_size = out[b].log_mean_size = out[b].fraction = nan;
      continue;
    }
    out[b].mean_size = pairwise_sum(sizes[b]) / static_cast<double>(n);
    out[b].log_mean_size = pairwise_sum(logs[b]) / static_cast<double>(n);
    out[b].fraction = static_cast<double>(few[b]) / static_cast<double>(n);
  }
  return out;
}

std::vector<FewSubunitBin> fraction_few_subunits(std::span<const Firm> firms,
                                                 std::span<const double> size_bin_edges,
                                                 std::uint64_t k_threshold) {
  std::vector<FirmSummary> s;
  s.reserve(firms.size());
  for (const auto& f : firms) s.push_back({f.size(), 1.0, f.count(), 0.0});
  return fraction_few_subunits(s, size_bin_edges, k_threshold);
}

std::vector<Firm> aggregate_firms(std::span<const Firm> firms, std::size_t group_size,
                                  RandomStream& stream) {
  if (group_size < 1) throw DomainError("aggregate_firms: group_size must be >= 1");
  if (group_size > firms.size())
    throw DomainError("aggregate_firms: group_size exceeds population");
  std::vector<std::size_t> order(firms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[stream.below(i)]);
  }
  std::vector<Firm> out;
  out.reserve((firms.size() + group_size - 1) / group_size);
  for (std::size_t start = 0; start < order.size(); start += group_size) {
    const std::size_t stop = std::min(order.size(), start + group_size);
    Firm merged;
    std::size_t total = 0;
    for (std::size_t j = start; j < stop; ++j) total += firms[order[j]].count();
    merged.sub_unit_sizes.reserve(total);
    for (std::size_t j = start; j < stop; ++j) {
      const auto& src = firms[order[j]].sub_unit_sizes;
      merged.sub_unit_sizes.insert(merged.sub_unit_sizes.end(), src.begin(), src.end());
    }
    out.push_back(std::move(merged));
  }
  return out;
}

std::vector<double> sample_hhi(const ModelParams& params, std::uint64_t K,
                               std::size_t n_samples, std::uint64_t seed,
                               unsigned threads) {
  params.validate();
  if (K < 1 || K > std::numeric_limits<std::uint32_t>::max())
    throw DomainError("sample_hhi: K out of range");
  std::vector<double> out(n_samples);
  parallel_for(n_samples, threads, [&](std::size_t j) {
    thread_local std::vector<double> sizes;
    RandomStream stream(seed, StreamTag::FirmStructure, j, static_cast<std::uint32_t>(K));
    fill_sizes(params, K, stream, sizes);
    out[j] = hhi(sizes);
  });
  return out;
}

MomentEstimate conditional_hhi_moment_mc(const ModelParams& params, std::uint64_t K,
                                         double q, std::size_t n_samples,
                                         std::uint64_t seed, unsigned threads) {
  if (!(q > 0.0)) throw DomainError("conditional_hhi_moment_mc: q must be > 0");
  if (n_samples < 2) throw DomainError("conditional_hhi_moment_mc: need >= 2 samples");
  auto h = sample_hhi(params, K, n_samples, seed, threads);
  for (auto& v : h) v = std::pow(v, q);
  const double n = static_cast<double>(n_samples);
  const double mean = pairwise_sum(h) / n;
  for (auto& v : h) v = (v - mean) * (v - mean);
  const double var = pairwise_sum(h) / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace granular
