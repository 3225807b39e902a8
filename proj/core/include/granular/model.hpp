#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "granular/rng.hpp"

namespace granular {

enum class CountMode { Fixed, Pareto };
enum class ShockLaw { Gaussian, Laplace, StudentT };

struct ModelParams {
  double mu = 1.5;      // sub-unit size tail
  double alpha = 1.2;   // sub-unit count tail (Pareto count mode only)
  double s0 = 1.0;      // minimal sub-unit size
  double sigma0 = 0.1;  // sub-unit shock scale
  CountMode k_mode = CountMode::Fixed;
  std::uint64_t fixed_count = 1;
  ShockLaw shock_law = ShockLaw::Gaussian;
  double shock_dof = 5.0;  // Student-t only

  void validate() const;
};

// Sub-unit counts drawn in Pareto mode are capped here to bound memory; the
// probability of reaching the cap is below 1e-6 per firm for alpha >= 1.
inline constexpr std::uint64_t kMaxSubunitCount = 100'000'000;

struct Firm {
  std::vector<double> sub_unit_sizes;

  std::size_t count() const noexcept { return sub_unit_sizes.size(); }
  double size() const noexcept;
};

struct PanelRecord {
  std::int64_t firm_id = 0;
  std::int64_t period = 0;
  double size = 0.0;
};

struct Panel {
  std::vector<PanelRecord> records;  // sorted by (firm_id, period)
  std::uint64_t clamp_count = 0;     // multipliers floored at kMultiplierFloor
};

inline constexpr double kMultiplierFloor = 1e-6;

// Compact per-firm quantities for large populations.
struct FirmSummary {
  double size = 0.0;
  double hhi = 1.0;
  std::uint64_t count = 0;
  double growth = 0.0;  // one-period growth rate; zero unless requested
};

// Unit-variance shock of the configured law.
double draw_shock(const ModelParams& params, RandomStream& stream);

// Sub-unit count: fixed, or floor of a Pareto(1, alpha) draw so that
// P(K >= k) = k^-alpha for integer k.
std::uint64_t draw_count(const ModelParams& params, RandomStream& stream);

Firm draw_firm(const ModelParams& params, RandomStream& stream);

// Firm `index` of the population keyed by `seed`: the structure stream is
// (seed, FirmStructure, index) and the period-t shocks come from
// (seed, SubunitShock, index, t), one draw per sub-unit in order.
Firm draw_firm(const ModelParams& params, std::uint64_t seed, std::uint64_t index);

double hhi(const Firm& firm);
double hhi(std::span<const double> sizes);

double growth_rate(const Firm& firm, std::span<const double> shocks, double sigma0);

double theoretical_volatility(const Firm& firm, double sigma0);

// Same draws as draw_firm(params, seed, index) without materializing the
// sub-unit vector; with_growth adds the period-0 growth rate.
FirmSummary summarize_firm(const ModelParams& params, std::uint64_t seed,
                           std::uint64_t index, bool with_growth);

std::vector<FirmSummary> summarize_population(const ModelParams& params,
                                              std::size_t n_firms, std::uint64_t seed,
                                              bool with_growth, unsigned threads = 0);

std::vector<Firm> draw_population(const ModelParams& params, std::size_t n_firms,
                                  std::uint64_t seed, unsigned threads = 0);

FirmSummary summarize(const Firm& firm);

// Period 0 holds the initial sizes; each later period applies
// s <- max(1 + sigma0 eta, floor) * s to every sub-unit.
Panel simulate_panel(const ModelParams& params, std::size_t n_firms,
                     std::size_t n_periods, std::uint64_t seed, unsigned threads = 0);

struct FewSubunitBin {
  double mean_size = 0.0;      // arithmetic mean of S in the bin
  double log_mean_size = 0.0;  // mean of log S in the bin
  std::size_t n_firms = 0;
  double fraction = 0.0;       // NaN when the bin is empty
};

// Bins are [edges[i], edges[i+1]); the last bin is closed on the right.
std::vector<FewSubunitBin> fraction_few_subunits(std::span<const FirmSummary> firms,
                                                 std::span<const double> size_bin_edges,
                                                 std::uint64_t k_threshold);
std::vector<FewSubunitBin> fraction_few_subunits(std::span<const Firm> firms,
                                                 std::span<const double> size_bin_edges,
                                                 std::uint64_t k_threshold);

// Random partition into groups of group_size (Fisher-Yates on the firm
// order); when the population is not a multiple of group_size the last group
// keeps the remainder so no sub-unit is lost.
std::vector<Firm> aggregate_firms(std::span<const Firm> firms, std::size_t group_size,
                                  RandomStream& stream);

// H values of n_samples firms with exactly K sub-units, sample j drawn from
// (seed, FirmStructure, j, K).
std::vector<double> sample_hhi(const ModelParams& params, std::uint64_t K,
                               std::size_t n_samples, std::uint64_t seed,
                               unsigned threads = 0);

struct MomentEstimate {
  double mean = 0.0;
  double se = 0.0;
};

MomentEstimate conditional_hhi_moment_mc(const ModelParams& params, std::uint64_t K,
                                         double q, std::size_t n_samples,
                                         std::uint64_t seed, unsigned threads = 0);

}  // namespace granular
