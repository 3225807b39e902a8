#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "granular/rng.hpp"

namespace granular {

struct BinnedStats {
  std::size_t bin_index = 0;
  double mean_size = 0.0;
  std::size_t n_firms = 0;
  std::vector<double> q_list;
  std::vector<double> moments;  // moments[j] = mean of vol^q_list[j]; NaN if missing

  double moment(double q) const;
};

struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> values;
  double bandwidth = 0.0;
  std::size_t n_samples = 0;
};

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r_squared = 0.0;
};

// bin[i] is the bin of keys[i]. Keys are ranked with a stable sort; the
// first (n mod n_bins) bins receive one extra key.
std::vector<std::size_t> equal_count_bins(std::span<const double> keys, std::size_t n_bins);

// Member indices per bin, in input order.
std::vector<std::vector<std::size_t>> bin_members(std::span<const std::size_t> assignment,
                                                  std::size_t n_bins);

std::vector<BinnedStats> binned_volatility_moments(std::span<const double> sizes,
                                                   std::span<const double> vols,
                                                   std::span<const double> q_list,
                                                   std::size_t n_bins = 25);

ScalingFit loglog_ols(std::span<const double> x, std::span<const double> y);

// Weighted least squares of log y on log x; slope_se uses the weighted
// residual variance with n - 2 degrees of freedom.
ScalingFit loglog_wls(std::span<const double> x, std::span<const double> y,
                      std::span<const double> weights);

// Ordinary least squares on already-transformed coordinates.
ScalingFit linear_ols(std::span<const double> x, std::span<const double> y);

// 1.06 min(sd, IQR / 1.34) n^(-1/5); falls back to sd when the IQR is zero.
double normal_reference_bandwidth(std::span<const double> samples);

DensityEstimate kde_gaussian(std::span<const double> samples, std::span<const double> grid);
DensityEstimate kde_gaussian(std::span<const double> samples, std::span<const double> grid,
                             double bandwidth);

std::vector<double> regular_grid(double lo, double hi, std::size_t n_points);

std::vector<std::vector<double>> rescale_collapse(
    const std::vector<std::vector<double>>& bins);

struct HillEstimate {
  double index = 0.0;
  double se = 0.0;
  std::size_t k = 0;
};

HillEstimate hill_estimator(std::span<const double> samples, double top_fraction);

struct HillProfile {
  std::vector<double> fractions;  // 0.005, 0.01, 0.02, 0.05
  std::vector<HillEstimate> estimates;  // index NaN where too few tail samples
  double relative_spread = 0.0;  // (max - min) / median of available indices
  bool stable = false;           // relative_spread <= 0.15
};

HillProfile hill_profile(std::span<const double> samples);

double ks_distance(std::span<const double> samples,
                   const std::function<double(double)>& cdf);

double ks_two_sample(std::span<const double> a, std::span<const double> b);

struct ModeTest {
  int n_modes = 1;
  double p_value_two_modes = 1.0;  // bootstrap p-value of "at most one mode"
  double critical_bandwidth = 0.0;  // for one mode
};

// Silverman's critical-bandwidth test with a smoothed, variance-corrected
// bootstrap. n_modes is the smallest m whose "at most m modes" hypothesis is
// not rejected at the 5% level (searched up to 6).
ModeTest mode_count(std::span<const double> samples, std::size_t n_bootstrap,
                    RandomStream& stream);

// Number of strict local maxima of the Gaussian KDE evaluated on a regular
// grid of `grid_points` spanning the data +- 3 bandwidths.
int count_kde_modes(std::span<const double> sorted_samples, double bandwidth,
                    std::size_t grid_points = 512);

}  // namespace granular
