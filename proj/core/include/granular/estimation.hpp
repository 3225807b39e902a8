#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "granular/distributions.hpp"
#include "granular/rng.hpp"
#include "granular/scaling.hpp"

namespace granular {

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> standard_errors;  // empty unless converged
  double objective = 0.0;               // negative log-likelihood or SSE
  std::size_t n_obs = 0;
  bool converged = false;
  int iterations = 0;

  double param(const std::string& name) const;
  double se(const std::string& name) const;
};

// sqrt(pi/2) times the mean absolute deviation about the sample mean.
double mad_volatility(std::span<const double> growth_rates);

// Sample standard deviation with denominator T - 1.
double sd_volatility(std::span<const double> growth_rates);

// Element t is (g_t - mean without t) / (adjusted MAD without t); NaN where
// that MAD vanishes. O(T log T) via sorted prefix sums.
std::vector<double> leave_one_out_rescale(std::span<const double> series);

// Method of moments on 1/(x + m0) with m0 = half the sample minimum.
MigParams mig_initial_guess(std::span<const double> samples);

// Search boxes: a in [1e-8, 1e8], b in [1e-6, 1e4], m in [0, 1e8] for MIG;
// C, u, w >= 1e-6 and z in [0, 2] for GSE. Starts outside them are rejected.
bool mig_start_in_bounds(const MigParams& p);
bool gse_start_in_bounds(const GseParams& p);

// Maximum likelihood by projected BFGS; parameters named a, b, m. Without an
// explicit start, the documented moment guess competes with moment matches
// at m0 = {0.05, 0.1, 0.2, 0.5, 1, 2} x median and the best likelihood wins.
FitResult fit_mig_mle(std::span<const double> samples,
                      std::optional<MigParams> init = std::nullopt);

double mig_negative_log_likelihood(std::span<const double> samples, const MigParams& p);

// KDE mode for v, adjusted MAD of the density for u, w = 2u, z = 1, C = peak.
GseParams gse_initial_guess(const DensityEstimate& density);

// Least squares of gse_pdf against the density on its grid points inside
// [-8, 8]; parameters named C, u, v, w, z. Without an explicit start, a
// second start with u set to the half-height width is also run and the
// lower-SSE solution kept.
FitResult fit_gse_nls(const DensityEstimate& density,
                      std::optional<GseParams> init = std::nullopt);

// Trapezoid mass of the density on [-w, w], clipped to [0, 1].
double gaussian_mass_fraction(const DensityEstimate& density, double w);

struct ExponentFit {
  double q = 0.0;
  ScalingFit fit;
};

std::vector<ExponentFit> power_law_exponent_profile(std::span<const double> sizes,
                                                    std::span<const double> vols,
                                                    std::span<const double> q_list,
                                                    std::size_t n_bins = 25);

// Standard deviation of the binned log-log slope over firm-level bootstrap
// resamples; a diagnostic beside the OLS standard error.
double bootstrap_slope_se(std::span<const double> sizes, std::span<const double> vols,
                          double q, std::size_t n_bins, std::size_t n_bootstrap,
                          RandomStream& stream);

}  // namespace granular
