#pragma once

#include <cstdint>
#include <vector>

#include "dnqs/rnn.hpp"

namespace dnqs::observables {

using numerics::Vector;
using rnn::ModelParams;

struct CorrelationPoint {
  int r = 0;
  double chord = 0.0;
  double value = 0.0;   // connected correlator C(r)
  double stderr = 0.0;  // delete-1 jackknife over samples
};

struct CorrelationSeries {
  int n_sites = 0;
  int ref_site = 0;  // 1-based reference site i = N/4
  std::vector<CorrelationPoint> points;  // r = 1..N/2
};

// Periodic-boundary chord distance (N/pi) sin(pi r / N); computed through
// min(r, N-r) so the r <-> N-r symmetry is exact.
double chord_length(int n_sites, int r);

// Monte Carlo C(r) = <s_i s_{i+r}> - <s_i><s_{i+r}> at i = N/4 for
// r = 1..N/2, both expectations from the same sample set.
CorrelationSeries measure_correlations(const ModelParams& params, int n_sites,
                                       int n_samples, std::uint64_t seed,
                                       std::uint64_t stream_base);

// Two readings of the fitting window "N/4 to 3N/4": absolute site indices
// i+r in [N/4, 3N/4] (default; equivalently r <= N/2 with r < 2 dropped), or
// lag values r in [N/4, N/2].
enum class FitWindow { SiteIndices, Lags };

struct PowerLawFit {
  double eta = 0.0;
  double eta_stderr = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int excluded_points = 0;  // nonpositive C(r) dropped from the log fit
  bool zero_variance = false;
};

// Least squares of log C against log L_r; eta = -slope. Points with C <= 0
// are excluded and counted, never clamped. Fewer than 3 usable points raises
// FitError.
PowerLawFit fit_power_law(const CorrelationSeries& series,
                          FitWindow window = FitWindow::SiteIndices);

}  // namespace dnqs::observables
