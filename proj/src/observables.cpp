#include "dnqs/observables.hpp"

#include <omp.h>

#include <cmath>

#include "dnqs/vmc.hpp"
#include "dnqs/wavefunction.hpp"

namespace dnqs::observables {

double chord_length(int n_sites, int r) {
  if (n_sites < 1) throw InvalidInputError("chord_length: n_sites < 1");
  if (r < 0 || r > n_sites)
    throw InvalidInputError("chord_length: r = " + std::to_string(r) +
                            " outside [0, " + std::to_string(n_sites) + "]");
  const int rr = std::min(r, n_sites - r);
  return n_sites / M_PI * std::sin(M_PI * rr / n_sites);
}

CorrelationSeries measure_correlations(const ModelParams& params, int n_sites,
                                       int n_samples, std::uint64_t seed,
                                       std::uint64_t stream_base) {
  if (n_samples < 100) throw ConfigError("measure_correlations: n_samples must be >= 100");
  const int i0 = std::max(1, n_sites / 4) - 1;  // 0-based reference site
  const int r_max = n_sites / 2;
  if (i0 + r_max >= n_sites) throw ConfigError("measure_correlations: chain too short");

  // per-sample spin at the reference site and at each i+r
  Vector a(n_samples);
  numerics::Matrix b(n_samples, r_max);

  struct Block {
    int begin, count;
  };
  std::vector<Block> blocks;
  for (int at = 0; at < n_samples; at += vmc::kEvalBlock)
    blocks.push_back({at, std::min(vmc::kEvalBlock, n_samples - at)});

#pragma omp parallel for schedule(dynamic)
  for (size_t bl = 0; bl < blocks.size(); ++bl) {
    auto batch = wavefunction::sample_batch(params, n_sites, blocks[bl].count, seed,
                                            stream_base + blocks[bl].begin, nullptr);
    for (int k = 0; k < blocks[bl].count; ++k) {
      a(blocks[bl].begin + k) = batch.configs(i0, k);
      for (int r = 1; r <= r_max; ++r)
        b(blocks[bl].begin + k, r - 1) = batch.configs(i0 + r, k);
    }
  }

  CorrelationSeries series;
  series.n_sites = n_sites;
  series.ref_site = i0 + 1;

  const double m = n_samples;
  const double sa = a.sum();
  for (int r = 1; r <= r_max; ++r) {
    const auto bc = b.col(r - 1);
    const double sb = bc.sum();
    const double sab = a.dot(bc);

    CorrelationPoint pt;
    pt.r = r;
    pt.chord = chord_length(n_sites, r);
    pt.value = sab / m - (sa / m) * (sb / m);

    // delete-1 jackknife of the connected estimator
    const double m1 = m - 1.0;
    Vector rep(n_samples);
    for (int k = 0; k < n_samples; ++k) {
      const double ra = sa - a(k), rb = sb - bc(k), rab = sab - a(k) * bc(k);
      rep(k) = rab / m1 - (ra / m1) * (rb / m1);
    }
    const double rmean = rep.mean();
    pt.stderr = std::sqrt((m1 / m) * (rep.array() - rmean).square().sum());
    series.points.push_back(pt);
  }
  return series;
}

PowerLawFit fit_power_law(const CorrelationSeries& series, FitWindow window) {
  const int n = series.n_sites;
  std::vector<double> xs, ys;
  int excluded = 0;
  for (const auto& pt : series.points) {
    bool in_window;
    if (window == FitWindow::SiteIndices)
      // i + r in [N/4, 3N/4] with i = N/4 means r in [0, N/2]; drop r < 2
      in_window = pt.r >= 2;
    else
      in_window = pt.r >= n / 4;
    if (!in_window) continue;
    if (pt.value <= 0.0) {
      ++excluded;
      continue;
    }
    xs.push_back(std::log(pt.chord));
    ys.push_back(std::log(pt.value));
  }
  if (xs.size() < 3)
    throw FitError("fit_power_law: only " + std::to_string(xs.size()) +
                       " usable points (" + std::to_string(excluded) +
                       " nonpositive values excluded)",
                   excluded);

  const auto fit = numerics::linear_fit(
      Eigen::Map<const Vector>(xs.data(), xs.size()),
      Eigen::Map<const Vector>(ys.data(), ys.size()));

  PowerLawFit out;
  out.eta = -fit.slope;
  out.eta_stderr = fit.slope_stderr;
  out.intercept = fit.intercept;
  out.r2 = fit.r2;
  out.excluded_points = excluded;
  out.zero_variance = fit.zero_variance;
  return out;
}

}  // namespace dnqs::observables
