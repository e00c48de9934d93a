#include "dnqs/theory.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>

namespace dnqs::theory {

void LinearModelSpec::validate() const {
  if (lambdas.size() < 1) throw ConfigError("linear model: need at least one mode");
  if (lambdas.size() != couplings.size())
    throw ConfigError("linear model: lambdas and couplings must pair up");
  for (Eigen::Index j = 0; j < lambdas.size(); ++j)
    if (!(lambdas(j) > 0.0 && lambdas(j) < 1.0))
      throw ConfigError("linear model: hidden modes must satisfy 0 < lambda < 1 "
                        "(stability of the recursion)");
  if (!std::isfinite(output_bias)) throw ConfigError("linear model: non-finite bias");
  if (mode == Mode::Dilated) {
    if (base < 2) throw ConfigError("linear model: dilation base must be >= 2");
    if (depth < 1) throw ConfigError("linear model: depth must be >= 1");
  }
}

double LinearModelSpec::beta() const {
  const double t = std::tanh(output_bias);
  return 1.0 - t * t;
}

double LinearModelSpec::weak_coupling_bound() const {
  double eps = 0.0;
  for (Eigen::Index j = 0; j < lambdas.size(); ++j)
    eps += std::abs(couplings(j)) / (1.0 - lambdas(j));
  return eps;
}

int digit_sum(std::uint64_t m, int base) {
  if (base < 2) throw InvalidInputError("digit_sum: base must be >= 2");
  int s = 0;
  while (m > 0) {
    s += static_cast<int>(m % base);
    m /= base;
  }
  return s;
}

int lmin_bfs_oracle(std::uint64_t m, int base, int depth) {
  if (base < 2) throw InvalidInputError("lmin_bfs_oracle: base must be >= 2");
  if (m == 0) return 0;
  if (m > (1ull << 24)) throw ResourceError("lmin_bfs_oracle: displacement too large");

  std::vector<std::uint64_t> jumps{1};
  for (std::uint64_t j = base; j <= m && (depth <= 0 || static_cast<int>(jumps.size()) < depth);
       j *= base)
    jumps.push_back(j);
  if (depth > 0 && static_cast<int>(jumps.size()) > depth) jumps.resize(depth);

  std::vector<int> dist(m + 1, -1);
  dist[0] = 0;
  std::deque<std::uint64_t> queue{0};
  while (!queue.empty()) {
    const std::uint64_t at = queue.front();
    queue.pop_front();
    if (at == m) return dist[at];
    for (std::uint64_t j : jumps) {
      if (at + j > m) continue;
      if (dist[at + j] >= 0) continue;
      dist[at + j] = dist[at] + 1;
      queue.push_back(at + j);
    }
  }
  return dist[m];
}

AverageDigitSum average_digit_sum_check(int R, int base) {
  if (R < 0) throw InvalidInputError("average_digit_sum_check: R must be >= 0");
  if (base < 2) throw InvalidInputError("average_digit_sum_check: base must be >= 2");
  std::uint64_t count = 1;
  for (int r = 0; r <= R; ++r) {
    count *= static_cast<std::uint64_t>(base);
    if (count > (1ull << 24))
      throw ResourceError("average_digit_sum_check: box larger than 2^24");
  }
  AverageDigitSum out;
  out.count = count;
  for (std::uint64_t m = 0; m < count; ++m) out.sum += digit_sum(m, base);
  out.mean = static_cast<double>(out.sum) / static_cast<double>(count);
  out.expected = 0.5 * (base - 1) * (R + 1);
  out.exact_match =
      2 * out.sum == static_cast<std::uint64_t>(base - 1) * (R + 1) * count;
  return out;
}

TheorySeries kernel_vanilla(const LinearModelSpec& spec, int m_max) {
  spec.validate();
  TheorySeries k{"kernel", Vector::Zero(m_max)};
  for (Eigen::Index j = 0; j < spec.lambdas.size(); ++j) {
    double pow = 1.0;  // lambda^(m-1)
    for (int m = 1; m <= m_max; ++m) {
      k.values(m - 1) += spec.couplings(j) * pow;
      pow *= spec.lambdas(j);
    }
  }
  return k;
}

TheorySeries kernel_dilated(const LinearModelSpec& spec, int m_max) {
  spec.validate();
  const int n_steps = m_max + 1;  // sites 1..m_max+1, impulse at site 1
  TheorySeries k{"kernel", Vector::Zero(m_max)};

  for (Eigen::Index j = 0; j < spec.lambdas.size(); ++j) {
    const double lam = spec.lambdas(j);
    // h[l][n]: layer l response at site n+1 (per-mode scalars, w = u = 1)
    std::vector<Vector> h(spec.depth, Vector::Zero(n_steps));
    for (int n = 0; n < n_steps; ++n) {
      const double x_prev = (n == 1) ? 1.0 : 0.0;  // x_1 = 1, all other x = 0
      h[0](n) = x_prev + (n >= 1 ? lam * h[0](n - 1) : 0.0);
      int s = 1;
      for (int l = 1; l < spec.depth; ++l) {
        s *= spec.base;
        h[l](n) = h[l - 1](n) + (n >= s ? lam * h[l](n - s) : 0.0);
      }
    }
    for (int m = 1; m <= m_max; ++m)
      k.values(m - 1) += spec.couplings(j) * h[spec.depth - 1](m + 1 - 1);
  }
  return k;
}

TheorySeries kernel(const LinearModelSpec& spec, int m_max) {
  return spec.mode == Mode::Vanilla ? kernel_vanilla(spec, m_max)
                                    : kernel_dilated(spec, m_max);
}

TheorySeries capp_from_kernel(double beta, const TheorySeries& k, int n_max) {
  if (n_max > k.max_index() + 1)
    throw InvalidInputError("capp_from_kernel: kernel too short for n_max");
  TheorySeries c{"capp", Vector::Zero(n_max)};
  c.values(0) = beta;  // C_1 = beta
  for (int n = 2; n <= n_max; ++n) {
    double acc = 0.0;
    for (int kk = 1; kk < n; ++kk) acc += k.at(n - kk) * c.at(kk);
    c.values(n - 1) = beta * acc;
  }
  return c;
}

TheorySeries capp_series(const LinearModelSpec& spec, int n_max) {
  return capp_from_kernel(spec.beta(), kernel(spec, std::max(1, n_max - 1)), n_max);
}

namespace {

// ascending-coefficient polynomial product
std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

std::vector<std::complex<double>> poly_roots(std::vector<double> coeffs) {
  while (!coeffs.empty() && std::abs(coeffs.back()) < 1e-14) coeffs.pop_back();
  if (coeffs.size() < 2) return {};
  const int d = static_cast<int>(coeffs.size()) - 1;
  numerics::Matrix companion = numerics::Matrix::Zero(d, d);
  for (int i = 1; i < d; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < d; ++i) companion(i, d - 1) = -coeffs[i] / coeffs[d];
  Eigen::EigenSolver<numerics::Matrix> solver(companion);
  std::vector<std::complex<double>> roots;
  for (int i = 0; i < d; ++i) roots.push_back(solver.eigenvalues()(i));
  return roots;
}

std::complex<double> eval_kernel_gf(const LinearModelSpec& spec, std::complex<double> z) {
  std::complex<double> k(0.0, 0.0);
  for (Eigen::Index j = 0; j < spec.lambdas.size(); ++j)
    k += spec.couplings(j) * z / (1.0 - spec.lambdas(j) * z);
  return k;
}

}  // namespace

SingularityReport singularity_report(const LinearModelSpec& spec) {
  spec.validate();
  if (spec.mode != Mode::Vanilla)
    throw ConfigError("singularity_report: closed-form K(z) exists for the vanilla mode only");
  const double beta = spec.beta();
  const Eigen::Index d = spec.lambdas.size();

  SingularityReport report;

  // sup of |beta K| on the unit circle bounds the closed disk (K is analytic
  // there since all poles 1/lambda_j lie outside)
  const int grid = 4096;
  double bmax = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double t = 2.0 * M_PI * i / grid;
    bmax = std::max(bmax, std::abs(beta * eval_kernel_gf(spec, {std::cos(t), std::sin(t)})));
  }
  report.boundary_max = bmax;
  report.unit_disk_safe = bmax < 1.0;

  // clear denominators: P(z) = prod_j (1 - lambda_j z) - beta sum_j c_j z prod_{i!=j} (...)
  std::vector<double> prod_all{1.0};
  for (Eigen::Index j = 0; j < d; ++j)
    prod_all = poly_mul(prod_all, {1.0, -spec.lambdas(j)});
  std::vector<double> poly = prod_all;
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<double> term{0.0, -beta * spec.couplings(j)};  // -beta c_j z
    for (Eigen::Index i = 0; i < d; ++i)
      if (i != j) term = poly_mul(term, {1.0, -spec.lambdas(i)});
    for (size_t i = 0; i < term.size(); ++i) poly[i] += term[i];
  }

  // roots of P are zeros of D plus spurious pole cancellations; keep roots
  // where the cleared product prod (1 - lambda z) stays away from zero
  std::vector<double> candidates;
  for (const auto& root : poly_roots(poly)) {
    if (std::abs(root.imag()) > 1e-8 * std::max(1.0, std::abs(root.real()))) continue;
    const double z = root.real();
    if (z <= 0.0) continue;
    double q = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) q *= 1.0 - spec.lambdas(j) * z;
    if (std::abs(q) < 1e-10) continue;
    candidates.push_back(z);
  }
  if (candidates.empty()) return report;  // no dominant positive singularity

  std::sort(candidates.begin(), candidates.end());
  report.found = true;
  report.z_star = candidates.front();
  report.rate = 1.0 / report.z_star;
  report.multiplicity = 0;
  for (double z : candidates)
    if (std::abs(z - report.z_star) <= 1e-8 * std::max(1.0, report.z_star))
      ++report.multiplicity;
  return report;
}

TheorySeries exact_correlator(const LinearModelSpec& spec, int n_sites) {
  spec.validate();
  if (n_sites < 1) throw InvalidInputError("exact_correlator: n_sites < 1");
  if (n_sites > 20)
    throw ResourceError("exact_correlator: 2^" + std::to_string(n_sites) +
                        " sequences will not be enumerated");

  const TheorySeries k = n_sites > 1 ? kernel(spec, n_sites - 1)
                                     : TheorySeries{"kernel", Vector::Zero(1)};
  const double b = spec.output_bias;
  const std::uint64_t total = 1ull << n_sites;

  Vector e_xn = Vector::Zero(n_sites);
  Vector e_x1xn = Vector::Zero(n_sites);
  double z = 0.0;
  std::vector<double> x(n_sites);

  for (std::uint64_t idx = 0; idx < total; ++idx) {
    for (int i = 0; i < n_sites; ++i) x[i] = (idx >> i) & 1 ? 1.0 : -1.0;
    double w = 1.0;
    for (int n = 0; n < n_sites; ++n) {
      double o = b;
      for (int m = 1; m <= n; ++m) o += k.at(m) * x[n - m];
      w *= std::exp(x[n] * o) / (2.0 * std::cosh(o));
    }
    z += w;
    for (int n = 0; n < n_sites; ++n) {
      e_xn(n) += w * x[n];
      e_x1xn(n) += w * x[0] * x[n];
    }
  }

  TheorySeries c{"exact", Vector::Zero(n_sites)};
  for (int n = 0; n < n_sites; ++n)
    c.values(n) = e_x1xn(n) / z - (e_xn(n) / z) * (e_xn(0) / z);
  return c;
}

double power_law_exponent(const LinearModelSpec& spec) {
  spec.validate();
  if (spec.mode != Mode::Dilated)
    throw ConfigError("power_law_exponent: defined for the dilated mode");
  double alpha = -1.0;
  for (Eigen::Index j = 0; j < spec.lambdas.size(); ++j) {
    if (spec.couplings(j) <= 0.0) continue;
    const double aj = -(spec.base - 1) * std::log(spec.lambdas(j)) / std::log(double(spec.base));
    if (alpha < 0.0 || aj < alpha) alpha = aj;
  }
  if (alpha < 0.0)
    throw InvalidInputError("power_law_exponent: no mode with positive coupling");
  return alpha;
}

DecayClassification decay_classifier(const TheorySeries& series, int tail_lo, int tail_hi) {
  tail_hi = std::min(tail_hi, series.max_index());
  std::vector<double> ns, logc;
  for (int n = std::max(1, tail_lo); n <= tail_hi; ++n) {
    const double v = series.at(n);
    if (v > 1e-290) {  // drop nonpositive and denormal-range coefficients
      ns.push_back(static_cast<double>(n));
      logc.push_back(std::log(v));
    }
  }
  DecayClassification out;
  out.n_used = static_cast<int>(ns.size());
  if (out.n_used < 64) return out;  // Undetermined

  Vector xn = Eigen::Map<const Vector>(ns.data(), ns.size());
  Vector y = Eigen::Map<const Vector>(logc.data(), logc.size());
  const auto fit_exp = numerics::linear_fit(xn, y);
  const auto fit_pow = numerics::linear_fit(xn.array().log().matrix(), y);

  out.rate = -fit_exp.slope;
  out.exponent = -fit_pow.slope;
  out.r2_exp = fit_exp.r2;
  out.r2_pow = fit_pow.r2;
  out.kind = fit_pow.r2 > fit_exp.r2 ? DecayKind::PowerLaw : DecayKind::Exponential;
  return out;
}

}  // namespace dnqs::theory
