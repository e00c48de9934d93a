#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dnqs/numerics.hpp"

namespace dnqs::theory {

using numerics::Vector;

// Linearized recurrent model with diagonal hidden dynamics: modes lambda_j in
// (0,1), read-in/read-out couplings c_j = u_j w_j, logistic output with bias b.
// Dilated mode shares the modes across `depth` layers with lags base^(l-1).
enum class Mode { Vanilla, Dilated };

struct LinearModelSpec {
  Mode mode = Mode::Vanilla;
  Vector lambdas;
  Vector couplings;
  double output_bias = 0.0;
  int base = 2;   // dilated only
  int depth = 1;  // dilated only

  void validate() const;
  // beta = 1 - tanh^2(b), the slope of the conditional mean at weak coupling
  double beta() const;
  // sum_j |c_j| / (1 - lambda_j), an upper bound on the input field; the
  // first-order truncation is trustworthy well below 1
  double weak_coupling_bound() const;
  bool weak_coupling_flagged() const { return weak_coupling_bound() >= 0.1; }
};

// Coefficient sequence indexed from 1 (kernel k_m, approximate or exact C_n).
struct TheorySeries {
  std::string label;
  Vector values;

  int max_index() const { return static_cast<int>(values.size()); }
  double at(int n) const { return values(n - 1); }
};

// Base-B digit sum s_B(m); s_B(0) = 0.
int digit_sum(std::uint64_t m, int base);

// Shortest-path edge count to displacement m with jump sizes {1, B, ...,
// B^(depth-1)} by breadth-first search; depth <= 0 means unbounded. The
// independent oracle for the digit-sum formula.
int lmin_bfs_oracle(std::uint64_t m, int base, int depth = 0);

struct AverageDigitSum {
  // exact rational mean of s_B over {0, ..., B^(R+1) - 1} as sum/count,
  // against the closed form (B-1)(R+1)/2
  std::uint64_t sum = 0;
  std::uint64_t count = 0;
  double mean = 0.0;
  double expected = 0.0;
  bool exact_match = false;  // 2*sum == (B-1)(R+1)*count
};

AverageDigitSum average_digit_sum_check(int R, int base);

// k_m = sum_j c_j lambda_j^(m-1) for m = 1..m_max.
TheorySeries kernel_vanilla(const LinearModelSpec& spec, int m_max);

// Exact dilated impulse response: run the linear layer recursions with a unit
// input at one site and read the output coefficient at each lag. Equals the
// path sum sum_j c_j sum_p lambda_j^(edges of p).
TheorySeries kernel_dilated(const LinearModelSpec& spec, int m_max);

TheorySeries kernel(const LinearModelSpec& spec, int m_max);

// First-order correlator recursion C_1 = beta, C_n = beta sum_k k_{n-k} C_k.
TheorySeries capp_series(const LinearModelSpec& spec, int n_max);
TheorySeries capp_from_kernel(double beta, const TheorySeries& kernel, int n_max);

// Smallest positive zero of D(z) = 1 - beta K(z) for the vanilla kernel,
// found on the polynomial obtained by clearing the denominators of K.
struct SingularityReport {
  bool found = false;
  double z_star = 0.0;
  int multiplicity = 0;
  double rate = 0.0;  // rho = 1/z_star
  bool unit_disk_safe = false;
  double boundary_max = 0.0;  // sup |beta K(z)| on |z| = 1 (4096-point grid)
};

SingularityReport singularity_report(const LinearModelSpec& spec);

// Exact C_n = E[x_n x_1] - E[x_n] E[x_1] by full enumeration of the logistic
// autoregressive chain with the mode-appropriate kernel; n_sites <= 20.
TheorySeries exact_correlator(const LinearModelSpec& spec, int n_sites);

// Power-law exponent of the dilated lower bound: min over coupled modes of
// alpha_j = -(B-1) log_B lambda_j.
double power_law_exponent(const LinearModelSpec& spec);

enum class DecayKind { Exponential, PowerLaw, Undetermined };

struct DecayClassification {
  DecayKind kind = DecayKind::Undetermined;
  double rate = 0.0;      // exponential: C_n ~ exp(-rate n)
  double exponent = 0.0;  // power law: C_n ~ n^(-exponent)
  double r2_exp = 0.0;
  double r2_pow = 0.0;
  int n_used = 0;
};

// Fits log C against n and against log n on the positive tail coefficients in
// [tail_lo, tail_hi] and keeps the better model; needs >= 64 usable points.
DecayClassification decay_classifier(const TheorySeries& series, int tail_lo,
                                     int tail_hi);

}  // namespace dnqs::theory
