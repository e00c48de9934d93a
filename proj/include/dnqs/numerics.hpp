#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "dnqs/errors.hpp"

namespace dnqs::numerics {

// Dense double-precision storage for all model parameters and hidden states.
// Eigen supplies the representation; everything downstream treats dimensions
// as fixed after construction.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Numerically safe softmax: subtracts the max before exponentiating.
// Throws InvalidInputError on non-finite entries.
Vector softmax(const Vector& v);

// pi * v / (1 + |v|), elementwise; range (-pi, pi).
Vector softsign_pi(const Vector& v);

Vector sigmoid(const Vector& v);
Vector tanh(const Vector& v);

// M * v with an explicit dimension check (ShapeError on mismatch).
Vector matvec(const Matrix& m, const Vector& v);

// [a; b]
Vector concat(const Vector& a, const Vector& b);

// Ordinary least squares of y against x with an intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;  // from the residual-scaled covariance
  double r2 = 0.0;            // clamped to [0, 1]
  bool zero_variance = false;  // y was constant: slope 0, r2 reported as 0
};

LineFit linear_fit(const Vector& x, const Vector& y);

// Counter-based splittable random stream. A stream is identified by
// (seed, stream index); the n-th draw is a pure function of (seed, stream, n),
// so per-sample streams can be assigned deterministically no matter in which
// order, thread, or batch they are consumed.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64();
  // uniform in [0, 1)
  double next_double();
  // uniform in [lo, hi)
  double next_uniform(double lo, double hi);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_;
};

}  // namespace dnqs::numerics
