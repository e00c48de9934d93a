#include "dnqs/numerics.hpp"

#include <cmath>

namespace dnqs::numerics {

namespace {

void require_finite(const Vector& v, const char* op) {
  if (!v.allFinite()) throw InvalidInputError(std::string(op) + ": non-finite input");
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer; also used to derive per-stream bases.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

Vector softmax(const Vector& v) {
  require_finite(v, "softmax");
  const double m = v.maxCoeff();
  Vector e = (v.array() - m).exp();
  return e / e.sum();
}

Vector softsign_pi(const Vector& v) {
  require_finite(v, "softsign_pi");
  return M_PI * (v.array() / (1.0 + v.array().abs()));
}

Vector sigmoid(const Vector& v) {
  return 1.0 / (1.0 + (-v.array()).exp());
}

Vector tanh(const Vector& v) {
  return v.array().tanh();
}

Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size())
    throw ShapeError("matvec: " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " * " + std::to_string(v.size()));
  return m * v;
}

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

LineFit linear_fit(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw ShapeError("linear_fit: x and y sizes differ");
  const Eigen::Index n = x.size();
  if (n < 2) throw InvalidInputError("linear_fit: need at least 2 points");

  const double xm = x.mean(), ym = y.mean();
  const double sxx = (x.array() - xm).square().sum();
  const double tss = (y.array() - ym).square().sum();

  LineFit fit;
  if (tss <= 0.0) {
    fit.intercept = ym;
    fit.zero_variance = true;
    return fit;
  }
  if (sxx <= 0.0) throw InvalidInputError("linear_fit: x is constant");

  fit.slope = ((x.array() - xm) * (y.array() - ym)).sum() / sxx;
  fit.intercept = ym - fit.slope * xm;
  const double rss = (y.array() - fit.intercept - fit.slope * x.array()).square().sum();
  fit.r2 = std::max(0.0, 1.0 - rss / tss);
  if (n > 2) fit.slope_stderr = std::sqrt(std::max(0.0, rss / (n - 2)) / sxx);
  return fit;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), state_(mix64(seed ^ mix64(stream * kGolden + 1))) {}

std::uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

}  // namespace dnqs::numerics
