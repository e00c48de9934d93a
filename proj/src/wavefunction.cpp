#include "dnqs/wavefunction.hpp"

#include <cmath>

namespace dnqs::wavefunction {

namespace {

void check_config(const SpinConfig& sigma) {
  if (sigma.empty()) throw InvalidInputError("spin configuration is empty");
  for (int s : sigma)
    if (s != 1 && s != -1) throw InvalidInputError("spins must be +-1");
}

SpinMatrix to_matrix(const SpinConfig& sigma) {
  SpinMatrix m(sigma.size(), 1);
  for (size_t i = 0; i < sigma.size(); ++i) m(i, 0) = sigma[i];
  return m;
}

}  // namespace

SpinConfig sample(const ModelParams& params, int n_sites, RngStream& rng) {
  std::span<RngStream> streams(&rng, 1);
  SpinMatrix spins = rnn::sample_forward(params, n_sites, streams, nullptr, nullptr, nullptr);
  SpinConfig out(n_sites);
  for (int n = 0; n < n_sites; ++n) out[n] = spins(n, 0) > 0 ? 1 : -1;
  return out;
}

AmplitudeResult evaluate(const ModelParams& params, const SpinConfig& sigma) {
  check_config(sigma);
  Vector logp, phase;
  rnn::forward_eval(params, to_matrix(sigma), &logp, &phase, nullptr);
  return {logp(0), phase(0)};
}

std::vector<Matrix> dlogits_logprob(const rnn::ForwardTape& tape) {
  std::vector<Matrix> out(tape.n_sites);
  for (int n = 0; n < tape.n_sites; ++n) {
    const Matrix& lp = tape.logits_p[n];
    Matrix d(2, tape.batch);
    for (int k = 0; k < tape.batch; ++k) {
      const double m = std::max(lp(0, k), lp(1, k));
      const double e0 = std::exp(lp(0, k) - m), e1 = std::exp(lp(1, k) - m);
      const double z = e0 + e1;
      const int sel = rnn::onehot_index(tape.spins(n, k));
      d(0, k) = (sel == 0 ? 1.0 : 0.0) - e0 / z;
      d(1, k) = (sel == 1 ? 1.0 : 0.0) - e1 / z;
    }
    out[n] = std::move(d);
  }
  return out;
}

std::vector<Matrix> dlogits_phase(const rnn::ForwardTape& tape) {
  std::vector<Matrix> out(tape.n_sites);
  for (int n = 0; n < tape.n_sites; ++n) {
    const Matrix& la = tape.logits_phi[n];
    Matrix d = Matrix::Zero(2, tape.batch);
    for (int k = 0; k < tape.batch; ++k) {
      const int sel = rnn::onehot_index(tape.spins(n, k));
      const double denom = 1.0 + std::abs(la(sel, k));
      d(sel, k) = M_PI / (denom * denom);
    }
    out[n] = std::move(d);
  }
  return out;
}

Eigen::VectorXcd grad_log_amplitude(const ModelParams& params, const SpinConfig& sigma) {
  check_config(sigma);
  rnn::ForwardTape tape;
  rnn::forward_eval(params, to_matrix(sigma), nullptr, nullptr, &tape);

  const auto dlp = dlogits_logprob(tape);
  Vector grad_logp = rnn::backward(params, tape, dlp, {}).flatten();

  Eigen::VectorXcd out = (0.5 * grad_logp).cast<std::complex<double>>();
  if (params.phase_head) {
    std::vector<Matrix> zero_p(tape.n_sites, Matrix::Zero(2, 1));
    Vector grad_phi = rnn::backward(params, tape, zero_p, dlogits_phase(tape)).flatten();
    out -= std::complex<double>(0.0, 1.0) * grad_phi.cast<std::complex<double>>();
  }
  return out;
}

std::vector<double> enumerate_probabilities(const ModelParams& params, int n_sites) {
  if (n_sites < 1) throw InvalidInputError("enumerate_probabilities: n_sites < 1");
  if (n_sites > 20)
    throw ResourceError("enumerate_probabilities: 2^" + std::to_string(n_sites) +
                        " basis states will not be enumerated");
  const std::uint64_t total = 1ull << n_sites;
  const std::uint64_t block = 4096;
  std::vector<double> probs(total);
  for (std::uint64_t start = 0; start < total; start += block) {
    const std::uint64_t count = std::min(block, total - start);
    SpinMatrix configs(n_sites, count);
    for (std::uint64_t j = 0; j < count; ++j)
      for (int i = 0; i < n_sites; ++i)
        configs(i, j) = ((start + j) >> i) & 1 ? 1.0 : -1.0;
    Vector logp;
    rnn::forward_eval(params, configs, &logp, nullptr, nullptr);
    for (std::uint64_t j = 0; j < count; ++j) probs[start + j] = std::exp(logp(j));
  }
  return probs;
}

SpinConfig config_from_index(std::uint64_t index, int n_sites) {
  SpinConfig sigma(n_sites);
  for (int i = 0; i < n_sites; ++i) sigma[i] = (index >> i) & 1 ? 1 : -1;
  return sigma;
}

std::uint64_t config_index(const SpinConfig& sigma) {
  std::uint64_t idx = 0;
  for (size_t i = 0; i < sigma.size(); ++i)
    if (sigma[i] > 0) idx |= 1ull << i;
  return idx;
}

SampleBatch sample_batch(const ModelParams& params, int n_sites, int n_samples,
                         std::uint64_t seed, std::uint64_t stream_base,
                         rnn::ForwardTape* tape) {
  std::vector<RngStream> streams;
  streams.reserve(n_samples);
  for (int k = 0; k < n_samples; ++k) streams.emplace_back(seed, stream_base + k);

  SampleBatch batch;
  batch.configs = rnn::sample_forward(params, n_sites, streams, &batch.log_probs,
                                      &batch.phases, tape);
  return batch;
}

}  // namespace dnqs::wavefunction
