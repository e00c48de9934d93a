#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "dnqs/rnn.hpp"

namespace dnqs::wavefunction {

using numerics::Matrix;
using numerics::RngStream;
using numerics::Vector;
using rnn::ModelParams;
using rnn::SpinConfig;
using rnn::SpinMatrix;

// log psi = 0.5 * log_prob + i * phase; phase is identically zero for
// stoquastic (phase-free) models.
struct AmplitudeResult {
  double log_prob = 0.0;
  double phase = 0.0;
};

// Samples drawn from one parameter snapshot together with everything the
// estimators need about them.
struct SampleBatch {
  SpinMatrix configs;  // n_sites x n_samples
  Vector log_probs;
  Vector phases;
  Eigen::VectorXcd local_energies;
  // optional per-sample flattened d/dtheta log conj(psi) records
  std::vector<Eigen::VectorXcd> log_derivs;

  int n_samples() const { return static_cast<int>(configs.cols()); }
  int n_sites() const { return static_cast<int>(configs.rows()); }
};

// Exact ancestral sampling: one draw per site from the autoregressive
// conditionals, no Markov chain.
SpinConfig sample(const ModelParams& params, int n_sites, RngStream& rng);

AmplitudeResult evaluate(const ModelParams& params, const SpinConfig& sigma);

// Flattened gradient of log conj(psi) = 0.5 log P - i phi.
Eigen::VectorXcd grad_log_amplitude(const ModelParams& params, const SpinConfig& sigma);

// Exact P_theta for every basis state, indexed by bits (bit i set <=> spin +1
// at site i). n_sites <= 20.
std::vector<double> enumerate_probabilities(const ModelParams& params, int n_sites);

SpinConfig config_from_index(std::uint64_t index, int n_sites);
std::uint64_t config_index(const SpinConfig& sigma);

// --- batched internals shared by vmc and observables ------------------------

// Draw n_samples configurations; column k uses RngStream(seed, stream_base+k).
// log_probs/phases always filled; tape optional (training needs it).
SampleBatch sample_batch(const ModelParams& params, int n_sites, int n_samples,
                         std::uint64_t seed, std::uint64_t stream_base,
                         rnn::ForwardTape* tape);

// Upstream logit gradients of sum_n log p_n: onehot(sigma_n) - softmax(logits).
std::vector<Matrix> dlogits_logprob(const rnn::ForwardTape& tape);
// Upstream logit gradients of sum_n phi_n: pi/(1+|a|)^2 at the selected entry.
std::vector<Matrix> dlogits_phase(const rnn::ForwardTape& tape);

}  // namespace dnqs::wavefunction
