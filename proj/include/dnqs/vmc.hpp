#pragma once

#include <complex>
#include <cstdint>
#include <string>

#include "dnqs/hamiltonians.hpp"
#include "dnqs/wavefunction.hpp"

namespace dnqs::vmc {

using hamiltonians::HamiltonianSpec;
using numerics::Vector;
using rnn::ModelParams;
using wavefunction::SampleBatch;

// Stream-index regions, so training, evaluation, observables and parameter
// initialization never share a random stream. Training sample k of iteration
// t uses stream t * n_samples + k, which is what makes mid-run checkpoints
// resume bit-identically.
inline constexpr std::uint64_t kTrainStreamBase = 0;
inline constexpr std::uint64_t kEvalStreamBase = 1ull << 40;
inline constexpr std::uint64_t kMeasureStreamBase = 1ull << 41;
inline constexpr std::uint64_t kInitStream = 1ull << 62;

// Fixed batching constants. Blocks are units of work: results are reduced in
// block order, so the thread count never changes any output.
inline constexpr int kTrainBlock = 50;
inline constexpr int kEvalBlock = 500;

struct VmcConfig {
  HamiltonianSpec hamiltonian;
  rnn::ModelShape model;
  int n_samples = 100;
  int n_samples_eval = 100000;
  double learning_rate = 1e-4;
  int n_iterations = 100000;
  std::uint64_t seed = 1;
  int checkpoint_interval = 1000;
  std::string out_dir;  // empty: no files written

  void validate() const;
};

struct AdamState {
  Vector m, v;
  std::int64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState zeros(Eigen::Index n_params);
};

// Bias-corrected Adam update, in place.
void adam_step(AdamState& state, Vector& theta, const Vector& grad, double lr);

struct IterationStats {
  int iteration = 0;
  double energy_mean = 0.0;  // real part; the imaginary part is MC noise
  double energy_stderr = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;
};

struct RunRecord {
  std::vector<IterationStats> iterations;
};

struct EnergyEstimate {
  std::complex<double> mean;
  double stderr = 0.0;
};

// Local energies for a whole sample batch. Without a tape this teacher-forces
// one forward over all spin-flipped configurations; given the batch's forward
// tape it instead resumes each flipped configuration from the first changed
// site, reusing the cached hidden states (about half the work).
Eigen::VectorXcd local_energies_batch(const ModelParams& params,
                                      const HamiltonianSpec& spec,
                                      const SampleBatch& batch,
                                      const rnn::ForwardTape* base_tape = nullptr);

// mean = (1/M) sum E_loc, stderr = sample std / sqrt(M).
EnergyEstimate estimate_energy(const ModelParams& params, const HamiltonianSpec& spec,
                               int n_samples, std::uint64_t seed,
                               std::uint64_t stream_base);

// Baseline-subtracted log-derivative estimator
//   (2/M) sum_k Re[(E_k - Ebar) dlog conj(psi)_k]
// from a batch carrying per-sample log-derivative records.
Vector estimate_gradient(const ModelParams& params, const SampleBatch& batch);

// Same estimator without per-sample records: the per-column weights are folded
// into the upstream logit gradients and a single batched backward pass runs.
// inv_m is 1/M over the full batch the mean was taken on, so block results
// sum to the estimator.
ModelParams weighted_gradient(const ModelParams& params, const rnn::ForwardTape& tape,
                              const Eigen::VectorXcd& local_energies,
                              std::complex<double> energy_mean, double inv_m);

struct TrainResult {
  ModelParams params;
  RunRecord record;
};

// Full optimization loop; writes metrics.csv and periodic checkpoints when
// configured. `resume_from` continues a checkpointed run bit-identically.
TrainResult train(const VmcConfig& config, const std::string& resume_from = "");

// --- checkpoint file ("DNQS", version 1, little-endian) --------------------

struct Checkpoint {
  rnn::ModelShape shape;
  int n_sites = 0;
  std::uint64_t seed = 0;
  Vector theta;
  AdamState adam;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct CheckpointVersionError : Error {
  using Error::Error;
};

}  // namespace dnqs::vmc
