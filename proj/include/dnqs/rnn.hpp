#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dnqs/numerics.hpp"

namespace dnqs::rnn {

using numerics::Matrix;
using numerics::RngStream;
using numerics::Vector;

// Spin configurations live in {-1,+1}; batched configs are n_sites x batch.
using SpinConfig = std::vector<int>;
using SpinMatrix = Eigen::MatrixXd;

// One-hot convention, frozen for checkpoint compatibility:
// spin -1 -> index 0, spin +1 -> index 1.
inline int onehot_index(double spin) { return spin > 0 ? 1 : 0; }

struct ModelShape {
  int n_layers = 1;
  int hidden = 8;
  bool complex_phase = false;
  int dilation_base = 2;

  // layer is 0-based; layer 0 reads the one-hot spin, deeper layers read the
  // layer below
  int input_dim(int layer) const { return layer == 0 ? 2 : hidden; }
  // recurrent lag of a layer: base^layer (1, B, B^2, ...)
  int dilation(int layer) const;
  // deepest usable stack for a chain of length n: smallest L with B^L >= n
  static int max_layers(int n_sites, int base = 2);
};

// Trainable tensors of one GRU cell. Gate matrices act on [h_rec; x],
// the candidate path splits into a recurrent part (gated by r) and an
// input part.
struct CellParams {
  Matrix w_gate, w_reset;     // d_h x (d_h + d_in)
  Matrix w_cand_hid;          // d_h x d_h
  Matrix w_cand_in;           // d_h x d_in
  Vector b_gate, b_reset, b_cand_hid, b_cand_in;  // d_h

  static CellParams zeros(int hidden, int input);
  int hidden_dim() const { return static_cast<int>(w_cand_hid.rows()); }
  int input_dim() const { return static_cast<int>(w_cand_in.cols()); }
};

struct HeadParams {
  Matrix weight;  // 2 x d_h
  Vector bias;    // 2

  static HeadParams zeros(int hidden);
};

// Full variational parameter set: one cell per layer, probability head,
// and (for complex wave functions) a phase head. Flattening order is the
// checkpoint order: per layer w_gate, w_reset, w_cand_hid, w_cand_in,
// b_gate, b_reset, b_cand_hid, b_cand_in; then prob head weight/bias;
// then phase head weight/bias when present. Matrices are column-major.
struct ModelParams {
  ModelShape shape;
  std::vector<CellParams> cells;
  HeadParams prob_head;
  std::optional<HeadParams> phase_head;

  static ModelParams zeros(const ModelShape& shape);
  // uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor
  static ModelParams init(const ModelShape& shape, RngStream& rng);
  static ModelParams from_flat(const ModelShape& shape, const Vector& flat);

  Eigen::Index n_params() const;
  Vector flatten() const;

  // in-place theta += scale * other (same shape), used by gradient reductions
  void axpy(double scale, const ModelParams& other);
  void scale(double factor);
};

// Per-layer ring buffers holding the last dilation(l) hidden states; sites
// with no history read as zero.
class HiddenStack {
 public:
  HiddenStack(const ModelShape& shape, int batch);

  // h^{(layer)}_{site - dilation(layer)}; zero matrix for site < dilation
  const Matrix& recurrent(int layer, int site) const;
  void push(int layer, int site, Matrix h);
  // number of live vectors in layer's buffer: min(sites pushed, dilation)
  int stored(int layer) const;

 private:
  ModelShape shape_;
  std::vector<std::vector<Matrix>> ring_;
  std::vector<int> pushed_;
  Matrix zero_;
};

// Everything the backward pass needs: per (layer, site) hidden outputs and
// gate/candidate activations, plus the head logits and the spins that fed
// layer 0. All matrices are d_h x batch (logits 2 x batch). With
// full = false only hidden states, logits and spins are recorded (enough to
// resume evaluation mid-chain, not enough to run backward).
struct ForwardTape {
  int n_sites = 0;
  int batch = 0;
  bool full = true;
  std::vector<std::vector<Matrix>> hidden;    // [layer][site]
  std::vector<std::vector<Matrix>> gate;      // g
  std::vector<std::vector<Matrix>> reset;     // r
  std::vector<std::vector<Matrix>> cand_hid;  // w_cand_hid * h_rec + b_cand_hid
  std::vector<std::vector<Matrix>> cand;      // h*
  std::vector<Matrix> logits_p;
  std::vector<Matrix> logits_phi;  // empty when the model has no phase head
  SpinMatrix spins;
};

struct GruCache {
  Vector h_rec, x, gate, reset, cand_hid, cand;
};

// Reusable batched cell application with the gate weights pre-stacked; used
// by evaluation paths that re-run parts of a chain without recording a tape.
class CellKernel {
 public:
  explicit CellKernel(const CellParams& cell);
  Matrix apply(const Matrix& h_rec, const Matrix& x) const;

 private:
  const CellParams* cell_;
  Matrix gate_weight;  // stacked [w_gate; w_reset]
  Vector gate_bias;
};

// One GRU step on a single column; shares the batched kernel so that a
// hand-rolled per-site loop and the batched forward agree bitwise.
std::pair<Vector, GruCache> gru_step(const CellParams& cell, const Vector& h_prev,
                                     const Vector& x_in);

// --- batched core ---------------------------------------------------------

// Teacher-forced forward over given configurations. logp/phase receive one
// entry per column (phase left at zero without a phase head). tape optional.
void forward_eval(const ModelParams& params, const SpinMatrix& spins, Vector* logp,
                  Vector* phase, ForwardTape* tape);

// Ancestral sampling: column k draws from streams[k], one draw per site.
SpinMatrix sample_forward(const ModelParams& params, int n_sites,
                          std::span<RngStream> streams, Vector* logp, Vector* phase,
                          ForwardTape* tape);

// Gradient of sum_{n,k} dlogits_p[n].col(k).dot(logits_p[n].col(k)) (+ the
// phase-head term) with respect to every parameter. dlogits_phi may be empty
// for models without a phase head.
ModelParams backward(const ModelParams& params, const ForwardTape& tape,
                     const std::vector<Matrix>& dlogits_p,
                     const std::vector<Matrix>& dlogits_phi);

// --- single-configuration wrappers (batch = 1) -----------------------------

struct ForwardResult {
  std::vector<Vector> logits_p;    // per site, 2-vectors
  std::vector<Vector> logits_phi;  // empty without phase head
  ForwardTape tape;
};

ForwardResult dilated_forward(const ModelParams& params, const SpinConfig& sigma);

ModelParams dilated_backward(const ModelParams& params, const ForwardTape& tape,
                             const std::vector<Vector>& dlogits_p,
                             const std::vector<Vector>& dlogits_phi);

}  // namespace dnqs::rnn
