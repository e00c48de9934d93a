#include "dnqs/rnn.hpp"

#include <cmath>

namespace dnqs::rnn {

namespace {

// Stacked [w_gate; w_reset] so both gates come out of one product.
struct GateStack {
  Matrix weight;  // (2 d_h) x (d_h + d_in)
  Vector bias;    // 2 d_h
};

GateStack stack_gates(const CellParams& cell) {
  const Eigen::Index dh = cell.w_gate.rows();
  GateStack s;
  s.weight.resize(2 * dh, cell.w_gate.cols());
  s.weight.topRows(dh) = cell.w_gate;
  s.weight.bottomRows(dh) = cell.w_reset;
  s.bias.resize(2 * dh);
  s.bias.head(dh) = cell.b_gate;
  s.bias.tail(dh) = cell.b_reset;
  return s;
}

// h_n = (1 - g) .* h_rec + g .* tanh(r .* (W_h h_rec + b_h) + W_in x + b_in)
void cell_forward(const CellParams& cell, const GateStack& gates, const Matrix& h_rec,
                  const Matrix& x, Matrix& g, Matrix& r, Matrix& cand_hid, Matrix& cand,
                  Matrix& h_out) {
  const Eigen::Index dh = cell.w_cand_hid.rows();
  const Eigen::Index di = cell.w_cand_in.cols();
  const Eigen::Index b = h_rec.cols();

  Matrix joint(dh + di, b);
  joint.topRows(dh) = h_rec;
  joint.bottomRows(di) = x;

  Matrix a;
  a.noalias() = gates.weight * joint;
  a.colwise() += gates.bias;
  g = (1.0 / (1.0 + (-a.topRows(dh).array()).exp())).matrix();
  r = (1.0 / (1.0 + (-a.bottomRows(dh).array()).exp())).matrix();

  cand_hid.noalias() = cell.w_cand_hid * h_rec;
  cand_hid.colwise() += cell.b_cand_hid;
  Matrix cin;
  cin.noalias() = cell.w_cand_in * x;
  cin.colwise() += cell.b_cand_in;
  cand = (r.array() * cand_hid.array() + cin.array()).tanh().matrix();

  h_out = ((1.0 - g.array()) * h_rec.array() + g.array() * cand.array()).matrix();
}

void onehot_columns(const SpinMatrix& spins, int site, Matrix& x) {
  x.setZero();
  for (Eigen::Index k = 0; k < spins.cols(); ++k)
    x(onehot_index(spins(site, k)), k) = 1.0;
}

// Core loop shared by sampling and evaluation. When `streams` is non-empty
// the spins are drawn column-by-column; otherwise they are read.
void run_forward(const ModelParams& params, int n_sites, SpinMatrix& spins,
                 std::span<RngStream> streams, Vector* logp, Vector* phase,
                 ForwardTape* tape) {
  const ModelShape& shape = params.shape;
  const int n_layers = shape.n_layers;
  const int dh = shape.hidden;
  const bool sampling = !streams.empty();
  const Eigen::Index batch = sampling ? static_cast<Eigen::Index>(streams.size())
                                      : spins.cols();

  if (n_sites < 1) throw ConfigError("run_forward: n_sites must be >= 1");
  if (n_layers > ModelShape::max_layers(n_sites, shape.dilation_base))
    throw ConfigError("run_forward: " + std::to_string(n_layers) +
                      " layers exceed the depth limit for n_sites = " +
                      std::to_string(n_sites));
  if (!sampling && spins.rows() != n_sites)
    throw ShapeError("run_forward: spin matrix has wrong site count");

  if (sampling) spins.setZero(n_sites, batch);

  std::vector<GateStack> gates(n_layers);
  for (int l = 0; l < n_layers; ++l) gates[l] = stack_gates(params.cells[l]);

  std::optional<HiddenStack> stack;
  if (tape) {
    tape->n_sites = n_sites;
    tape->batch = static_cast<int>(batch);
    auto grid = [&] { return std::vector<std::vector<Matrix>>(n_layers, std::vector<Matrix>(n_sites)); };
    tape->hidden = grid();
    if (tape->full) {
      tape->gate = grid();
      tape->reset = grid();
      tape->cand_hid = grid();
      tape->cand = grid();
    }
    tape->logits_p.assign(n_sites, Matrix());
    tape->logits_phi.clear();
    if (params.phase_head) tape->logits_phi.assign(n_sites, Matrix());
  } else {
    stack.emplace(shape, static_cast<int>(batch));
  }

  if (logp) logp->setZero(batch);
  if (phase) phase->setZero(batch);

  const Matrix zero_h = Matrix::Zero(dh, batch);
  Matrix x_spin(2, batch);
  Matrix g, r, cand_hid, cand, h;

  for (int n = 0; n < n_sites; ++n) {
    if (n == 0)
      x_spin.setZero();  // x_0 = 0: no spin feeds the first site
    else
      onehot_columns(spins, n - 1, x_spin);

    const Matrix* layer_in = &x_spin;
    for (int l = 0; l < n_layers; ++l) {
      const int s = shape.dilation(l);
      const Matrix& h_rec = tape ? (n >= s ? tape->hidden[l][n - s] : zero_h)
                                 : stack->recurrent(l, n);
      cell_forward(params.cells[l], gates[l], h_rec, *layer_in, g, r, cand_hid, cand, h);
      if (tape) {
        if (tape->full) {
          tape->gate[l][n] = std::move(g);
          tape->reset[l][n] = std::move(r);
          tape->cand_hid[l][n] = std::move(cand_hid);
          tape->cand[l][n] = std::move(cand);
        }
        tape->hidden[l][n] = std::move(h);
        layer_in = &tape->hidden[l][n];
      } else {
        stack->push(l, n, std::move(h));
        layer_in = &stack->recurrent(l, n + s);  // the state just pushed
      }
    }
    const Matrix& top = *layer_in;

    Matrix lp;
    lp.noalias() = params.prob_head.weight * top;
    lp.colwise() += params.prob_head.bias;
    Matrix lphi;
    if (params.phase_head) {
      lphi.noalias() = params.phase_head->weight * top;
      lphi.colwise() += params.phase_head->bias;
    }

    for (Eigen::Index k = 0; k < batch; ++k) {
      const double m = std::max(lp(0, k), lp(1, k));
      const double lse = m + std::log(std::exp(lp(0, k) - m) + std::exp(lp(1, k) - m));
      if (sampling) {
        const double p_up = std::exp(lp(1, k) - lse);
        spins(n, k) = streams[k].next_double() < p_up ? 1.0 : -1.0;
      }
      const int sel = onehot_index(spins(n, k));
      if (logp) (*logp)(k) += lp(sel, k) - lse;
      if (phase && params.phase_head) {
        const double a = lphi(sel, k);
        (*phase)(k) += M_PI * a / (1.0 + std::abs(a));
      }
    }

    if (tape) {
      tape->logits_p[n] = std::move(lp);
      if (params.phase_head) tape->logits_phi[n] = std::move(lphi);
    }
  }

  if (tape) tape->spins = spins;
}

}  // namespace

int ModelShape::dilation(int layer) const {
  int s = 1;
  for (int i = 0; i < layer; ++i) s *= dilation_base;
  return s;
}

int ModelShape::max_layers(int n_sites, int base) {
  int depth = 1;
  long long reach = base;
  while (reach < n_sites) {
    reach *= base;
    ++depth;
  }
  return depth;
}

CellParams CellParams::zeros(int hidden, int input) {
  CellParams c;
  c.w_gate = Matrix::Zero(hidden, hidden + input);
  c.w_reset = Matrix::Zero(hidden, hidden + input);
  c.w_cand_hid = Matrix::Zero(hidden, hidden);
  c.w_cand_in = Matrix::Zero(hidden, input);
  c.b_gate = Vector::Zero(hidden);
  c.b_reset = Vector::Zero(hidden);
  c.b_cand_hid = Vector::Zero(hidden);
  c.b_cand_in = Vector::Zero(hidden);
  return c;
}

HeadParams HeadParams::zeros(int hidden) {
  return {Matrix::Zero(2, hidden), Vector::Zero(2)};
}

ModelParams ModelParams::zeros(const ModelShape& shape) {
  if (shape.n_layers < 1 || shape.hidden < 1 || shape.dilation_base < 2)
    throw ConfigError("ModelParams: invalid shape");
  ModelParams p;
  p.shape = shape;
  for (int l = 0; l < shape.n_layers; ++l)
    p.cells.push_back(CellParams::zeros(shape.hidden, shape.input_dim(l)));
  p.prob_head = HeadParams::zeros(shape.hidden);
  if (shape.complex_phase) p.phase_head = HeadParams::zeros(shape.hidden);
  return p;
}

namespace {

void fill_uniform(double* data, Eigen::Index n, double bound, RngStream& rng) {
  for (Eigen::Index i = 0; i < n; ++i) data[i] = rng.next_uniform(-bound, bound);
}

template <typename Tensor>
void init_tensor(Tensor& t, int fan_in, RngStream& rng) {
  fill_uniform(t.data(), t.size(), 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

template <typename Fn>
void for_each_tensor(ModelParams& p, Fn&& fn) {
  for (auto& c : p.cells) {
    fn(c.w_gate);
    fn(c.w_reset);
    fn(c.w_cand_hid);
    fn(c.w_cand_in);
    fn(c.b_gate);
    fn(c.b_reset);
    fn(c.b_cand_hid);
    fn(c.b_cand_in);
  }
  fn(p.prob_head.weight);
  fn(p.prob_head.bias);
  if (p.phase_head) {
    fn(p.phase_head->weight);
    fn(p.phase_head->bias);
  }
}

template <typename Fn>
void for_each_tensor(const ModelParams& p, Fn&& fn) {
  for_each_tensor(const_cast<ModelParams&>(p), [&fn](auto& t) { fn(std::as_const(t)); });
}

}  // namespace

ModelParams ModelParams::init(const ModelShape& shape, RngStream& rng) {
  ModelParams p = zeros(shape);
  for (int l = 0; l < shape.n_layers; ++l) {
    auto& c = p.cells[l];
    const int fan_joint = shape.hidden + shape.input_dim(l);
    init_tensor(c.w_gate, fan_joint, rng);
    init_tensor(c.w_reset, fan_joint, rng);
    init_tensor(c.w_cand_hid, shape.hidden, rng);
    init_tensor(c.w_cand_in, shape.input_dim(l), rng);
    init_tensor(c.b_gate, fan_joint, rng);
    init_tensor(c.b_reset, fan_joint, rng);
    init_tensor(c.b_cand_hid, shape.hidden, rng);
    init_tensor(c.b_cand_in, shape.input_dim(l), rng);
  }
  init_tensor(p.prob_head.weight, shape.hidden, rng);
  init_tensor(p.prob_head.bias, shape.hidden, rng);
  if (p.phase_head) {
    init_tensor(p.phase_head->weight, shape.hidden, rng);
    init_tensor(p.phase_head->bias, shape.hidden, rng);
  }
  return p;
}

Eigen::Index ModelParams::n_params() const {
  Eigen::Index n = 0;
  for_each_tensor(*this, [&n](const auto& t) { n += t.size(); });
  return n;
}

Vector ModelParams::flatten() const {
  Vector out(n_params());
  Eigen::Index at = 0;
  for_each_tensor(*this, [&](const auto& t) {
    std::copy(t.data(), t.data() + t.size(), out.data() + at);
    at += t.size();
  });
  return out;
}

ModelParams ModelParams::from_flat(const ModelShape& shape, const Vector& flat) {
  ModelParams p = zeros(shape);
  if (flat.size() != p.n_params())
    throw ShapeError("from_flat: expected " + std::to_string(p.n_params()) +
                     " parameters, got " + std::to_string(flat.size()));
  Eigen::Index at = 0;
  for_each_tensor(p, [&](auto& t) {
    std::copy(flat.data() + at, flat.data() + at + t.size(), t.data());
    at += t.size();
  });
  return p;
}

void ModelParams::axpy(double s, const ModelParams& other) {
  auto it = [&](auto& mine, const auto& theirs) { mine += s * theirs; };
  for (size_t l = 0; l < cells.size(); ++l) {
    it(cells[l].w_gate, other.cells[l].w_gate);
    it(cells[l].w_reset, other.cells[l].w_reset);
    it(cells[l].w_cand_hid, other.cells[l].w_cand_hid);
    it(cells[l].w_cand_in, other.cells[l].w_cand_in);
    it(cells[l].b_gate, other.cells[l].b_gate);
    it(cells[l].b_reset, other.cells[l].b_reset);
    it(cells[l].b_cand_hid, other.cells[l].b_cand_hid);
    it(cells[l].b_cand_in, other.cells[l].b_cand_in);
  }
  it(prob_head.weight, other.prob_head.weight);
  it(prob_head.bias, other.prob_head.bias);
  if (phase_head) {
    it(phase_head->weight, other.phase_head->weight);
    it(phase_head->bias, other.phase_head->bias);
  }
}

void ModelParams::scale(double factor) {
  for_each_tensor(*this, [factor](auto& t) { t *= factor; });
}

HiddenStack::HiddenStack(const ModelShape& shape, int batch)
    : shape_(shape), zero_(Matrix::Zero(shape.hidden, batch)) {
  ring_.resize(shape.n_layers);
  pushed_.assign(shape.n_layers, 0);
  for (int l = 0; l < shape.n_layers; ++l) ring_[l].resize(shape.dilation(l));
}

const Matrix& HiddenStack::recurrent(int layer, int site) const {
  const int s = shape_.dilation(layer);
  if (site < s) return zero_;
  return ring_[layer][site % s];
}

void HiddenStack::push(int layer, int site, Matrix h) {
  const int s = shape_.dilation(layer);
  ring_[layer][site % s] = std::move(h);
  ++pushed_[layer];
}

int HiddenStack::stored(int layer) const {
  return std::min(pushed_[layer], shape_.dilation(layer));
}

CellKernel::CellKernel(const CellParams& cell) : cell_(&cell) {
  GateStack s = stack_gates(cell);
  gate_weight = std::move(s.weight);
  gate_bias = std::move(s.bias);
}

Matrix CellKernel::apply(const Matrix& h_rec, const Matrix& x) const {
  const Eigen::Index dh = cell_->w_cand_hid.rows();
  const Eigen::Index di = cell_->w_cand_in.cols();
  Matrix joint(dh + di, h_rec.cols());
  joint.topRows(dh) = h_rec;
  joint.bottomRows(di) = x;
  Matrix a;
  a.noalias() = gate_weight * joint;
  a.colwise() += gate_bias;
  Matrix u;
  u.noalias() = cell_->w_cand_hid * h_rec;
  u.colwise() += cell_->b_cand_hid;
  Matrix ci;
  ci.noalias() = cell_->w_cand_in * x;
  ci.colwise() += cell_->b_cand_in;
  const Eigen::ArrayXXd g = 1.0 / (1.0 + (-a.topRows(dh).array()).exp());
  const Eigen::ArrayXXd r = 1.0 / (1.0 + (-a.bottomRows(dh).array()).exp());
  const Eigen::ArrayXXd cand = (r * u.array() + ci.array()).tanh();
  return ((1.0 - g) * h_rec.array() + g * cand).matrix();
}

std::pair<Vector, GruCache> gru_step(const CellParams& cell, const Vector& h_prev,
                                     const Vector& x_in) {
  if (h_prev.size() != cell.hidden_dim() || x_in.size() != cell.input_dim())
    throw ShapeError("gru_step: input dimensions do not match the cell");
  GateStack gates = stack_gates(cell);
  Matrix g, r, cand_hid, cand, h;
  cell_forward(cell, gates, h_prev, x_in, g, r, cand_hid, cand, h);
  GruCache cache{h_prev, x_in, g.col(0), r.col(0), cand_hid.col(0), cand.col(0)};
  return {h.col(0), std::move(cache)};
}

void forward_eval(const ModelParams& params, const SpinMatrix& spins, Vector* logp,
                  Vector* phase, ForwardTape* tape) {
  SpinMatrix copy = spins;
  run_forward(params, static_cast<int>(spins.rows()), copy, {}, logp, phase, tape);
}

SpinMatrix sample_forward(const ModelParams& params, int n_sites,
                          std::span<RngStream> streams, Vector* logp, Vector* phase,
                          ForwardTape* tape) {
  SpinMatrix spins;
  run_forward(params, n_sites, spins, streams, logp, phase, tape);
  return spins;
}

ModelParams backward(const ModelParams& params, const ForwardTape& tape,
                     const std::vector<Matrix>& dlogits_p,
                     const std::vector<Matrix>& dlogits_phi) {
  const ModelShape& shape = params.shape;
  const int n_layers = shape.n_layers;
  const int n_sites = tape.n_sites;
  const Eigen::Index batch = tape.batch;
  const int dh = shape.hidden;

  if (static_cast<int>(dlogits_p.size()) != n_sites)
    throw ShapeError("backward: dlogits_p must have one entry per site");
  const bool has_phase = params.phase_head.has_value();
  if (has_phase && !dlogits_phi.empty() &&
      static_cast<int>(dlogits_phi.size()) != n_sites)
    throw ShapeError("backward: dlogits_phi must have one entry per site");
  if (!tape.full) throw ShapeError("backward: tape was recorded without activations");
  if (!tape.hidden.size() || static_cast<int>(tape.hidden.size()) != n_layers ||
      tape.hidden[0][0].rows() != dh)
    throw ShapeError("backward: tape does not match the model shape");

  ModelParams grad = ModelParams::zeros(shape);

  std::vector<std::vector<Matrix>> dhid(n_layers, std::vector<Matrix>(n_sites));
  for (int l = 0; l < n_layers; ++l)
    for (int n = 0; n < n_sites; ++n) dhid[l][n] = Matrix::Zero(dh, batch);

  const Matrix zero_h = Matrix::Zero(dh, batch);
  Matrix x_spin(2, batch);

  for (int n = n_sites - 1; n >= 0; --n) {
    // output heads read the top hidden state
    const Matrix& top = tape.hidden[n_layers - 1][n];
    grad.prob_head.weight.noalias() += dlogits_p[n] * top.transpose();
    grad.prob_head.bias += dlogits_p[n].rowwise().sum();
    dhid[n_layers - 1][n].noalias() += params.prob_head.weight.transpose() * dlogits_p[n];
    if (has_phase && !dlogits_phi.empty()) {
      grad.phase_head->weight.noalias() += dlogits_phi[n] * top.transpose();
      grad.phase_head->bias += dlogits_phi[n].rowwise().sum();
      dhid[n_layers - 1][n].noalias() +=
          params.phase_head->weight.transpose() * dlogits_phi[n];
    }

    for (int l = n_layers - 1; l >= 0; --l) {
      const CellParams& cell = params.cells[l];
      auto& gcell = grad.cells[l];
      const int s = shape.dilation(l);
      const int di = shape.input_dim(l);

      const Matrix& h_rec = n >= s ? tape.hidden[l][n - s] : zero_h;
      const Matrix* x = nullptr;
      if (l > 0) {
        x = &tape.hidden[l - 1][n];
      } else {
        if (n == 0)
          x_spin.setZero();
        else
          onehot_columns(tape.spins, n - 1, x_spin);
        x = &x_spin;
      }

      const Matrix& g = tape.gate[l][n];
      const Matrix& r = tape.reset[l][n];
      const Matrix& u = tape.cand_hid[l][n];
      const Matrix& cand = tape.cand[l][n];
      const Matrix& dh_cur = dhid[l][n];

      Matrix dg = (dh_cur.array() * (cand.array() - h_rec.array())).matrix();
      Matrix dcand = (dh_cur.array() * g.array()).matrix();
      Matrix dh_rec = (dh_cur.array() * (1.0 - g.array())).matrix();

      Matrix dcp = (dcand.array() * (1.0 - cand.array().square())).matrix();
      Matrix dr = (dcp.array() * u.array()).matrix();
      Matrix du = (dcp.array() * r.array()).matrix();

      gcell.w_cand_hid.noalias() += du * h_rec.transpose();
      gcell.b_cand_hid += du.rowwise().sum();
      dh_rec.noalias() += cell.w_cand_hid.transpose() * du;

      gcell.w_cand_in.noalias() += dcp * x->transpose();
      gcell.b_cand_in += dcp.rowwise().sum();
      Matrix dx;
      dx.noalias() = cell.w_cand_in.transpose() * dcp;

      Matrix da_g = (dg.array() * g.array() * (1.0 - g.array())).matrix();
      Matrix da_r = (dr.array() * r.array() * (1.0 - r.array())).matrix();

      gcell.w_gate.leftCols(dh).noalias() += da_g * h_rec.transpose();
      gcell.w_gate.rightCols(di).noalias() += da_g * x->transpose();
      gcell.b_gate += da_g.rowwise().sum();
      gcell.w_reset.leftCols(dh).noalias() += da_r * h_rec.transpose();
      gcell.w_reset.rightCols(di).noalias() += da_r * x->transpose();
      gcell.b_reset += da_r.rowwise().sum();

      dh_rec.noalias() += cell.w_gate.leftCols(dh).transpose() * da_g;
      dh_rec.noalias() += cell.w_reset.leftCols(dh).transpose() * da_r;
      dx.noalias() += cell.w_gate.rightCols(di).transpose() * da_g;
      dx.noalias() += cell.w_reset.rightCols(di).transpose() * da_r;

      if (n >= s) dhid[l][n - s] += dh_rec;
      if (l > 0) dhid[l - 1][n] += dx;
      // at l == 0 dx falls on the one-hot inputs, which carry no parameters
    }
  }
  return grad;
}

ForwardResult dilated_forward(const ModelParams& params, const SpinConfig& sigma) {
  if (sigma.empty()) throw ConfigError("dilated_forward: empty configuration");
  for (int s : sigma)
    if (s != 1 && s != -1) throw InvalidInputError("dilated_forward: spins must be +-1");

  SpinMatrix spins(sigma.size(), 1);
  for (size_t n = 0; n < sigma.size(); ++n) spins(n, 0) = sigma[n];

  ForwardResult res;
  forward_eval(params, spins, nullptr, nullptr, &res.tape);
  res.logits_p.reserve(sigma.size());
  for (const auto& m : res.tape.logits_p) res.logits_p.push_back(m.col(0));
  for (const auto& m : res.tape.logits_phi) res.logits_phi.push_back(m.col(0));
  return res;
}

ModelParams dilated_backward(const ModelParams& params, const ForwardTape& tape,
                             const std::vector<Vector>& dlogits_p,
                             const std::vector<Vector>& dlogits_phi) {
  std::vector<Matrix> dp, dphi;
  dp.reserve(dlogits_p.size());
  for (const auto& v : dlogits_p) dp.push_back(v);
  for (const auto& v : dlogits_phi) dphi.push_back(v);
  return backward(params, tape, dp, dphi);
}

}  // namespace dnqs::rnn
