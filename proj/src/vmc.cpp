#include "dnqs/vmc.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace dnqs::vmc {

void VmcConfig::validate() const {
  hamiltonian.validate();
  if (n_samples < 2) throw ConfigError("n_samples must be >= 2");
  if (n_samples_eval < 2) throw ConfigError("n_samples_eval must be >= 2");
  if (n_iterations < 0) throw ConfigError("n_iterations must be >= 0");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be >= 1");
  const int max_l = rnn::ModelShape::max_layers(hamiltonian.n_sites, model.dilation_base);
  if (model.n_layers > max_l)
    throw ConfigError("n_layers = " + std::to_string(model.n_layers) +
                      " exceeds ceil(log2(N)) = " + std::to_string(max_l) +
                      " for N = " + std::to_string(hamiltonian.n_sites));
}

AdamState AdamState::zeros(Eigen::Index n_params) {
  AdamState s;
  s.m = Vector::Zero(n_params);
  s.v = Vector::Zero(n_params);
  return s;
}

void adam_step(AdamState& state, Vector& theta, const Vector& grad, double lr) {
  if (theta.size() != grad.size() || theta.size() != state.m.size())
    throw ShapeError("adam_step: parameter/gradient/moment sizes differ");
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  theta -= lr * (state.m / c1).cwiseQuotient(((state.v / c2).cwiseSqrt().array() + state.eps).matrix());
}

namespace {

// selected log-conditional and conditional phase from cached head logits
double selected_logp(const numerics::Matrix& lp, int sel, int k) {
  const double m = std::max(lp(0, k), lp(1, k));
  return lp(sel, k) - (m + std::log(std::exp(lp(0, k) - m) + std::exp(lp(1, k) - m)));
}

double selected_phase(const numerics::Matrix& la, int sel, int k) {
  const double a = la(sel, k);
  return M_PI * a / (1.0 + std::abs(a));
}

// Resume evaluation of every spin-flipped configuration from the cached
// forward pass: a flip at site i leaves all hidden states up to site i and
// every conditional before site i untouched, so only sites > min(flips) are
// recomputed. Halves the evaluation work relative to full re-runs.
Eigen::VectorXcd local_energies_resume(const ModelParams& params,
                                       const HamiltonianSpec& spec,
                                       const SampleBatch& batch,
                                       const rnn::ForwardTape& tape) {
  const int n = spec.n_sites;
  const int n_cols = batch.n_samples();
  const int n_layers = params.shape.n_layers;
  const bool has_phase = params.phase_head.has_value();
  const auto terms = hamiltonians::off_diagonal_terms(spec);

  std::vector<rnn::CellKernel> kernels;
  kernels.reserve(n_layers);
  for (const auto& cell : params.cells) kernels.emplace_back(cell);

  // base selected log-conditionals / phases per (site, column)
  numerics::Matrix base_lp(n, n_cols), base_phi;
  if (has_phase) base_phi.resize(n, n_cols);
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n_cols; ++k) {
      const int sel = rnn::onehot_index(tape.spins(m, k));
      base_lp(m, k) = selected_logp(tape.logits_p[m], sel, k);
      if (has_phase) base_phi(m, k) = selected_phase(tape.logits_phi[m], sel, k);
    }

  const numerics::Matrix zero_h = numerics::Matrix::Zero(params.shape.hidden, n_cols);
  std::vector<std::vector<numerics::Matrix>> recomputed(
      n_layers, std::vector<numerics::Matrix>(n));
  numerics::Matrix x(2, n_cols), lp, la;
  Eigen::VectorXd dlp(n_cols), dphi(n_cols);

  Eigen::VectorXcd out(n_cols);
  for (int k = 0; k < n_cols; ++k) {
    double diag = 0.0;
    if (spec.kind == hamiltonians::Kind::TfimPbc)
      for (int i = 0; i < n; ++i)
        diag -= batch.configs(i, k) * batch.configs((i + 1) % n, k);
    out(k) = diag;
  }

  auto flipped_at = [](const hamiltonians::OffDiagTerm& term, int site) {
    for (int f : term.flips)
      if (f == site) return true;
    return false;
  };

  for (const auto& term : terms) {
    const int i0 = *std::min_element(term.flips.begin(), term.flips.end());

    // the flipped site's own conditional changes selection only
    for (int k = 0; k < n_cols; ++k) {
      const int sel = 1 - rnn::onehot_index(tape.spins(i0, k));
      dlp(k) = selected_logp(tape.logits_p[i0], sel, k) - base_lp(i0, k);
      if (has_phase) dphi(k) = selected_phase(tape.logits_phi[i0], sel, k) - base_phi(i0, k);
    }

    for (int m = i0 + 1; m < n; ++m) {
      const bool input_flipped = flipped_at(term, m - 1);
      x.setZero();
      for (int k = 0; k < n_cols; ++k) {
        const double spin = input_flipped ? -tape.spins(m - 1, k) : tape.spins(m - 1, k);
        x(rnn::onehot_index(spin), k) = 1.0;
      }
      const numerics::Matrix* in = &x;
      for (int l = 0; l < n_layers; ++l) {
        const int s = params.shape.dilation(l);
        const numerics::Matrix& h_rec = m - s > i0 ? recomputed[l][m - s]
                                        : m >= s   ? tape.hidden[l][m - s]
                                                   : zero_h;
        recomputed[l][m] = kernels[l].apply(h_rec, *in);
        in = &recomputed[l][m];
      }
      lp.noalias() = params.prob_head.weight * (*in);
      lp.colwise() += params.prob_head.bias;
      if (has_phase) {
        la.noalias() = params.phase_head->weight * (*in);
        la.colwise() += params.phase_head->bias;
      }
      const bool sel_flipped = flipped_at(term, m);
      for (int k = 0; k < n_cols; ++k) {
        const double spin = sel_flipped ? -tape.spins(m, k) : tape.spins(m, k);
        const int sel = rnn::onehot_index(spin);
        dlp(k) += selected_logp(lp, sel, k) - base_lp(m, k);
        if (has_phase) dphi(k) += selected_phase(la, sel, k) - base_phi(m, k);
      }
    }

    for (int k = 0; k < n_cols; ++k) {
      double coeff = term.factor;
      for (int site : term.z_sites) coeff *= batch.configs(site, k);
      out(k) += coeff * std::exp(std::complex<double>(0.5 * dlp(k),
                                                      has_phase ? dphi(k) : 0.0));
    }
  }
  return out;
}

}  // namespace

Eigen::VectorXcd local_energies_batch(const ModelParams& params,
                                      const HamiltonianSpec& spec,
                                      const SampleBatch& batch,
                                      const rnn::ForwardTape* base_tape) {
  const int n = spec.n_sites;
  const int n_cols = batch.n_samples();
  if (batch.n_sites() != n) throw ShapeError("local_energies_batch: site count mismatch");
  if (spec.kind == hamiltonians::Kind::ClusterEs && n < 4)
    throw ConfigError("cluster local energy needs at least 4 sites");
  if (base_tape) return local_energies_resume(params, spec, batch, *base_tape);

  const auto terms = hamiltonians::off_diagonal_terms(spec);
  const int n_terms = static_cast<int>(terms.size());

  rnn::SpinMatrix flipped(n, static_cast<Eigen::Index>(n_cols) * n_terms);
  for (int k = 0; k < n_cols; ++k)
    for (int t = 0; t < n_terms; ++t) {
      auto col = flipped.col(static_cast<Eigen::Index>(k) * n_terms + t);
      col = batch.configs.col(k);
      for (int site : terms[t].flips) col(site) = -col(site);
    }

  Vector logp2, phase2;
  rnn::forward_eval(params, flipped, &logp2, &phase2, nullptr);

  Eigen::VectorXcd out(n_cols);
  for (int k = 0; k < n_cols; ++k) {
    double diag = 0.0;
    if (spec.kind == hamiltonians::Kind::TfimPbc)
      for (int i = 0; i < n; ++i)
        diag -= batch.configs(i, k) * batch.configs((i + 1) % n, k);
    std::complex<double> e(diag, 0.0);
    for (int t = 0; t < n_terms; ++t) {
      double coeff = terms[t].factor;
      for (int site : terms[t].z_sites) coeff *= batch.configs(site, k);
      const Eigen::Index c = static_cast<Eigen::Index>(k) * n_terms + t;
      e += coeff * std::exp(std::complex<double>(
                       0.5 * (logp2(c) - batch.log_probs(k)),
                       phase2(c) - batch.phases(k)));
    }
    out(k) = e;
  }
  return out;
}

namespace {

struct BlockRange {
  int begin, count;
};

std::vector<BlockRange> make_blocks(int total, int block) {
  std::vector<BlockRange> out;
  for (int at = 0; at < total; at += block) out.push_back({at, std::min(block, total - at)});
  return out;
}

EnergyEstimate reduce_energy(const Eigen::VectorXcd& e) {
  const Eigen::Index m = e.size();
  std::complex<double> mean(0.0, 0.0);
  for (Eigen::Index k = 0; k < m; ++k) mean += e(k);
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) var += std::norm(e(k) - mean);
  var /= static_cast<double>(m - 1);
  return {mean, std::sqrt(var / static_cast<double>(m))};
}

}  // namespace

EnergyEstimate estimate_energy(const ModelParams& params, const HamiltonianSpec& spec,
                               int n_samples, std::uint64_t seed,
                               std::uint64_t stream_base) {
  if (n_samples < 2) throw ConfigError("estimate_energy: n_samples must be >= 2");
  const auto blocks = make_blocks(n_samples, kEvalBlock);
  Eigen::VectorXcd energies(n_samples);

#pragma omp parallel for schedule(dynamic)
  for (size_t b = 0; b < blocks.size(); ++b) {
    rnn::ForwardTape tape;
    tape.full = false;  // hidden states and logits only
    auto batch = wavefunction::sample_batch(params, spec.n_sites, blocks[b].count, seed,
                                            stream_base + blocks[b].begin, &tape);
    energies.segment(blocks[b].begin, blocks[b].count) =
        local_energies_batch(params, spec, batch, &tape);
  }
  return reduce_energy(energies);
}

Vector estimate_gradient(const ModelParams& params, const SampleBatch& batch) {
  const int m = batch.n_samples();
  if (static_cast<int>(batch.log_derivs.size()) != m)
    throw ShapeError("estimate_gradient: batch lacks per-sample log-derivative records");
  if (batch.local_energies.size() != m)
    throw ShapeError("estimate_gradient: batch lacks local energies");

  std::complex<double> mean(0.0, 0.0);
  for (int k = 0; k < m; ++k) mean += batch.local_energies(k);
  mean /= static_cast<double>(m);

  Vector grad = Vector::Zero(params.n_params());
  for (int k = 0; k < m; ++k) {
    const std::complex<double> w = batch.local_energies(k) - mean;
    grad += (2.0 / m) * (w * batch.log_derivs[k].array()).real().matrix();
  }
  return grad;
}

ModelParams weighted_gradient(const ModelParams& params, const rnn::ForwardTape& tape,
                              const Eigen::VectorXcd& local_energies,
                              std::complex<double> energy_mean, double inv_m) {
  const int m = tape.batch;
  auto dlp = wavefunction::dlogits_logprob(tape);
  // 2 Re[(E - Ebar)(0.5 dlogP - i dphi)] = Re(E - Ebar) dlogP + 2 Im(E - Ebar) dphi
  Eigen::ArrayXd wa(m), wb(m);
  for (int k = 0; k < m; ++k) {
    const std::complex<double> d = local_energies(k) - energy_mean;
    wa(k) = inv_m * d.real();
    wb(k) = inv_m * 2.0 * d.imag();
  }
  for (auto& mtx : dlp) mtx.array().rowwise() *= wa.transpose();

  std::vector<numerics::Matrix> dlphi;
  if (params.phase_head) {
    dlphi = wavefunction::dlogits_phase(tape);
    for (auto& mtx : dlphi) mtx.array().rowwise() *= wb.transpose();
  }
  return rnn::backward(params, tape, dlp, dlphi);
}

namespace {

void write_metrics_row(std::FILE* f, const IterationStats& s) {
  std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.6f\n", s.iteration, s.energy_mean,
               s.energy_stderr, s.grad_norm, s.seconds);
}

}  // namespace

TrainResult train(const VmcConfig& config, const std::string& resume_from) {
  config.validate();
  const auto& spec = config.hamiltonian;
  const int n_sites = spec.n_sites;
  const int n_samples = config.n_samples;

  ModelParams params = ModelParams::zeros(config.model);
  AdamState adam = AdamState::zeros(params.n_params());
  int start_iter = 0;

  if (!resume_from.empty()) {
    Checkpoint ckpt = load_checkpoint(resume_from);
    if (ckpt.shape.n_layers != config.model.n_layers || ckpt.shape.hidden != config.model.hidden ||
        ckpt.shape.complex_phase != config.model.complex_phase || ckpt.n_sites != n_sites)
      throw ConfigError("resume: checkpoint shape does not match the configuration");
    params = ModelParams::from_flat(config.model, ckpt.theta);
    adam = std::move(ckpt.adam);
    start_iter = static_cast<int>(adam.step);
  } else {
    numerics::RngStream init_rng(config.seed, kInitStream);
    params = ModelParams::init(config.model, init_rng);
  }

  const bool to_disk = !config.out_dir.empty();
  std::FILE* metrics = nullptr;
  std::filesystem::path dir(config.out_dir);
  if (to_disk) {
    std::filesystem::create_directories(dir);
    const auto path = dir / "metrics.csv";
    const bool append = start_iter > 0 && std::filesystem::exists(path);
    metrics = std::fopen(path.c_str(), append ? "a" : "w");
    if (!metrics) throw IoError("cannot open " + path.string());
    if (!append) std::fprintf(metrics, "iter,energy_mean,energy_stderr,grad_norm,seconds\n");
  }

  const auto blocks = make_blocks(n_samples, kTrainBlock);
  const int n_blocks = static_cast<int>(blocks.size());
  Vector theta = params.flatten();

  TrainResult result{params, {}};
  std::vector<rnn::ForwardTape> tapes(n_blocks);
  std::vector<SampleBatch> batches(n_blocks);
  std::vector<Eigen::VectorXcd> block_e(n_blocks);
  std::vector<ModelParams> block_grads;

  for (int iter = start_iter; iter < config.n_iterations; ++iter) {
    const double t0 = omp_get_wtime();
    const std::uint64_t stream0 =
        kTrainStreamBase + static_cast<std::uint64_t>(iter) * n_samples;

#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < n_blocks; ++b) {
      batches[b] = wavefunction::sample_batch(params, n_sites, blocks[b].count,
                                              config.seed, stream0 + blocks[b].begin,
                                              &tapes[b]);
      block_e[b] = local_energies_batch(params, spec, batches[b], &tapes[b]);
    }

    Eigen::VectorXcd energies(n_samples);
    for (int b = 0; b < n_blocks; ++b)
      energies.segment(blocks[b].begin, blocks[b].count) = block_e[b];
    const EnergyEstimate est = reduce_energy(energies);
    if (!std::isfinite(est.mean.real()) || !std::isfinite(est.mean.imag()))
      throw Error("train: non-finite energy at iteration " + std::to_string(iter));

    block_grads.assign(n_blocks, ModelParams());
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < n_blocks; ++b)
      block_grads[b] = weighted_gradient(params, tapes[b], block_e[b], est.mean,
                                         1.0 / n_samples);

    ModelParams grad = std::move(block_grads[0]);
    for (int b = 1; b < n_blocks; ++b) grad.axpy(1.0, block_grads[b]);
    const Vector g = grad.flatten();

    adam_step(adam, theta, g, config.learning_rate);
    params = ModelParams::from_flat(config.model, theta);

    IterationStats stats;
    stats.iteration = iter;
    stats.energy_mean = est.mean.real();
    stats.energy_stderr = est.stderr;
    stats.grad_norm = g.norm();
    stats.seconds = omp_get_wtime() - t0;
    result.record.iterations.push_back(stats);

    if (metrics) {
      write_metrics_row(metrics, stats);
      if (std::ferror(metrics))
        throw IoError("train: metrics write failed at iteration " + std::to_string(iter));
    }

    if (to_disk && (iter + 1) % config.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_%06d.dnqs", iter + 1);
      save_checkpoint((dir / name).string(),
                      {config.model, n_sites, config.seed, theta, adam});
      std::fflush(metrics);
    }
  }

  if (metrics) std::fclose(metrics);
  if (to_disk)
    save_checkpoint((dir / "final.dnqs").string(),
                    {config.model, n_sites, config.seed, theta, adam});

  result.params = params;
  return result;
}

// --- checkpoint io ----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'N', 'Q', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_vec(std::ofstream& f, const Vector& v) {
  f.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Vector read_vec(std::ifstream& f, Eigen::Index n) {
  Vector v(n);
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path);
  f.write(kMagic, 4);
  write_pod(f, kVersion);
  write_pod(f, static_cast<std::uint32_t>(ckpt.shape.n_layers));
  write_pod(f, static_cast<std::uint32_t>(ckpt.shape.hidden));
  write_pod(f, static_cast<std::uint32_t>(ckpt.n_sites));
  write_pod(f, static_cast<std::uint32_t>(ckpt.shape.complex_phase ? 1 : 0));
  write_pod(f, ckpt.seed);
  write_pod(f, static_cast<std::uint64_t>(ckpt.theta.size()));
  write_vec(f, ckpt.theta);
  write_vec(f, ckpt.adam.m);
  write_vec(f, ckpt.adam.v);
  write_pod(f, static_cast<std::uint64_t>(ckpt.adam.step));
  if (!f) throw IoError("short write on checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError(path + " is not a DNQS checkpoint");
  const auto version = read_pod<std::uint32_t>(f);
  if (version != kVersion)
    throw CheckpointVersionError(path + ": checkpoint version " + std::to_string(version) +
                                 ", expected " + std::to_string(kVersion));
  Checkpoint ckpt;
  ckpt.shape.n_layers = static_cast<int>(read_pod<std::uint32_t>(f));
  ckpt.shape.hidden = static_cast<int>(read_pod<std::uint32_t>(f));
  ckpt.n_sites = static_cast<int>(read_pod<std::uint32_t>(f));
  ckpt.shape.complex_phase = read_pod<std::uint32_t>(f) != 0;
  ckpt.seed = read_pod<std::uint64_t>(f);
  const auto n = static_cast<Eigen::Index>(read_pod<std::uint64_t>(f));
  ckpt.theta = read_vec(f, n);
  ckpt.adam = AdamState::zeros(n);
  ckpt.adam.m = read_vec(f, n);
  ckpt.adam.v = read_vec(f, n);
  ckpt.adam.step = static_cast<std::int64_t>(read_pod<std::uint64_t>(f));
  if (!f) throw IoError("truncated checkpoint " + path);
  return ckpt;
}

}  // namespace dnqs::vmc
