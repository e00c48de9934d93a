#include "dnqs/hamiltonians.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace dnqs::hamiltonians {

void HamiltonianSpec::validate() const {
  if (kind == Kind::TfimPbc) {
    if (n_sites < 2) throw ConfigError("TFIM needs at least 2 sites");
    if (field < 0.0) throw ConfigError("TFIM field must be >= 0");
  } else {
    if (n_sites < 3) throw ConfigError("cluster Hamiltonian needs at least 3 sites");
  }
}

std::string HamiltonianSpec::name() const {
  return kind == Kind::TfimPbc ? "tfim_pbc" : "cluster_es";
}

std::vector<OffDiagTerm> off_diagonal_terms(const HamiltonianSpec& spec) {
  spec.validate();
  const int n = spec.n_sites;
  std::vector<OffDiagTerm> terms;
  if (spec.kind == Kind::TfimPbc) {
    // -g sum_i sigma^x_i
    for (int i = 0; i < n; ++i) terms.push_back({{i}, {}, -spec.field});
    return terms;
  }
  // bulk: -sigma^x_{k-1} sigma^z_k sigma^x_{k+1} for centers k = 2..N-2 (1-based)
  for (int c = 1; c <= n - 3; ++c) terms.push_back({{c - 1, c + 1}, {c}, -1.0});
  // boundary: -sigma^z_1 sigma^x_2, -sigma^x_{N-1} sigma^x_N,
  //           -sigma^x_{N-2} sigma^z_{N-1} sigma^z_N
  terms.push_back({{1}, {0}, -1.0});
  terms.push_back({{n - 2, n - 1}, {}, -1.0});
  terms.push_back({{n - 3}, {n - 2, n - 1}, -1.0});
  return terms;
}

double diagonal_energy(const HamiltonianSpec& spec, const SpinConfig& sigma) {
  if (spec.kind != Kind::TfimPbc) return 0.0;
  const int n = spec.n_sites;
  double e = 0.0;
  for (int i = 0; i < n; ++i) e -= sigma[i] * sigma[(i + 1) % n];
  return e;
}

namespace {

std::complex<double> ratio(const AmplitudeResult& num, const AmplitudeResult& den) {
  // psi'/psi in log space: exp(0.5 dlogP + i dphi)
  return std::exp(std::complex<double>(0.5 * (num.log_prob - den.log_prob),
                                       num.phase - den.phase));
}

}  // namespace

std::complex<double> local_energy(const HamiltonianSpec& spec, const SpinConfig& sigma,
                                  const AmplitudeFn& amp_of) {
  if (static_cast<int>(sigma.size()) != spec.n_sites)
    throw ShapeError("local_energy: configuration size does not match the spec");
  if (spec.kind == Kind::ClusterEs && spec.n_sites < 4)
    throw ConfigError("cluster local energy needs at least 4 sites");

  const AmplitudeResult base = amp_of(sigma);
  std::complex<double> e = diagonal_energy(spec, sigma);
  SpinConfig flipped = sigma;
  for (const auto& term : off_diagonal_terms(spec)) {
    for (int site : term.flips) flipped[site] = -flipped[site];
    double coeff = term.factor;
    for (int site : term.z_sites) coeff *= sigma[site];
    e += coeff * ratio(amp_of(flipped), base);
    for (int site : term.flips) flipped[site] = -flipped[site];
  }
  return e;
}

std::complex<double> local_energy_tfim(const HamiltonianSpec& spec, const SpinConfig& sigma,
                                       const AmplitudeFn& amp_of) {
  if (spec.kind != Kind::TfimPbc) throw ConfigError("local_energy_tfim: wrong kind");
  return local_energy(spec, sigma, amp_of);
}

std::complex<double> local_energy_cluster(const HamiltonianSpec& spec,
                                          const SpinConfig& sigma,
                                          const AmplitudeFn& amp_of) {
  if (spec.kind != Kind::ClusterEs) throw ConfigError("local_energy_cluster: wrong kind");
  return local_energy(spec, sigma, amp_of);
}

void apply_hamiltonian(const HamiltonianSpec& spec, const Vector& in, Vector& out) {
  spec.validate();
  const int n = spec.n_sites;
  const std::uint64_t dim = 1ull << n;
  if (in.size() != static_cast<Eigen::Index>(dim))
    throw ShapeError("apply_hamiltonian: state vector has wrong dimension");
  out.setZero(dim);

  const auto terms = off_diagonal_terms(spec);
  std::vector<std::uint64_t> masks;
  for (const auto& t : terms) {
    std::uint64_t m = 0;
    for (int site : t.flips) m |= 1ull << site;
    masks.push_back(m);
  }

  for (std::uint64_t s = 0; s < dim; ++s) {
    const double amp = in(s);
    if (spec.kind == Kind::TfimPbc) {
      double diag = 0.0;
      for (int i = 0; i < n; ++i) {
        const double zi = (s >> i) & 1 ? 1.0 : -1.0;
        const double zj = (s >> ((i + 1) % n)) & 1 ? 1.0 : -1.0;
        diag -= zi * zj;
      }
      out(s) += diag * amp;
    }
    for (size_t t = 0; t < terms.size(); ++t) {
      double coeff = terms[t].factor;
      for (int site : terms[t].z_sites) coeff *= (s >> site) & 1 ? 1.0 : -1.0;
      out(s ^ masks[t]) += coeff * amp;
    }
  }
}

namespace {

EdResult dense_ground_state(const HamiltonianSpec& spec) {
  const std::uint64_t dim = 1ull << spec.n_sites;
  numerics::Matrix h(dim, dim);
  Vector basis = Vector::Zero(dim), column(dim);
  for (std::uint64_t j = 0; j < dim; ++j) {
    basis(j) = 1.0;
    apply_hamiltonian(spec, basis, column);
    h.col(j) = column;
    basis(j) = 0.0;
  }
  Eigen::SelfAdjointEigenSolver<numerics::Matrix> solver(h);
  EdResult res;
  res.energy = solver.eigenvalues()(0);
  res.ground = solver.eigenvectors().col(0);
  return res;
}

EdResult lanczos_ground_state(const HamiltonianSpec& spec) {
  const std::uint64_t dim = 1ull << spec.n_sites;
  const int max_iter = 300;
  const double tol = 1e-13;

  std::vector<Vector> basis;
  std::vector<double> alpha, beta;  // tridiagonal entries

  numerics::RngStream rng(0x5EEDull, 0xED00ull);
  Vector v(dim);
  for (std::uint64_t i = 0; i < dim; ++i) v(i) = rng.next_uniform(-1.0, 1.0);
  v.normalize();

  Vector w(dim);
  double last_energy = 0.0;
  for (int j = 0; j < max_iter; ++j) {
    basis.push_back(v);
    apply_hamiltonian(spec, v, w);
    const double a = v.dot(w);
    alpha.push_back(a);
    w -= a * v;
    if (j > 0) w -= beta[j - 1] * basis[j - 1];
    // full reorthogonalization keeps the basis clean after convergence
    for (const auto& u : basis) w -= u.dot(w) * u;
    const double b = w.norm();

    const int m = static_cast<int>(alpha.size());
    numerics::Matrix tri = numerics::Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      tri(i, i) = alpha[i];
      if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta.size() > static_cast<size_t>(i)
                                                         ? beta[i]
                                                         : 0.0;
    }
    Eigen::SelfAdjointEigenSolver<numerics::Matrix> solver(tri);
    const double energy = solver.eigenvalues()(0);
    if (j > 10 && std::abs(energy - last_energy) < tol * std::max(1.0, std::abs(energy))) {
      EdResult res;
      res.energy = energy;
      res.ground = Vector::Zero(dim);
      const Vector y = solver.eigenvectors().col(0);
      for (int i = 0; i < m; ++i) res.ground += y(i) * basis[i];
      res.ground.normalize();
      return res;
    }
    last_energy = energy;
    if (b < 1e-14) break;  // invariant subspace exhausted
    beta.push_back(b);
    v = w / b;
  }

  // assemble from whatever converged
  const int m = static_cast<int>(alpha.size());
  numerics::Matrix tri = numerics::Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    tri(i, i) = alpha[i];
    if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<numerics::Matrix> solver(tri);
  EdResult res;
  res.energy = solver.eigenvalues()(0);
  res.ground = Vector::Zero(dim);
  const Vector y = solver.eigenvectors().col(0);
  for (int i = 0; i < m; ++i) res.ground += y(i) * basis[i];
  res.ground.normalize();
  return res;
}

}  // namespace

EdResult exact_diag(const HamiltonianSpec& spec) {
  spec.validate();
  if (spec.n_sites > 16)
    throw ResourceError("exact_diag: N = " + std::to_string(spec.n_sites) +
                        " exceeds the N <= 16 limit");
  if (spec.n_sites <= 10) return dense_ground_state(spec);
  return lanczos_ground_state(spec);
}

}  // namespace dnqs::hamiltonians
