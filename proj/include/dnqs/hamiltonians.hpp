#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "dnqs/wavefunction.hpp"

namespace dnqs::hamiltonians {

using numerics::Vector;
using rnn::SpinConfig;
using wavefunction::AmplitudeResult;

enum class Kind { TfimPbc, ClusterEs };

struct HamiltonianSpec {
  Kind kind = Kind::TfimPbc;
  int n_sites = 0;
  double field = 1.0;  // transverse field g, TFIM only

  void validate() const;
  std::string name() const;
};

// One sigma^x-carrying term: flips `flips`, picks up the product of spins at
// `z_sites`, with overall sign/coefficient `factor`.
struct OffDiagTerm {
  std::vector<int> flips;
  std::vector<int> z_sites;
  double factor = -1.0;
};

// The full local-energy decomposition: E_loc(sigma) = diagonal(sigma)
// + sum_t factor_t * prod_z sigma_z * psi(sigma flipped) / psi(sigma).
std::vector<OffDiagTerm> off_diagonal_terms(const HamiltonianSpec& spec);

// -sum_i sigma_i sigma_{i+1} (periodic) for TFIM; zero for the cluster
// Hamiltonian, whose terms all contain sigma^x.
double diagonal_energy(const HamiltonianSpec& spec, const SpinConfig& sigma);

using AmplitudeFn = std::function<AmplitudeResult(const SpinConfig&)>;

std::complex<double> local_energy(const HamiltonianSpec& spec, const SpinConfig& sigma,
                                  const AmplitudeFn& amp_of);
std::complex<double> local_energy_tfim(const HamiltonianSpec& spec, const SpinConfig& sigma,
                                       const AmplitudeFn& amp_of);
std::complex<double> local_energy_cluster(const HamiltonianSpec& spec,
                                          const SpinConfig& sigma,
                                          const AmplitudeFn& amp_of);

// H applied to a dense state vector over the 2^N basis (bit i set <=> spin +1
// at site i). Both Hamiltonians are real in this basis.
void apply_hamiltonian(const HamiltonianSpec& spec, const Vector& in, Vector& out);

struct EdResult {
  double energy = 0.0;
  Vector ground;  // 2^N amplitudes
};

// Ground energy/vector of the 2^N x 2^N real-symmetric matrix. Dense solve for
// small chains, Lanczos with full reorthogonalization above that; N <= 16.
EdResult exact_diag(const HamiltonianSpec& spec);

}  // namespace dnqs::hamiltonians
