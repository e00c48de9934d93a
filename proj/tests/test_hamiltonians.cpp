#include <doctest.h>

#include <cmath>
#include <complex>

#include "dnqs/hamiltonians.hpp"
#include "dnqs/vmc.hpp"
#include "oracles.hpp"

using namespace dnqs;
using namespace dnqs::hamiltonians;
using rnn::ModelParams;
using rnn::ModelShape;
using rnn::SpinConfig;

namespace {

AmplitudeFn amplitude_of(const ModelParams& params) {
  return [&params](const SpinConfig& sigma) { return wavefunction::evaluate(params, sigma); };
}

}  // namespace

TEST_SUITE_BEGIN("hamiltonians");

TEST_CASE("TFIM local energy closed cases") {
  ModelParams uniform = ModelParams::zeros({1, 2, false});

  HamiltonianSpec g0{Kind::TfimPbc, 4, 0.0};
  const auto e0 = local_energy_tfim(g0, {1, 1, 1, 1}, amplitude_of(uniform));
  CHECK(e0.real() == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(e0.imag() == 0.0);

  HamiltonianSpec g1{Kind::TfimPbc, 4, 1.0};
  const auto e1 = local_energy_tfim(g1, {1, 1, 1, 1}, amplitude_of(uniform));
  CHECK(e1.real() == doctest::Approx(-8.0).epsilon(1e-13));  // -4 diagonal, ratios all 1
}

TEST_CASE("cluster local energy has no diagonal part") {
  HamiltonianSpec spec{Kind::ClusterEs, 6};
  SpinConfig sigma{1, -1, 1, 1, -1, 1};
  CHECK(diagonal_energy(spec, sigma) == 0.0);
  CHECK(off_diagonal_terms(spec).size() == 6);  // N terms, every one flips spins
}

TEST_CASE("cluster local energy rejects short chains") {
  ModelParams uniform = ModelParams::zeros({1, 2, true});
  HamiltonianSpec spec{Kind::ClusterEs, 3};
  CHECK_THROWS_AS(local_energy_cluster(spec, {1, 1, 1}, amplitude_of(uniform)), ConfigError);
}

TEST_CASE("local energy equals (H psi)(sigma) / psi(sigma) from the dense apply") {
  numerics::RngStream rng(2024, 0);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 5 + trial % 2;
    const bool cluster = trial % 2 == 1;
    HamiltonianSpec spec{cluster ? Kind::ClusterEs : Kind::TfimPbc, n, 0.7};
    ModelParams params = oracles::random_model({2, 3, cluster}, 40 + trial);

    // psi over the full basis
    const std::uint64_t dim = 1ull << n;
    Eigen::VectorXcd psi(dim);
    for (std::uint64_t s = 0; s < dim; ++s) {
      const auto amp = wavefunction::evaluate(params, wavefunction::config_from_index(s, n));
      psi(s) = std::exp(std::complex<double>(0.5 * amp.log_prob, amp.phase));
    }
    numerics::Vector h_re(dim), h_im(dim);
    numerics::Vector re = psi.real(), im = psi.imag();
    apply_hamiltonian(spec, re, h_re);
    apply_hamiltonian(spec, im, h_im);

    for (int probe = 0; probe < 8; ++probe) {
      const std::uint64_t s = static_cast<std::uint64_t>(rng.next_double() * dim);
      const SpinConfig sigma = wavefunction::config_from_index(s, n);
      const std::complex<double> expected =
          std::complex<double>(h_re(s), h_im(s)) / psi(s);
      const std::complex<double> got = local_energy(spec, sigma, amplitude_of(params));
      CHECK(std::abs(got - expected) < 1e-9 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST_CASE("exact distribution average of E_loc equals <H> (both Hamiltonians)") {
  for (int trial = 0; trial < 20; ++trial) {
    const bool cluster = trial % 2 == 1;
    const int n = 6;
    HamiltonianSpec spec{cluster ? Kind::ClusterEs : Kind::TfimPbc, n, 1.0};
    ModelParams params = oracles::random_model({2, 3, cluster}, 600 + trial);

    const auto probs = wavefunction::enumerate_probabilities(params, n);
    const auto amp = amplitude_of(params);
    std::complex<double> mean(0, 0);
    for (std::uint64_t s = 0; s < probs.size(); ++s)
      mean += probs[s] * local_energy(spec, wavefunction::config_from_index(s, n), amp);

    const double exact = oracles::exact_energy_expectation(spec, params);
    CHECK(std::abs(mean.real() - exact) < 1e-9);
    CHECK(std::abs(mean.imag()) < 1e-9);
  }
}

TEST_CASE("TFIM local energy is exactly real in stoquastic mode") {
  ModelParams params = oracles::random_model({2, 4, false}, 8);
  HamiltonianSpec spec{Kind::TfimPbc, 6, 1.3};
  numerics::RngStream rng(8, 1);
  for (int t = 0; t < 10; ++t) {
    const auto e = local_energy(spec, oracles::random_config(6, rng), amplitude_of(params));
    CHECK(e.imag() == 0.0);
  }
}

TEST_CASE("exact diagonalization closed cases") {
  CHECK(exact_diag({Kind::TfimPbc, 3, 0.0}).energy == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(exact_diag({Kind::TfimPbc, 2, 0.0}).energy == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(exact_diag({Kind::ClusterEs, 8}).energy == doctest::Approx(-8.0).epsilon(1e-10));
  CHECK(exact_diag({Kind::ClusterEs, 4}).energy == doctest::Approx(-4.0).epsilon(1e-10));
}

TEST_CASE("dense ED matches the free-fermion closed form at N = 10") {
  const auto ed = exact_diag({Kind::TfimPbc, 10, 1.0});
  CHECK(std::abs(ed.energy - oracles::tfim_free_fermion_energy(10, 1.0)) < 1e-9);
}

TEST_CASE("Lanczos path agrees with the closed form and the stabilizer value") {
  const auto ed = exact_diag({Kind::TfimPbc, 12, 1.0});
  CHECK(std::abs(ed.energy - oracles::tfim_free_fermion_energy(12, 1.0)) < 1e-9);
  CHECK(exact_diag({Kind::ClusterEs, 12}).energy == doctest::Approx(-12.0).epsilon(1e-10));
}

TEST_CASE("exact_diag resource guard") {
  CHECK_THROWS_AS(exact_diag({Kind::TfimPbc, 17, 1.0}), ResourceError);
  CHECK_THROWS_AS(exact_diag({Kind::TfimPbc, 20, 1.0}), ResourceError);
}

TEST_CASE("ground vector satisfies H psi = E psi") {
  HamiltonianSpec spec{Kind::ClusterEs, 8};
  const auto ed = exact_diag(spec);
  numerics::Vector h_psi;
  apply_hamiltonian(spec, ed.ground, h_psi);
  CHECK((h_psi - ed.energy * ed.ground).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("sampled energy respects the variational principle") {
  HamiltonianSpec spec{Kind::TfimPbc, 6, 1.0};
  const double e0 = exact_diag(spec).energy;
  for (int trial = 0; trial < 5; ++trial) {
    ModelParams params = oracles::random_model({2, 4, false}, 70 + trial);
    const auto est = vmc::estimate_energy(params, spec, 2000, 11 + trial, 0);
    CHECK(est.mean.real() >= e0 - 5.0 * est.stderr);
  }
}

TEST_SUITE_END();
