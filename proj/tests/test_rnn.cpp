#include <doctest.h>

#include <cmath>

#include "dnqs/rnn.hpp"
#include "oracles.hpp"

using namespace dnqs;
using namespace dnqs::rnn;

TEST_SUITE_BEGIN("rnn");

TEST_CASE("gru_step: zero parameters give zero state") {
  CellParams cell = CellParams::zeros(3, 2);
  Vector h = Vector::Zero(3), x = Vector::Zero(2);
  x(1) = 1.0;
  const auto [h_new, cache] = gru_step(cell, h, x);
  CHECK(h_new.norm() == 0.0);  // tanh(0) = 0, h_prev = 0
  CHECK(cache.gate(0) == doctest::Approx(0.5));
  CHECK(cache.reset(0) == doctest::Approx(0.5));
}

TEST_CASE("gru_step: saturated update gate hands over to the candidate") {
  CellParams cell = CellParams::zeros(2, 2);
  cell.b_gate.setConstant(50.0);  // g -> 1
  cell.b_cand_in << 0.3, -0.7;
  Vector h = Vector::Zero(2), x = Vector::Zero(2);
  const auto [h_new, cache] = gru_step(cell, h, x);
  CHECK(h_new(0) == doctest::Approx(std::tanh(0.3)).epsilon(1e-12));
  CHECK(h_new(1) == doctest::Approx(std::tanh(-0.7)).epsilon(1e-12));
}

TEST_CASE("gru_step matches the straight-line scalar oracle") {
  numerics::RngStream rng(21, 0);
  for (int trial = 0; trial < 20; ++trial) {
    CellParams cell = CellParams::zeros(3, 2);
    auto fill = [&rng](auto& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.next_uniform(-1.0, 1.0);
    };
    fill(cell.w_gate);
    fill(cell.w_reset);
    fill(cell.w_cand_hid);
    fill(cell.w_cand_in);
    fill(cell.b_gate);
    fill(cell.b_reset);
    fill(cell.b_cand_hid);
    fill(cell.b_cand_in);
    Vector h(3), x(2);
    fill(h);
    fill(x);
    const auto [h_new, cache] = gru_step(cell, h, x);
    const Vector ref = oracles::gru_scalar(cell, h, x);
    CHECK((h_new - ref).lpNorm<Eigen::Infinity>() < 1e-14);
  }
}

TEST_CASE("gru_step rejects mismatched shapes") {
  CellParams cell = CellParams::zeros(3, 2);
  CHECK_THROWS_AS(gru_step(cell, Vector::Zero(4), Vector::Zero(2)), ShapeError);
  CHECK_THROWS_AS(gru_step(cell, Vector::Zero(3), Vector::Zero(3)), ShapeError);
}

TEST_CASE("dilated_forward: zero parameters mean fair conditionals") {
  ModelShape shape{2, 4, false};
  ModelParams params = ModelParams::zeros(shape);
  const auto res = dilated_forward(params, {1, -1, 1, -1});
  for (const auto& lp : res.logits_p) {
    CHECK(lp(0) == 0.0);
    CHECK(lp(1) == 0.0);  // softmax of zeros = [0.5, 0.5]
  }
}

TEST_CASE("dilated_forward matches the scalar reference wiring") {
  numerics::RngStream cfg_rng(77, 3);
  for (int trial = 0; trial < 12; ++trial) {
    const int n_sites = 4 + static_cast<int>(cfg_rng.next_double() * 4);  // 4..7
    const int max_l = ModelShape::max_layers(n_sites);
    ModelShape shape;
    shape.n_layers = 1 + static_cast<int>(cfg_rng.next_double() * max_l);
    shape.n_layers = std::min(shape.n_layers, max_l);
    shape.hidden = 2 + static_cast<int>(cfg_rng.next_double() * 3);
    shape.complex_phase = trial % 2 == 1;
    ModelParams params = oracles::random_model(shape, 1000 + trial);
    const SpinConfig sigma = oracles::random_config(n_sites, cfg_rng);

    const auto res = dilated_forward(params, sigma);
    const auto ref = oracles::reference_dilated_forward(params, sigma);
    for (int n = 0; n < n_sites; ++n) {
      CHECK((res.logits_p[n] - ref.prob[n]).lpNorm<Eigen::Infinity>() < 1e-12);
      if (shape.complex_phase)
        CHECK((res.logits_phi[n] - ref.phase[n]).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("dilated wiring: at N=5, L=3 the top layer reaches back 4 sites") {
  // make layer 3 an identity-ish probe: its recurrent input at site 5 must be
  // its own site-1 state, which the reference implementation pins by
  // construction; compare hidden dynamics through the public logits instead
  ModelShape shape{3, 3, false};
  ModelParams params = oracles::random_model(shape, 5);
  SpinConfig sigma{1, 1, 1, 1, 1};

  const auto base = dilated_forward(params, sigma);
  // change the spin at site 1 only; with all-shared weights the layer-3
  // recurrent edge from site 1 is the only O(1)-hop path to site 5
  SpinConfig poked = sigma;
  poked[0] = -1;
  const auto poke = dilated_forward(params, poked);
  // logits at site 5 differ (information propagated), and the dependence
  // matches the scalar reference on the poked configuration
  const auto ref = oracles::reference_dilated_forward(params, poked);
  CHECK((poke.logits_p[4] - ref.prob[4]).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((poke.logits_p[4] - base.logits_p[4]).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("depth limit enforced") {
  ModelShape shape{4, 2, false};  // 2^3 = 8 >= 5 already at L=3
  ModelParams params = ModelParams::zeros(shape);
  CHECK_THROWS_AS(dilated_forward(params, SpinConfig(5, 1)), ConfigError);
  CHECK(ModelShape::max_layers(5) == 3);
  CHECK(ModelShape::max_layers(16) == 4);
  CHECK(ModelShape::max_layers(100) == 7);
  CHECK(ModelShape::max_layers(1) == 1);
}

TEST_CASE("single layer forward equals a direct per-site loop bitwise") {
  ModelShape shape{1, 4, true};
  ModelParams params = oracles::random_model(shape, 9);
  const SpinConfig sigma{1, -1, -1, 1, 1, -1};

  const auto res = dilated_forward(params, sigma);

  // direct single-layer wiring: h_n from [h_{n-1}; onehot(sigma_{n-1})]
  Vector h = Vector::Zero(4);
  for (size_t n = 0; n < sigma.size(); ++n) {
    Vector x = Vector::Zero(2);
    if (n > 0) x(sigma[n - 1] > 0 ? 1 : 0) = 1.0;
    h = gru_step(params.cells[0], h, x).first;
    const Vector lp = params.prob_head.weight * h + params.prob_head.bias;
    const Vector la = params.phase_head->weight * h + params.phase_head->bias;
    CHECK((res.logits_p[n] - lp).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((res.logits_phi[n] - la).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("conditionals are normalized probabilities for random models") {
  numerics::RngStream cfg_rng(13, 0);
  for (int trial = 0; trial < 10; ++trial) {
    ModelShape shape{2, 3, true};
    ModelParams params = oracles::random_model(shape, 300 + trial);
    const SpinConfig sigma = oracles::random_config(6, cfg_rng);
    const auto res = dilated_forward(params, sigma);
    for (const auto& lp : res.logits_p) {
      const Vector p = numerics::softmax(lp);
      CHECK(p(0) > 0.0);
      CHECK(p(1) > 0.0);
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    }
    for (const auto& la : res.logits_phi) {
      const Vector phi = numerics::softsign_pi(la);
      CHECK(std::abs(phi(0)) < M_PI);
      CHECK(std::abs(phi(1)) < M_PI);
    }
  }
}

namespace {

// scalar objective sum_n dlogits . logits for finite differencing
double logits_objective(const ModelShape& shape, const Vector& theta,
                        const SpinConfig& sigma, const std::vector<Vector>& dlp,
                        const std::vector<Vector>& dlphi) {
  const ModelParams params = ModelParams::from_flat(shape, theta);
  const auto res = dilated_forward(params, sigma);
  double acc = 0.0;
  for (size_t n = 0; n < sigma.size(); ++n) {
    acc += dlp[n].dot(res.logits_p[n]);
    if (!dlphi.empty()) acc += dlphi[n].dot(res.logits_phi[n]);
  }
  return acc;
}

}  // namespace

TEST_CASE("backward: zero upstream gradient gives zero parameter gradient") {
  ModelShape shape{2, 3, true};
  ModelParams params = oracles::random_model(shape, 17);
  const SpinConfig sigma{1, -1, 1, 1};
  const auto res = dilated_forward(params, sigma);
  std::vector<Vector> dlp(4, Vector::Zero(2)), dlphi(4, Vector::Zero(2));
  const ModelParams grad = dilated_backward(params, res.tape, dlp, dlphi);
  CHECK(grad.flatten().norm() == 0.0);
}

TEST_CASE("backward is linear: doubling upstream doubles the record bitwise") {
  ModelShape shape{2, 3, true};
  ModelParams params = oracles::random_model(shape, 18);
  const SpinConfig sigma{1, -1, -1, 1};
  const auto res = dilated_forward(params, sigma);
  numerics::RngStream rng(18, 5);
  std::vector<Vector> dlp, dlphi, dlp2, dlphi2;
  for (int n = 0; n < 4; ++n) {
    Vector a(2), b(2);
    for (int i = 0; i < 2; ++i) {
      a(i) = rng.next_uniform(-1, 1);
      b(i) = rng.next_uniform(-1, 1);
    }
    dlp.push_back(a);
    dlphi.push_back(b);
    dlp2.push_back(2.0 * a);
    dlphi2.push_back(2.0 * b);
  }
  const Vector g1 = dilated_backward(params, res.tape, dlp, dlphi).flatten();
  const Vector g2 = dilated_backward(params, res.tape, dlp2, dlphi2).flatten();
  CHECK((g2 - 2.0 * g1).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("backward touches only the corresponding head") {
  ModelShape shape{2, 3, true};
  ModelParams params = oracles::random_model(shape, 19);
  const SpinConfig sigma{1, -1, 1};
  const auto res = dilated_forward(params, sigma);

  std::vector<Vector> ones(3, Vector::Ones(2)), zeros(3, Vector::Zero(2));
  const ModelParams g_prob_only = dilated_backward(params, res.tape, ones, zeros);
  CHECK(g_prob_only.phase_head->weight.norm() == 0.0);
  CHECK(g_prob_only.phase_head->bias.norm() == 0.0);
  CHECK(g_prob_only.prob_head.weight.norm() > 0.0);

  const ModelParams g_phase_only = dilated_backward(params, res.tape, zeros, ones);
  CHECK(g_phase_only.prob_head.weight.norm() == 0.0);
  CHECK(g_phase_only.prob_head.bias.norm() == 0.0);
  CHECK(g_phase_only.phase_head->weight.norm() > 0.0);
}

TEST_CASE("backward agrees with central finite differences") {
  numerics::RngStream cfg_rng(23, 2);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    ModelShape shape;
    shape.hidden = 2 + static_cast<int>(cfg_rng.next_double() * 3);   // 2..4
    const int n_sites = 3 + static_cast<int>(cfg_rng.next_double() * 4);  // 3..6
    shape.n_layers =
        1 + static_cast<int>(cfg_rng.next_double() * std::min(3, ModelShape::max_layers(n_sites)));
    shape.n_layers = std::min(shape.n_layers, ModelShape::max_layers(n_sites));
    shape.complex_phase = true;
    const ModelParams params = oracles::random_model(shape, 500 + trial);
    const SpinConfig sigma = oracles::random_config(n_sites, cfg_rng);
    const Vector theta0 = params.flatten();

    std::vector<Vector> dlp, dlphi;
    for (int n = 0; n < n_sites; ++n) {
      Vector a(2), b(2);
      for (int i = 0; i < 2; ++i) {
        a(i) = cfg_rng.next_uniform(-1, 1);
        b(i) = cfg_rng.next_uniform(-1, 1);
      }
      dlp.push_back(a);
      dlphi.push_back(b);
    }

    const auto res = dilated_forward(params, sigma);
    const Vector analytic = dilated_backward(params, res.tape, dlp, dlphi).flatten();
    const Vector numeric = oracles::finite_difference_gradient(
        [&](const Vector& theta) { return logits_objective(shape, theta, sigma, dlp, dlphi); },
        theta0);

    const double rel = (analytic - numeric).lpNorm<Eigen::Infinity>() /
                       std::max(1.0, numeric.lpNorm<Eigen::Infinity>());
    worst = std::max(worst, rel);
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("flatten/from_flat round trip") {
  ModelShape shape{3, 5, true};
  const ModelParams params = oracles::random_model(shape, 31);
  const Vector theta = params.flatten();
  const ModelParams back = ModelParams::from_flat(shape, theta);
  CHECK((back.flatten() - theta).norm() == 0.0);
  CHECK(params.n_params() == theta.size());
}

TEST_CASE("hidden stack ring semantics") {
  ModelShape shape{3, 2, false};
  HiddenStack stack(shape, 1);
  CHECK(stack.recurrent(2, 3).norm() == 0.0);  // site 3 < dilation 4
  for (int n = 0; n < 6; ++n) {
    Matrix h(2, 1);
    h << n, -n;
    stack.push(0, n, h);
    stack.push(1, n, h);
    stack.push(2, n, h);
  }
  CHECK(stack.recurrent(0, 6)(0, 0) == 5.0);  // lag 1
  CHECK(stack.recurrent(1, 6)(0, 0) == 4.0);  // lag 2
  CHECK(stack.recurrent(2, 6)(0, 0) == 2.0);  // lag 4
  CHECK(stack.stored(0) == 1);
  CHECK(stack.stored(2) == 4);
}

TEST_SUITE_END();
