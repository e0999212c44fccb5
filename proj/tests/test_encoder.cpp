// SPDX-License-Identifier: Apache-2.0

#include "semd/encoder.hpp"

#include "semd/emd_loss.hpp"
#include "semd/pyramid.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace semd;

namespace {

FeatureMap random_view(Index size, Rng& rng) {
  return testing::random_map(size, size, 3, rng, 0.0, 1.0);
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace

TEST_CASE("native grid sizes follow the stride-2 conv arithmetic") {
  CHECK(native_grid(56) == 7);
  CHECK(native_grid(28) == 4);
  CHECK(native_grid(16) == 2);
  CHECK(native_grid(8) == 1);
}

TEST_CASE("forward emits the shared grid and a 16-dim vector") {
  Rng rng(70);
  const EncoderParams params = EncoderParams::random_init(rng);

  const BranchOutput full = forward(params, random_view(56, rng), BranchRole::kQuery);
  CHECK(full.map.height() == 7);
  CHECK(full.map.width() == 7);
  CHECK(full.map.channels() == kProjDim);
  CHECK(full.vec.size() == kEmbedDim);

  // the half-resolution view lands on a 4x4 native grid, then the shared one
  const BranchOutput small = forward(params, random_view(28, rng), BranchRole::kQuery);
  CHECK(small.map.height() == 7);
  CHECK(small.map.width() == 7);
}

TEST_CASE("query and key branches differ exactly by the predictor") {
  Rng rng(71);
  const EncoderParams params = EncoderParams::random_init(rng);
  const FeatureMap view = random_view(56, rng);
  const BranchOutput query = forward(params, view, BranchRole::kQuery);
  const BranchOutput key = forward(params, view, BranchRole::kKey);

  NodeMatrix predicted = key.map.nodes() * params.pred_w.transpose();
  predicted.rowwise() += params.pred_b.transpose();
  CHECK((predicted - query.map.nodes()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(query.vec == key.vec);  // the vector head has no predictor
}

TEST_CASE("zero parameters give a zero map and zero vector") {
  Rng rng(72);
  const EncoderParams zeros = EncoderParams::zeros();
  const BranchOutput out = forward(zeros, random_view(56, rng), BranchRole::kQuery);
  CHECK((out.map.nodes().array() == 0.0).all());
  CHECK((out.vec.array() == 0.0).all());
}

TEST_CASE("parameter vector round-trip preserves every block") {
  Rng rng(73);
  const EncoderParams params = EncoderParams::random_init(rng);
  const EncoderParams back = EncoderParams::from_vector(params.to_vector());
  CHECK(back.to_vector() == params.to_vector());
  CHECK(back.conv_w[1] == params.conv_w[1]);
  CHECK(back.vec_b == params.vec_b);
}

TEST_CASE("ema endpoints are exact") {
  Rng rng(74);
  const EncoderParams theta = EncoderParams::random_init(rng);
  const EncoderParams xi = EncoderParams::random_init(rng);
  CHECK(ema_update(xi, theta, 0.0).to_vector() == theta.to_vector());
  CHECK(ema_update(xi, theta, 1.0).to_vector() == xi.to_vector());
}

TEST_CASE("ema gap contracts by exactly m per update when theta is zero") {
  // With theta = 0 the update reduces to one multiply, so the contraction
  // law holds bitwise for every m.
  Rng rng(75);
  const EncoderParams theta = EncoderParams::zeros();
  for (double m : {0.0, 0.5, 0.99, 1.0}) {
    EncoderParams xi = EncoderParams::random_init(rng);
    Vector expected_gap = xi.to_vector();
    for (int k = 0; k < 25; ++k) {
      xi = ema_update(xi, theta, m);
      expected_gap *= m;
      CHECK(xi.to_vector() == expected_gap);
    }
  }
}

TEST_CASE("ema gap contracts bitwise on dyadic data for dyadic m") {
  Rng rng(76);
  EncoderParams theta = EncoderParams::zeros();
  EncoderParams xi = EncoderParams::zeros();
  Vector t(theta.param_count());
  Vector x(t.size());
  for (Index i = 0; i < t.size(); ++i) {
    t(i) = 1.0 + static_cast<double>(rng.uniform_int(0, 15)) / 16.0;
    x(i) = t(i) + static_cast<double>(rng.uniform_int(-16, 16)) / 16.0;
  }
  theta = EncoderParams::from_vector(t);
  xi = EncoderParams::from_vector(x);
  Vector expected_gap = x - t;
  for (int k = 0; k < 20; ++k) {
    xi = ema_update(xi, theta, 0.5);
    expected_gap *= 0.5;
    CHECK((xi.to_vector() - t) == expected_gap);
  }
}

TEST_CASE("ema contraction holds to machine precision on arbitrary data") {
  Rng rng(77);
  const EncoderParams theta = EncoderParams::random_init(rng);
  EncoderParams xi = EncoderParams::random_init(rng);
  for (double m : {0.5, 0.99}) {
    const Vector gap_before = xi.to_vector() - theta.to_vector();
    const EncoderParams next = ema_update(xi, theta, m);
    const Vector gap_after = next.to_vector() - theta.to_vector();
    CHECK((gap_after - m * gap_before).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("geometric approach of xi toward a constant theta") {
  // theta all ones, xi starts at zero: the gap after k steps is 0.99^k.
  const Vector ones = Vector::Ones(EncoderParams::zeros().param_count());
  const EncoderParams theta = EncoderParams::from_vector(ones);
  EncoderParams xi = EncoderParams::zeros();
  double expected = 1.0;
  for (int k = 1; k <= 10; ++k) {
    xi = ema_update(xi, theta, 0.99);
    expected *= 0.99;
    CHECK((xi.to_vector().array() - 1.0).abs().maxCoeff() ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("backward matches finite differences through the network heads") {
  // Quadratic probe loss L = |map|^2 + |vec|^2 isolates the network
  // gradients from the transport machinery.
  Rng rng(78);
  const FeatureMap view = random_view(16, rng);
  const Index grid = native_grid(16);
  EncoderParams params = EncoderParams::random_init(rng);

  auto loss_at = [&](const EncoderParams& p) {
    const BranchOutput out = forward(p, view, BranchRole::kQuery, grid);
    return out.map.nodes().squaredNorm() + out.vec.squaredNorm();
  };

  ForwardCache cache;
  const BranchOutput out = forward(params, view, BranchRole::kQuery, grid, &cache);
  EncoderParams grads = EncoderParams::zeros();
  backward(params, cache, (2.0 * out.map.nodes()).eval(), (2.0 * out.vec).eval(), grads);

  const Vector flat = params.to_vector();
  const Vector grad_flat = grads.to_vector();
  const double h = 1e-5;
  double max_rel = 0.0;
  for (Index k = 0; k < flat.size(); k += 13) {  // sampled sweep
    Vector plus = flat, minus = flat;
    plus(k) += h;
    minus(k) -= h;
    const double fd = (loss_at(EncoderParams::from_vector(plus)) -
                       loss_at(EncoderParams::from_vector(minus))) /
                      (2.0 * h);
    max_rel = std::max(max_rel, relative_error(fd, grad_flat(k)));
  }
  CHECK(max_rel <= 1e-6);
}

TEST_CASE("emd node gradient matches finite differences with a frozen plan") {
  Rng rng(79);
  const NodeMatrix x = testing::random_nodes(4, 5, rng);
  const NodeMatrix y = testing::random_nodes(3, 5, rng);
  TransportPlan plan;
  plan.pi = Matrix::Zero(4, 3);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j) plan.pi(i, j) = rng.uniform(0.0, 1.0);
  plan.pi /= plan.pi.sum();

  auto loss_at = [&](const NodeMatrix& nodes) {
    return 2.0 - 2.0 * similarity_score(plan, cost_matrix(nodes, y));
  };

  const NodeMatrix grad = emd_loss_grad_x(x, y, plan);
  const double h = 1e-6;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index c = 0; c < x.cols(); ++c) {
      NodeMatrix plus = x, minus = x;
      plus(i, c) += h;
      minus(i, c) -= h;
      const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
      CHECK(relative_error(fd, grad(i, c)) <= 1e-5);
    }
}

TEST_CASE("vector loss gradient matches finite differences") {
  Rng rng(80);
  EmbeddingVector p(6), z(6);
  for (Index i = 0; i < 6; ++i) {
    p(i) = rng.uniform(-1.0, 1.0);
    z(i) = rng.uniform(-1.0, 1.0);
  }
  const EmbeddingVector grad = byol_vector_loss_grad_p(p, z);
  const double h = 1e-6;
  for (Index i = 0; i < 6; ++i) {
    EmbeddingVector plus = p, minus = p;
    plus(i) += h;
    minus(i) -= h;
    const double fd = (byol_vector_loss(plus, z) - byol_vector_loss(minus, z)) / (2.0 * h);
    CHECK(relative_error(fd, grad(i)) <= 1e-6);
  }
}

TEST_CASE("zero-norm inputs have zero loss gradients by convention") {
  const EmbeddingVector zero = EmbeddingVector::Zero(4);
  EmbeddingVector z(4);
  z << 1, 2, 3, 4;
  CHECK(byol_vector_loss_grad_p(zero, z) == EmbeddingVector::Zero(4));

  NodeMatrix x = NodeMatrix::Zero(2, 4);
  const NodeMatrix y = NodeMatrix::Ones(2, 4);
  TransportPlan plan;
  plan.pi = Matrix::Constant(2, 2, 0.25);
  CHECK(emd_loss_grad_x(x, y, plan) == NodeMatrix::Zero(2, 4));
}
