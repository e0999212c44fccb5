// SPDX-License-Identifier: Apache-2.0

#include "semd/exact_ot.hpp"

#include "semd/sinkhorn.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace semd;

TEST_CASE("zero-cost matching on the diagonal is found exactly") {
  const Index n = 4;
  CostMatrix m = CostMatrix::Constant(n, n, 1.0);
  m.diagonal().setZero();
  const MarginalWeights uniform = MarginalWeights::uniform(n);
  const ExactSolution sol = exact_ot(m, uniform, uniform);
  CHECK(sol.cost == doctest::Approx(0.0).epsilon(1e-15));
  for (Index i = 0; i < n; ++i) CHECK(sol.plan(i, i) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("anti-diagonal zero-cost matching on a 2x2 instance") {
  CostMatrix m(2, 2);
  m << 1, 0, 0, 1;
  const MarginalWeights half{(Vector(2) << 0.5, 0.5).finished()};
  const ExactSolution sol = exact_ot(m, half, half);
  CHECK(sol.cost == doctest::Approx(0.0));
  CHECK(sol.plan(0, 1) == doctest::Approx(0.5));
  CHECK(sol.plan(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("uniform-marginal optima match brute-force permutation enumeration") {
  Rng rng(30);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = rng.uniform_int(1, 4);
    const CostMatrix m = testing::random_cost(n, n, rng);
    const MarginalWeights uniform = MarginalWeights::uniform(n);
    const double exact = exact_ot(m, uniform, uniform).cost;
    const double brute = permutation_ot_cost(m);
    CHECK(std::abs(exact - brute) <= 1e-12);
  }
}

TEST_CASE("the plan returned is feasible") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const Index rows = rng.uniform_int(2, 7);
    const Index cols = rng.uniform_int(2, 7);
    const CostMatrix m = testing::random_cost(rows, cols, rng);
    const MarginalWeights r = testing::random_marginals(rows, rng);
    const MarginalWeights c = testing::random_marginals(cols, rng);
    const ExactSolution sol = exact_ot(m, r, c);
    CHECK((sol.plan.array() >= 0.0).all());
    CHECK((sol.plan.rowwise().sum() - r.vector()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((sol.plan.colwise().sum().transpose() - c.vector()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(sol.cost == doctest::Approx(sol.plan.cwiseProduct(m).sum()).epsilon(1e-12));
  }
}

TEST_CASE("exact cost lower-bounds every Sinkhorn plan, feasibility-adjusted") {
  // An unconverged plan only satisfies the column marginals, so its cost can
  // undercut the optimum by at most the mass needed to repair the row sums
  // (each misplaced unit changes the cost by at most max M - min M <= 2).
  Rng rng(32);
  SinkhornConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = rng.uniform_int(2, 6);
    const CostMatrix m = testing::random_cost(n, n, rng);
    const MarginalWeights r = testing::random_marginals(n, rng);
    const MarginalWeights c = testing::random_marginals(n, rng);
    cfg.lambda = rng.uniform(1.0, 200.0);
    cfg.iterations = static_cast<int>(rng.uniform_int(1, 200));
    const TransportPlan plan = sinkhorn(m, r, c, cfg);
    const double entropic = transport_cost(plan, m);
    const double repair = (plan.pi.rowwise().sum() - r.vector()).cwiseAbs().sum();
    CHECK(exact_ot(m, r, c).cost <= entropic + repair + 1e-9);
  }
}

TEST_CASE("exact cost lower-bounds converged Sinkhorn plans directly") {
  Rng rng(34);
  SinkhornConfig cfg;
  cfg.iterations = 200000;
  cfg.early_exit_tol = 1e-12;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = rng.uniform_int(2, 6);
    const CostMatrix m = testing::random_cost(n, n, rng);
    const MarginalWeights r = testing::random_marginals(n, rng);
    const MarginalWeights c = testing::random_marginals(n, rng);
    cfg.lambda = rng.uniform(1.0, 100.0);
    const double entropic = transport_cost(sinkhorn(m, r, c, cfg), m);
    CHECK(exact_ot(m, r, c).cost <= entropic + 1e-9);
  }
}

TEST_CASE("rectangular instances are handled") {
  Rng rng(33);
  const CostMatrix m = testing::random_cost(3, 5, rng);
  const MarginalWeights r = testing::random_marginals(3, rng);
  const MarginalWeights c = testing::random_marginals(5, rng);
  const ExactSolution sol = exact_ot(m, r, c);
  CHECK((sol.plan.rowwise().sum() - r.vector()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("oversize problems are rejected") {
  const Index n = kExactOtMaxSize + 1;
  const CostMatrix m = CostMatrix::Zero(n, n);
  const MarginalWeights u = MarginalWeights::uniform(n);
  CHECK_THROWS_AS(exact_ot(m, u, u), std::invalid_argument);
}

TEST_CASE("degenerate marginals with repeated ties solve cleanly") {
  // Equal marginals and a cost with many ties force degenerate pivots.
  CostMatrix m(4, 4);
  m << 1, 1, 1, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 1, 1, 1;
  const MarginalWeights uniform = MarginalWeights::uniform(4);
  const ExactSolution sol = exact_ot(m, uniform, uniform);
  CHECK(sol.cost == doctest::Approx(permutation_ot_cost(m)).epsilon(1e-12));
}

TEST_CASE("brute-force reference validates input") {
  CHECK_THROWS_AS(permutation_ot_cost(CostMatrix::Zero(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(permutation_ot_cost(CostMatrix::Zero(9, 9)), std::invalid_argument);
}
