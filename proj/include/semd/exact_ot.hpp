// SPDX-License-Identifier: Apache-2.0
//
// Exact discrete optimal transport via the transportation simplex
// (northwest-corner start, MODI improvement). Desk-scale only: it serves as
// the ground-truth reference the entropic solver is checked against, and as
// the --exact path of the CLI.

#pragma once

#include "semd/core.hpp"

namespace semd {

struct ExactSolution {
  Matrix plan;  // vertex of U(r, c)
  double cost;  // <plan, M>
};

// Solves min <pi, M> over U(r, c) exactly. Problem size is capped at 12x12;
// larger instances are out of this solver's scope and rejected.
ExactSolution exact_ot(const CostMatrix& m, const MarginalWeights& r, const MarginalWeights& c);

inline constexpr Index kExactOtMaxSize = 12;

// Independent reference for square uniform-marginal instances: the optimum
// sits on a permutation vertex, so the cost is min over permutations sigma
// of (1/n) * sum_i M(i, sigma(i)). Brute-force enumeration, n <= 8.
double permutation_ot_cost(const CostMatrix& m);

}  // namespace semd
