// SPDX-License-Identifier: Apache-2.0
//
// Entropic-regularized optimal transport via Sinkhorn-Knopp iteration.
//
// Minimizes <pi, M> + (1/lambda) * pi (log pi - 1) over the transport
// polytope U(r, c). The optimum has the form pi = diag(v) P diag(u) with
// P = exp(-lambda * M); u and v are obtained by alternating row/column
// rescaling. Each iteration ends with the column update, so the column
// marginals of the returned plan match c to machine precision while the row
// marginals converge with the iteration count.

#pragma once

#include "semd/core.hpp"

namespace semd {

struct SinkhornConfig {
  // Regularization intensity. Costs live in [0, 2], so the default keeps
  // lambda*M <= 50 and the kernel comfortably inside double range.
  double lambda = 25.0;
  int iterations = 10;
  // Lower clamp applied to exp(-lambda*M); exponents beyond ~-700 would
  // otherwise flush to exact zero and break the positivity Sinkhorn needs.
  double kernel_floor = 1e-300;
  // When > 0, stop as soon as the max row-marginal violation drops below
  // this bound (always after a column update). 0 runs exactly `iterations`.
  double early_exit_tol = 0.0;
};

// Element-wise kernel P = max(exp(-lambda * M), floor); strictly positive.
Matrix kernel(const CostMatrix& m, double lambda, double kernel_floor = 1e-300);

// Runs T alternating updates (row scaling v from r, then column scaling u
// from c) and returns pi = diag(v) P diag(u).
TransportPlan sinkhorn(const CostMatrix& m, const MarginalWeights& r, const MarginalWeights& c,
                       const SinkhornConfig& cfg);

// Frobenius dot product <pi, M>: the transport cost of a plan.
double transport_cost(const TransportPlan& plan, const CostMatrix& m);

// Max absolute deviation of the plan's row sums from r (column sums from c).
double max_row_violation(const TransportPlan& plan, const MarginalWeights& r);
double max_col_violation(const TransportPlan& plan, const MarginalWeights& c);

}  // namespace semd
