// SPDX-License-Identifier: Apache-2.0

#include "semd/sinkhorn.hpp"

namespace semd {

Matrix kernel(const CostMatrix& m, double lambda, double kernel_floor) {
  detail::require(lambda > 0.0, "kernel: lambda must be > 0");
  detail::require(kernel_floor > 0.0 && kernel_floor < 1.0, "kernel: floor must be in (0, 1)");
  detail::require(m.allFinite(), "kernel: cost matrix must be finite");
  return (-lambda * m.array()).exp().max(kernel_floor).matrix();
}

TransportPlan sinkhorn(const CostMatrix& m, const MarginalWeights& r, const MarginalWeights& c,
                       const SinkhornConfig& cfg) {
  detail::require(cfg.iterations >= 1, "sinkhorn: iterations must be >= 1");
  detail::require(m.rows() == r.size() && m.cols() == c.size(),
                  "sinkhorn: marginal sizes must match the cost matrix");

  const Matrix p = kernel(m, cfg.lambda, cfg.kernel_floor);
  Vector u = Vector::Ones(c.size());
  Vector v(r.size());
  for (int t = 0; t < cfg.iterations; ++t) {
    v = r.vector().array() / (p * u).array();
    u = c.vector().array() / (p.transpose() * v).array();
    if (cfg.early_exit_tol > 0.0) {
      // Row violation of the current pi = diag(v) P diag(u).
      const Vector row_sums = v.array() * (p * u).array();
      if ((row_sums - r.vector()).cwiseAbs().maxCoeff() < cfg.early_exit_tol) break;
    }
  }

  TransportPlan plan;
  plan.pi = v.asDiagonal() * p * u.asDiagonal();
  plan.row_scaling = std::move(v);
  plan.col_scaling = std::move(u);
  return plan;
}

double transport_cost(const TransportPlan& plan, const CostMatrix& m) {
  detail::require(plan.rows() == m.rows() && plan.cols() == m.cols(),
                  "transport_cost: dimension mismatch");
  return plan.pi.cwiseProduct(m).sum();
}

double max_row_violation(const TransportPlan& plan, const MarginalWeights& r) {
  detail::require(plan.rows() == r.size(), "max_row_violation: dimension mismatch");
  return (plan.pi.rowwise().sum() - r.vector()).cwiseAbs().maxCoeff();
}

double max_col_violation(const TransportPlan& plan, const MarginalWeights& c) {
  detail::require(plan.cols() == c.size(), "max_col_violation: dimension mismatch");
  return (plan.pi.colwise().sum().transpose() - c.vector()).cwiseAbs().maxCoeff();
}

}  // namespace semd
