// SPDX-License-Identifier: Apache-2.0

#include "semd/emd_loss.hpp"

namespace semd {
namespace {

constexpr double kWeightFloor = 1e-8;

MarginalWeights normalize_raw_weights(Vector raw) {
  if ((raw.array() == 0.0).all()) return MarginalWeights::uniform(raw.size());
  raw.array() += kWeightFloor;
  return MarginalWeights(raw / raw.sum());
}

}  // namespace

CostMatrix cost_matrix(const NodeMatrix& nodes_x, const NodeMatrix& nodes_y) {
  detail::require(nodes_x.cols() == nodes_y.cols(), "cost_matrix: channel dims must match");
  CostMatrix m(nodes_x.rows(), nodes_y.rows());
  for (Index i = 0; i < nodes_x.rows(); ++i)
    for (Index j = 0; j < nodes_y.rows(); ++j)
      m(i, j) = 1.0 - cosine(nodes_x.row(i), nodes_y.row(j));
  return m.cwiseMax(0.0).cwiseMin(2.0);
}

MarginalWeights marginal_weights(const NodeMatrix& nodes, const EmbeddingVector& anchor) {
  detail::require(nodes.cols() == anchor.size(), "marginal_weights: channel dims must match");
  Vector raw = (nodes * anchor).cwiseMax(0.0);
  return normalize_raw_weights(std::move(raw));
}

MarginalWeights marginal_weights_deepemd(const NodeMatrix& nodes_x, const NodeMatrix& nodes_y) {
  detail::require(nodes_x.cols() == nodes_y.cols(),
                  "marginal_weights_deepemd: channel dims must match");
  const EmbeddingVector mean_node = nodes_y.colwise().mean().transpose();
  return marginal_weights(nodes_x, mean_node);
}

double similarity_score(const TransportPlan& plan, const CostMatrix& m) {
  detail::require(plan.rows() == m.rows() && plan.cols() == m.cols(),
                  "similarity_score: dimension mismatch");
  detail::require(std::abs(plan.pi.sum() - 1.0) <= 1e-9,
                  "similarity_score: plan must carry unit mass");
  return plan.pi.cwiseProduct((1.0 - m.array()).matrix()).sum();
}

LossBreakdown emd_loss_nodes(const NodeMatrix& nodes_x, const NodeMatrix& nodes_y,
                             const EmbeddingVector& v_x, const EmbeddingVector& v_y,
                             const LossConfig& cfg) {
  LossBreakdown out;
  out.cost = cost_matrix(nodes_x, nodes_y);
  out.weights_r = marginal_weights(nodes_x, v_y);
  out.weights_c = marginal_weights(nodes_y, v_x);
  if (cfg.solver == PlanSolver::kExact) {
    ExactSolution sol = exact_ot(out.cost, out.weights_r, out.weights_c);
    out.plan.pi = std::move(sol.plan);
    // Scaling vectors are a Sinkhorn notion; keep them neutral here.
    out.plan.row_scaling = Vector::Ones(nodes_x.rows());
    out.plan.col_scaling = Vector::Ones(nodes_y.rows());
  } else {
    out.plan = sinkhorn(out.cost, out.weights_r, out.weights_c, cfg.sinkhorn);
  }
  const double s = similarity_score(out.plan, out.cost);
  out.emd_loss = 2.0 - 2.0 * s;
  out.total = out.emd_loss;
  return out;
}

LossBreakdown emd_loss(const FeatureMap& x, const FeatureMap& y, const EmbeddingVector& v_x,
                       const EmbeddingVector& v_y, const LossConfig& cfg) {
  if (cfg.pyramid)
    return emd_loss_nodes(pyramid_nodes(x, *cfg.pyramid), pyramid_nodes(y, *cfg.pyramid), v_x,
                          v_y, cfg);
  return emd_loss_nodes(flatten(x), flatten(y), v_x, v_y, cfg);
}

double byol_vector_loss(const EmbeddingVector& p, const EmbeddingVector& z) {
  return 2.0 - 2.0 * cosine(p, z);
}

NodeMatrix emd_loss_grad_x(const NodeMatrix& nodes_x, const NodeMatrix& nodes_y,
                           const TransportPlan& plan) {
  detail::require(plan.rows() == nodes_x.rows() && plan.cols() == nodes_y.rows(),
                  "emd_loss_grad_x: plan does not match node sets");
  detail::require(nodes_x.cols() == nodes_y.cols(), "emd_loss_grad_x: channel dims must match");

  const Vector norm_x = nodes_x.rowwise().norm();
  const Vector norm_y = nodes_y.rowwise().norm();
  NodeMatrix unit_x = nodes_x;
  NodeMatrix unit_y = nodes_y;
  for (Index i = 0; i < unit_x.rows(); ++i)
    if (norm_x(i) > 0.0) unit_x.row(i) /= norm_x(i);
  for (Index j = 0; j < unit_y.rows(); ++j)
    if (norm_y(j) > 0.0) unit_y.row(j) /= norm_y(j);

  // dL/dx_i = -2/|x_i| * (sum_j pi_ij y^_j - (sum_j pi_ij cos_ij) x^_i);
  // terms where either node has zero norm have zero cosine derivative.
  const Matrix cos = unit_x * unit_y.transpose();
  NodeMatrix grad = NodeMatrix::Zero(nodes_x.rows(), nodes_x.cols());
  for (Index i = 0; i < nodes_x.rows(); ++i) {
    if (norm_x(i) == 0.0) continue;
    double weighted_cos = 0.0;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(nodes_x.cols());
    for (Index j = 0; j < nodes_y.rows(); ++j) {
      if (norm_y(j) == 0.0) continue;
      acc += plan.pi(i, j) * unit_y.row(j);
      weighted_cos += plan.pi(i, j) * cos(i, j);
    }
    grad.row(i) = (-2.0 / norm_x(i)) * (acc - weighted_cos * unit_x.row(i));
  }
  return grad;
}

EmbeddingVector byol_vector_loss_grad_p(const EmbeddingVector& p, const EmbeddingVector& z) {
  detail::require(p.size() == z.size(), "byol_vector_loss_grad_p: length mismatch");
  const double np = p.norm();
  const double nz = z.norm();
  if (np == 0.0 || nz == 0.0) return EmbeddingVector::Zero(p.size());
  const Vector unit_p = p / np;
  const Vector unit_z = z / nz;
  const double cos = unit_p.dot(unit_z);
  return (-2.0 / np) * (unit_z - cos * unit_p);
}

SymmetricLoss symmetric_total_loss(const ViewOutputs& a, const ViewOutputs& b,
                                   const LossConfig& cfg) {
  SymmetricLoss out;
  out.ab = emd_loss(a.query_map, b.key_map, a.query_vec, b.key_vec, cfg);
  out.ab.byol_vector_loss = byol_vector_loss(a.query_vec, b.key_vec);
  out.ab.total = out.ab.emd_loss + cfg.vector_loss_weight * out.ab.byol_vector_loss;

  out.ba = emd_loss(b.query_map, a.key_map, b.query_vec, a.key_vec, cfg);
  out.ba.byol_vector_loss = byol_vector_loss(b.query_vec, a.key_vec);
  out.ba.total = out.ba.emd_loss + cfg.vector_loss_weight * out.ba.byol_vector_loss;

  out.total = out.ab.total + out.ba.total;
  return out;
}

}  // namespace semd
