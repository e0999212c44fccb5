// SPDX-License-Identifier: Apache-2.0
//
// The feature-map similarity loss: cosine cost matrix, attention-derived
// marginal weights, Sinkhorn (or exact) transport plan, similarity score
// S = <pi, 1 - M>, and the map loss 2 - 2S, together with the vector-branch
// loss 2 - 2 cos(p, z) and the symmetric two-view total.

#pragma once

#include "semd/core.hpp"
#include "semd/exact_ot.hpp"
#include "semd/pyramid.hpp"
#include "semd/sinkhorn.hpp"

#include <optional>

namespace semd {

enum class PlanSolver { kSinkhorn, kExact };

struct LossConfig {
  SinkhornConfig sinkhorn;
  // When set, both node sets are expanded with spatial pyramid cropping
  // before the transport problem is formed.
  std::optional<PyramidSpec> pyramid;
  double vector_loss_weight = 1.0;
  PlanSolver solver = PlanSolver::kSinkhorn;
};

struct LossBreakdown {
  double emd_loss = 0.0;
  double byol_vector_loss = 0.0;
  double total = 0.0;
  TransportPlan plan;
  CostMatrix cost;
  MarginalWeights weights_r{Vector::Ones(1)};
  MarginalWeights weights_c{Vector::Ones(1)};
};

// Outputs of one encoder pair on one view: the spatial map and global vector
// from the query network (predictor applied) and from the key network.
struct ViewOutputs {
  FeatureMap query_map;
  EmbeddingVector query_vec;
  FeatureMap key_map;
  EmbeddingVector key_vec;
};

struct SymmetricLoss {
  LossBreakdown ab;  // query(a) against key(b)
  LossBreakdown ba;  // query(b) against key(a)
  double total = 0.0;
};

// M_ij = 1 - cos(x_i, y_j), clamped to [0, 2] against cosine round-off.
CostMatrix cost_matrix(const NodeMatrix& nodes_x, const NodeMatrix& nodes_y);

// Per-node mass from the anchor vector: raw_i = max(x_i . anchor, 0), floored
// by 1e-8 and normalized to unit sum. An anchor orthogonal to every node
// degenerates to exactly uniform weights.
MarginalWeights marginal_weights(const NodeMatrix& nodes, const EmbeddingVector& anchor);

// Ablation variant: the anchor is the mean node of the opposite set.
MarginalWeights marginal_weights_deepemd(const NodeMatrix& nodes_x, const NodeMatrix& nodes_y);

// S = <pi, 1 - M> in [-1, 1]; requires a unit-mass plan.
double similarity_score(const TransportPlan& plan, const CostMatrix& m);

// Full map-loss pipeline on explicit node sets (supports pyramid node sets
// whose sizes differ between the two sides).
LossBreakdown emd_loss_nodes(const NodeMatrix& nodes_x, const NodeMatrix& nodes_y,
                             const EmbeddingVector& v_x, const EmbeddingVector& v_y,
                             const LossConfig& cfg);

// Convenience overload on whole maps; applies cfg.pyramid when present.
LossBreakdown emd_loss(const FeatureMap& x, const FeatureMap& y, const EmbeddingVector& v_x,
                       const EmbeddingVector& v_y, const LossConfig& cfg);

// 2 - 2 cos(p, z), in [0, 4].
double byol_vector_loss(const EmbeddingVector& p, const EmbeddingVector& z);

// Both loss directions: query branch of each view against the key branch of
// the other, map loss plus weighted vector loss each way.
SymmetricLoss symmetric_total_loss(const ViewOutputs& a, const ViewOutputs& b,
                                   const LossConfig& cfg);

// Gradient of the map loss 2 - 2<pi, 1 - M> w.r.t. the X-side nodes with the
// plan held constant: d/dx_i of 2*sum_j pi_ij * M_ij(x_i, y_j). The plan (and
// with it the marginal weights) contributes no gradient; zero-norm nodes get
// a zero row, matching the cosine convention.
NodeMatrix emd_loss_grad_x(const NodeMatrix& nodes_x, const NodeMatrix& nodes_y,
                           const TransportPlan& plan);

// Gradient of 2 - 2 cos(p, z) w.r.t. p; z carries no gradient.
EmbeddingVector byol_vector_loss_grad_p(const EmbeddingVector& p, const EmbeddingVector& z);

}  // namespace semd
