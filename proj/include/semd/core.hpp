// SPDX-License-Identifier: Apache-2.0
//
// Core numeric containers shared by the solver, loss, and training code:
// spatial feature maps, embedding vectors, marginal weights, and transport
// plans, plus the elementary operations on them (flatten, cosine).
//
// Conventions:
//  - A feature map is an H x W x C grid stored as an (H*W) x C row-major
//    matrix; node index i = h*W + w, channels fastest-varying in memory.
//  - All computation is done in double precision; float is used only for
//    on-disk storage (see io.hpp).

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace semd {

using Index = Eigen::Index;

// Node matrices are row-major so that one (H*W) x C block is bit-compatible
// with the serialized channel-fastest layout.
template <typename Scalar>
using NodeMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using NodeMatrix = NodeMatrixT<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Pairwise transport cost between two node sets; entries in [0, 2] when
// produced by cost_matrix().
using CostMatrix = Eigen::MatrixXd;

using EmbeddingVector = Eigen::VectorXd;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

namespace detail {
inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}
}  // namespace detail

// Dense H x W x C grid of activations. Immutable after construction.
template <typename Scalar>
class FeatureMapT {
 public:
  using NodeMatrix = NodeMatrixT<Scalar>;

  // Smallest valid map; lets aggregates holding maps default-construct.
  FeatureMapT() : FeatureMapT(1, 1, NodeMatrix::Zero(1, 1)) {}

  FeatureMapT(Index height, Index width, NodeMatrix nodes)
      : height_(height), width_(width), nodes_(std::move(nodes)) {
    detail::require(height_ >= 1 && width_ >= 1, "FeatureMap: H and W must be >= 1");
    detail::require(nodes_.rows() == height_ * width_,
                    "FeatureMap: node count must equal H*W");
    detail::require(nodes_.cols() >= 1, "FeatureMap: C must be >= 1");
    detail::require(nodes_.allFinite(), "FeatureMap: entries must be finite");
  }

  static FeatureMapT constant(Index h, Index w, Index c, Scalar value) {
    return FeatureMapT(h, w, NodeMatrix::Constant(h * w, c, value));
  }

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index channels() const { return nodes_.cols(); }

  // Row i = node (h, w) with i = h*W + w. Aliases the map's storage.
  const NodeMatrix& nodes() const { return nodes_; }

  Scalar operator()(Index h, Index w, Index c) const { return nodes_(h * width_ + w, c); }

 private:
  Index height_;
  Index width_;
  NodeMatrix nodes_;
};

using FeatureMap = FeatureMapT<double>;

// Row-major node list of a map; node i = h*W + w. The returned reference
// aliases the map's values exactly.
template <typename Scalar>
const NodeMatrixT<Scalar>& flatten(const FeatureMapT<Scalar>& map) {
  return map.nodes();
}

// Inverse of flatten(): reassembles a map from its node list.
template <typename Scalar>
FeatureMapT<Scalar> unflatten(NodeMatrixT<Scalar> nodes, Index height, Index width) {
  return FeatureMapT<Scalar>(height, width, std::move(nodes));
}

// Cosine similarity in [-1, 1]. A zero-norm input yields 0 (cost 1 under the
// 1 - cos cost), keeping downstream losses finite on dead activations.
template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& x, const Eigen::MatrixBase<DerivedB>& y) {
  detail::require(x.size() == y.size(), "cosine: length mismatch");
  const double nx = x.template cast<double>().norm();
  const double ny = y.template cast<double>().norm();
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return x.template cast<double>().dot(y.template cast<double>()) / (nx * ny);
}

// Nonnegative per-node masses summing to 1; the supply/demand marginals of a
// transport problem. Feasibility of the transport polytope requires both
// sides to carry unit mass, so the constructor enforces it.
class MarginalWeights {
 public:
  explicit MarginalWeights(Vector weights) : w_(std::move(weights)) {
    detail::require(w_.size() >= 1, "MarginalWeights: empty");
    detail::require(w_.allFinite(), "MarginalWeights: entries must be finite");
    detail::require((w_.array() >= 0.0).all(), "MarginalWeights: entries must be >= 0");
    detail::require(std::abs(w_.sum() - 1.0) <= 1e-9,
                    "MarginalWeights: entries must sum to 1 within 1e-9");
  }

  static MarginalWeights uniform(Index n) {
    detail::require(n >= 1, "MarginalWeights: n must be >= 1");
    return MarginalWeights(Vector::Constant(n, 1.0 / static_cast<double>(n)));
  }

  Index size() const { return w_.size(); }
  const Vector& vector() const { return w_; }
  double operator[](Index i) const { return w_(i); }

 private:
  Vector w_;
};

// Transport plan pi = diag(row_scaling) * P * diag(col_scaling) together with
// its Sinkhorn scaling vectors. After the final column update the column sums
// match the demand marginals up to solver tolerance.
struct TransportPlan {
  Matrix pi;
  Vector row_scaling;  // v in pi = diag(v) P diag(u)
  Vector col_scaling;  // u

  Index rows() const { return pi.rows(); }
  Index cols() const { return pi.cols(); }
};

}  // namespace semd
