// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale convolutional encoder pair for self-supervised training.
//
// Topology (fixed): three 3x3 stride-2 pad-1 conv layers with ReLU and
// channel plan 3 -> 8 -> 16 -> 32, then two heads on the conv output:
//  - map head: 1x1 conv projection 32 -> 16, plus a 1x1 conv predictor
//    16 -> 16 applied on the query branch only; the map is resampled onto a
//    shared grid so full and small views meet the loss at the same size.
//  - vector head: global average pooling and an affine map 32 -> 16.
//
// The query and key parameter sets share this topology; the key branch is
// updated only by the momentum rule and receives no gradients. backward()
// implements the reverse pass explicitly layer by layer.

#pragma once

#include "semd/core.hpp"
#include "semd/rng.hpp"

#include <array>

namespace semd {

inline constexpr int kConvLayers = 3;
inline constexpr std::array<Index, 4> kChannelPlan = {3, 8, 16, 32};
inline constexpr Index kConvKernel = 3;
inline constexpr Index kConvStride = 2;
inline constexpr Index kConvPad = 1;
inline constexpr Index kProjDim = 16;
inline constexpr Index kEmbedDim = 16;
inline constexpr Index kSharedGrid = 7;

struct EncoderParams {
  // Conv weights are (out_c) x (in_c * 9) with column index c_in * 9 + dy*3 + dx.
  std::array<Matrix, kConvLayers> conv_w;
  std::array<Vector, kConvLayers> conv_b;
  Matrix proj_w;  // kProjDim x 32
  Vector proj_b;
  Matrix pred_w;  // kProjDim x kProjDim
  Vector pred_b;
  Matrix vec_w;  // kEmbedDim x 32
  Vector vec_b;

  static EncoderParams zeros();
  // He-normal weights, zero biases.
  static EncoderParams random_init(Rng& rng);

  Index param_count() const;
  // Fixed topology order: conv1 w/b, conv2 w/b, conv3 w/b, proj, pred, vec;
  // matrices traversed row by row. Serialization and SGD both rely on it.
  Vector to_vector() const;
  static EncoderParams from_vector(const Vector& flat);

  bool same_topology(const EncoderParams& other) const;
};

// dst += scale * src, elementwise over all parameter blocks.
void add_scaled(EncoderParams& dst, const EncoderParams& src, double scale);

// In-place SGD step theta -= lr * grad.
void sgd_step(EncoderParams& theta, const EncoderParams& grad, double lr);

// Momentum update xi <- m*xi + (1-m)*theta, computed as xi = theta +
// m*(xi - theta) so the gap to theta contracts by exactly one multiply; the
// endpoints m==0 and m==1 short-circuit to exact copies.
EncoderParams ema_update(const EncoderParams& xi, const EncoderParams& theta, double m);

enum class BranchRole { kQuery, kKey };

struct BranchOutput {
  FeatureMap map;  // shared_grid x shared_grid x kProjDim
  EmbeddingVector vec;
};

// Activations recorded by a query-branch forward pass, consumed by backward.
struct ForwardCache {
  std::array<Matrix, kConvLayers> patches;  // im2col input of each conv
  std::array<Matrix, kConvLayers> preact;
  std::array<std::pair<Index, Index>, kConvLayers> in_shape;
  Matrix conv_out;  // post-ReLU output of the last conv, (h3*w3) x 32
  Index out_h = 0, out_w = 0;
  Matrix proj_out;
  Matrix resample;  // pooling matrix onto the shared grid; empty if identity
  Vector gap;
};

// Runs the encoder on one view. The predictor is applied only for the query
// role. A cache pointer may be passed on query passes to enable backward().
BranchOutput forward(const EncoderParams& params, const FeatureMap& view, BranchRole role,
                     Index shared_grid = kSharedGrid, ForwardCache* cache = nullptr);

// Accumulates d(loss)/d(theta) into `grads` given the gradients at the two
// branch outputs: d_map_nodes is (shared_grid^2) x kProjDim, d_vec is
// kEmbedDim. Query branch only; the key branch has no backward path.
void backward(const EncoderParams& params, const ForwardCache& cache,
              const NodeMatrix& d_map_nodes, const EmbeddingVector& d_vec,
              EncoderParams& grads);

// Output grid side length of the conv stack for a square input.
Index native_grid(Index input_size);

}  // namespace semd
