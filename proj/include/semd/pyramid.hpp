// SPDX-License-Identifier: Apache-2.0
//
// Spatial pyramid cropping: pools a feature map to several grid resolutions
// via adaptive average pooling and concatenates all cells into one node set.

#pragma once

#include "semd/core.hpp"

#include <vector>

namespace semd {

struct PyramidSpec {
  std::vector<Index> grid_sizes{7, 5, 3};
};

namespace detail {
// Adaptive bin over an axis of length n split into g cells:
// cell i covers [floor(i*n/g), ceil((i+1)*n/g)). Bins tile the axis exactly
// when g divides n and overlap by at most one element otherwise; they are
// never empty, so the same formula also upsamples when g > n.
inline std::pair<Index, Index> adaptive_bin(Index i, Index n, Index g) {
  const Index lo = (i * n) / g;
  const Index hi = ((i + 1) * n + g - 1) / g;
  return {lo, hi};
}
}  // namespace detail

// (g*g) x (H*W) row-stochastic matrix whose rows average the adaptive bins.
// Multiplying node matrices by it performs the pooling; its transpose routes
// gradients back.
inline Matrix pooling_matrix(Index height, Index width, Index g) {
  detail::require(g >= 1, "pooling_matrix: grid size must be >= 1");
  Matrix a = Matrix::Zero(g * g, height * width);
  for (Index i = 0; i < g; ++i) {
    auto [r0, r1] = detail::adaptive_bin(i, height, g);
    for (Index j = 0; j < g; ++j) {
      auto [c0, c1] = detail::adaptive_bin(j, width, g);
      const double inv = 1.0 / static_cast<double>((r1 - r0) * (c1 - c0));
      for (Index r = r0; r < r1; ++r)
        for (Index c = c0; c < c1; ++c) a(i * g + j, r * width + c) = inv;
    }
  }
  return a;
}

// Average-pools a map to a g x g grid with adaptive bins. Reduces to the
// identity when g == H == W.
template <typename Scalar>
FeatureMapT<Scalar> adaptive_pool(const FeatureMapT<Scalar>& map, Index g) {
  detail::require(g >= 1 && g <= std::min(map.height(), map.width()),
                  "adaptive_pool: grid size out of range [1, min(H, W)]");
  if (g == map.height() && g == map.width()) return map;
  NodeMatrixT<Scalar> pooled =
      (pooling_matrix(map.height(), map.width(), g) * map.nodes().template cast<double>())
          .template cast<Scalar>();
  return FeatureMapT<Scalar>(g, g, std::move(pooled));
}

// Adaptive bin-mean resampling without the pooling range restriction: bins
// overlap when g exceeds the source extent, so this also upsamples. Used to
// bring small-view maps onto the shared grid before the loss.
template <typename Scalar>
FeatureMapT<Scalar> resample_to_grid(const FeatureMapT<Scalar>& map, Index g) {
  detail::require(g >= 1, "resample_to_grid: grid size must be >= 1");
  if (g == map.height() && g == map.width()) return map;
  NodeMatrixT<Scalar> pooled =
      (pooling_matrix(map.height(), map.width(), g) * map.nodes().template cast<double>())
          .template cast<Scalar>();
  return FeatureMapT<Scalar>(g, g, std::move(pooled));
}

// Concatenated node set over all pyramid levels, in spec order, row-major
// within each grid. Length is the sum of g^2 over the grid sizes.
template <typename Scalar>
NodeMatrixT<Scalar> pyramid_nodes(const FeatureMapT<Scalar>& map, const PyramidSpec& spec) {
  detail::require(!spec.grid_sizes.empty(), "pyramid_nodes: empty grid list");
  Index total = 0;
  for (Index g : spec.grid_sizes) total += g * g;
  NodeMatrixT<Scalar> out(total, map.channels());
  Index row = 0;
  for (Index g : spec.grid_sizes) {
    out.middleRows(row, g * g) = adaptive_pool(map, g).nodes();
    row += g * g;
  }
  return out;
}

// Adjoint of pyramid_nodes: routes a gradient on the concatenated node set
// back onto the source map's nodes.
inline NodeMatrix pyramid_backward(const NodeMatrix& d_pyramid, Index height, Index width,
                                   const PyramidSpec& spec) {
  NodeMatrix d_map = NodeMatrix::Zero(height * width, d_pyramid.cols());
  Index row = 0;
  for (Index g : spec.grid_sizes) {
    if (g == height && g == width) {
      d_map += d_pyramid.middleRows(row, g * g);
    } else {
      d_map += pooling_matrix(height, width, g).transpose() * d_pyramid.middleRows(row, g * g);
    }
    row += g * g;
  }
  return d_map;
}

}  // namespace semd
