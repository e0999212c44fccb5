// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "semd/core.hpp"
#include "semd/rng.hpp"

namespace semd::testing {

inline CostMatrix random_cost(Index rows, Index cols, Rng& rng, double lo = 0.0,
                              double hi = 2.0) {
  CostMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline MarginalWeights random_marginals(Index n, Rng& rng) {
  Vector w(n);
  for (Index i = 0; i < n; ++i) w(i) = rng.uniform(0.05, 1.0);
  return MarginalWeights(w / w.sum());
}

inline NodeMatrix random_nodes(Index count, Index channels, Rng& rng, double lo = -1.0,
                               double hi = 1.0) {
  NodeMatrix nodes(count, channels);
  for (Index i = 0; i < count; ++i)
    for (Index c = 0; c < channels; ++c) nodes(i, c) = rng.uniform(lo, hi);
  return nodes;
}

inline FeatureMap random_map(Index h, Index w, Index c, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  return FeatureMap(h, w, random_nodes(h * w, c, rng, lo, hi));
}

}  // namespace semd::testing
