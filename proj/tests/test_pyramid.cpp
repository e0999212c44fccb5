// SPDX-License-Identifier: Apache-2.0

#include "semd/pyramid.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace semd;

TEST_CASE("adaptive pool with g equal to the map size is the identity") {
  Rng rng(10);
  const FeatureMap map = testing::random_map(5, 5, 3, rng);
  const FeatureMap pooled = adaptive_pool(map, 5);
  CHECK(pooled.nodes() == map.nodes());
}

TEST_CASE("adaptive pool of a constant map stays constant") {
  const FeatureMap map = FeatureMap::constant(6, 6, 2, 0.75);
  for (Index g : {1, 2, 3, 4, 5}) {
    const FeatureMap pooled = adaptive_pool(map, g);
    CHECK(((pooled.nodes().array() - 0.75).abs() <= 1e-15).all());
  }
}

TEST_CASE("4x4 pooled to 2x2 matches the hand-computed block means") {
  NodeMatrix nodes(16, 1);
  for (Index i = 0; i < 16; ++i) nodes(i, 0) = static_cast<double>(i + 1);
  const FeatureMap pooled = adaptive_pool(FeatureMap(4, 4, nodes), 2);
  CHECK(pooled.nodes()(0, 0) == doctest::Approx(3.5));
  CHECK(pooled.nodes()(1, 0) == doctest::Approx(5.5));
  CHECK(pooled.nodes()(2, 0) == doctest::Approx(11.5));
  CHECK(pooled.nodes()(3, 0) == doctest::Approx(13.5));
}

TEST_CASE("pooling preserves the map mean when the grid divides the size") {
  Rng rng(11);
  const FeatureMap map = testing::random_map(12, 12, 2, rng);
  for (Index g : {1, 2, 3, 4, 6, 12}) {
    const FeatureMap pooled = adaptive_pool(map, g);
    for (Index c = 0; c < map.channels(); ++c)
      CHECK(pooled.nodes().col(c).mean() ==
            doctest::Approx(map.nodes().col(c).mean()).epsilon(1e-12));
  }
}

TEST_CASE("grid size outside [1, min(H, W)] is rejected") {
  Rng rng(12);
  const FeatureMap map = testing::random_map(4, 6, 1, rng);
  CHECK_THROWS_AS(adaptive_pool(map, 0), std::invalid_argument);
  CHECK_THROWS_AS(adaptive_pool(map, 5), std::invalid_argument);
}

TEST_CASE("pyramid node count is the sum of squared grid sizes") {
  Rng rng(13);
  const FeatureMap map = testing::random_map(7, 7, 4, rng);
  const NodeMatrix nodes = pyramid_nodes(map, PyramidSpec{{7, 5, 3}});
  CHECK(nodes.rows() == 49 + 25 + 9);
  CHECK(nodes.cols() == 4);
  // level order: the first 49 rows are the unpooled map itself
  CHECK(nodes.topRows(49) == flatten(map));
}

TEST_CASE("single full-size grid reproduces flatten") {
  Rng rng(14);
  const FeatureMap map = testing::random_map(5, 5, 2, rng);
  CHECK(pyramid_nodes(map, PyramidSpec{{5}}) == flatten(map));
}

TEST_CASE("pyramid of a constant map emits identical nodes") {
  const FeatureMap map = FeatureMap::constant(7, 7, 3, 0.25);
  const NodeMatrix nodes = pyramid_nodes(map, PyramidSpec{{7, 5, 3}});
  CHECK(((nodes.array() - 0.25).abs() <= 1e-15).all());
}

TEST_CASE("resample_to_grid upsamples with overlapping bins") {
  Rng rng(15);
  const FeatureMap map = testing::random_map(4, 4, 2, rng);
  const FeatureMap up = resample_to_grid(map, 7);
  CHECK(up.height() == 7);
  CHECK(up.width() == 7);
  // corners of the upsampled grid are single source cells
  CHECK(up.nodes().row(0) == map.nodes().row(0));
  CHECK(up.nodes().row(48) == map.nodes().row(15));
}

TEST_CASE("pyramid_backward is the adjoint of pyramid_nodes") {
  Rng rng(16);
  const PyramidSpec spec{{4, 2, 1}};
  const FeatureMap map = testing::random_map(4, 4, 3, rng);
  const NodeMatrix fwd = pyramid_nodes(map, spec);
  const NodeMatrix gout = testing::random_nodes(fwd.rows(), 3, rng);
  const NodeMatrix gin = pyramid_backward(gout, 4, 4, spec);
  // <A x, g> == <x, A^T g> for the linear pooling map
  const double lhs = fwd.cwiseProduct(gout).sum();
  const double rhs = map.nodes().cwiseProduct(gin).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
