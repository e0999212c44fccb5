// SPDX-License-Identifier: Apache-2.0

#include "semd/synthetic.hpp"

#include "semd/augment.hpp"

#include <algorithm>
#include <array>

namespace semd {
namespace {

// Well-separated base colors; per-image shapes draw from a shuffled prefix
// so colors within an image are always distinct.
constexpr std::array<std::array<double, 3>, 8> kPalette = {{
    {0.90, 0.15, 0.15},
    {0.15, 0.75, 0.20},
    {0.15, 0.25, 0.90},
    {0.95, 0.80, 0.10},
    {0.80, 0.15, 0.80},
    {0.10, 0.80, 0.80},
    {0.95, 0.55, 0.10},
    {0.90, 0.90, 0.90},
}};

void fill_rect(NodeMatrix& nodes, Index size, Index cy, Index cx, Index half,
               const std::array<double, 3>& color) {
  for (Index y = std::max<Index>(0, cy - half); y <= std::min(size - 1, cy + half); ++y)
    for (Index x = std::max<Index>(0, cx - half); x <= std::min(size - 1, cx + half); ++x)
      for (Index c = 0; c < 3; ++c) nodes(y * size + x, c) = color[c];
}

void fill_disc(NodeMatrix& nodes, Index size, Index cy, Index cx, Index radius,
               const std::array<double, 3>& color) {
  for (Index y = std::max<Index>(0, cy - radius); y <= std::min(size - 1, cy + radius); ++y)
    for (Index x = std::max<Index>(0, cx - radius); x <= std::min(size - 1, cx + radius); ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= radius * radius)
        for (Index c = 0; c < 3; ++c) nodes(y * size + x, c) = color[c];
}

}  // namespace

FeatureMap synthetic_image(Rng& rng) {
  const Index size = kImageSize;

  // Background: coarse noise upsampled to image size plus fine per-pixel
  // noise around a dim base color.
  std::array<double, 3> base;
  for (auto& b : base) b = rng.uniform(0.15, 0.45);
  constexpr Index kCoarse = 8;
  NodeMatrix coarse(kCoarse * kCoarse, 3);
  for (Index i = 0; i < coarse.rows(); ++i)
    for (Index c = 0; c < 3; ++c) coarse(i, c) = base[c] + rng.uniform(-0.10, 0.10);
  FeatureMap texture = bilinear_resize(FeatureMap(kCoarse, kCoarse, std::move(coarse)), size, size);

  NodeMatrix nodes = texture.nodes();
  for (Index i = 0; i < nodes.rows(); ++i)
    for (Index c = 0; c < 3; ++c) nodes(i, c) += rng.uniform(-0.04, 0.04);

  // 2..4 shapes with colors drawn without replacement from the palette.
  const Index shape_count = rng.uniform_int(2, 4);
  std::array<Index, kPalette.size()> order;
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
  for (std::size_t i = 0; i < order.size() - 1; ++i)
    std::swap(order[i], order[rng.uniform_int(static_cast<std::int64_t>(i),
                                              static_cast<std::int64_t>(order.size() - 1))]);

  for (Index s = 0; s < shape_count; ++s) {
    const auto& color = kPalette[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])];
    const Index cy = rng.uniform_int(8, size - 9);
    const Index cx = rng.uniform_int(8, size - 9);
    const Index extent = rng.uniform_int(4, 10);
    if (rng.bernoulli(0.5))
      fill_rect(nodes, size, cy, cx, extent, color);
    else
      fill_disc(nodes, size, cy, cx, extent, color);
  }

  nodes = nodes.cwiseMax(0.0).cwiseMin(1.0);
  return FeatureMap(size, size, std::move(nodes));
}

std::vector<FeatureMap> synthetic_dataset(Index count, Rng& rng) {
  std::vector<FeatureMap> images;
  images.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) images.push_back(synthetic_image(rng));
  return images;
}

}  // namespace semd
