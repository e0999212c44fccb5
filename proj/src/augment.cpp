// SPDX-License-Identifier: Apache-2.0

#include "semd/augment.hpp"

#include <algorithm>

namespace semd {

AugmentParams sample_augment_params(Rng& rng, Index height, Index width) {
  AugmentParams p;
  const Index max_side = std::min(height, width);
  const double frac = rng.uniform(0.5, 1.0);
  p.crop = std::max<Index>(1, static_cast<Index>(std::lround(frac * static_cast<double>(max_side))));
  p.crop = std::min(p.crop, max_side);
  p.top = rng.uniform_int(0, height - p.crop);
  p.left = rng.uniform_int(0, width - p.crop);
  p.flip = rng.bernoulli(0.5);
  for (auto& s : p.color_scale) s = rng.uniform(0.6, 1.4);
  return p;
}

FeatureMap bilinear_resize(const FeatureMap& image, Index out_h, Index out_w) {
  const Index in_h = image.height();
  const Index in_w = image.width();
  const Index channels = image.channels();
  if (in_h == out_h && in_w == out_w) return image;

  NodeMatrix out(out_h * out_w, channels);
  const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
  for (Index i = 0; i < out_h; ++i) {
    double fy = (static_cast<double>(i) + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(in_h - 1));
    const Index y0 = static_cast<Index>(fy);
    const Index y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (Index j = 0; j < out_w; ++j) {
      double fx = (static_cast<double>(j) + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(in_w - 1));
      const Index x0 = static_cast<Index>(fx);
      const Index x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - static_cast<double>(x0);
      out.row(i * out_w + j) =
          (1.0 - wy) * ((1.0 - wx) * image.nodes().row(y0 * in_w + x0) +
                        wx * image.nodes().row(y0 * in_w + x1)) +
          wy * ((1.0 - wx) * image.nodes().row(y1 * in_w + x0) +
                wx * image.nodes().row(y1 * in_w + x1));
    }
  }
  return FeatureMap(out_h, out_w, std::move(out));
}

FeatureMap augment_with(const FeatureMap& image, const AugmentParams& params, Index out_size) {
  detail::require(params.crop >= 1 && params.top >= 0 && params.left >= 0 &&
                      params.top + params.crop <= image.height() &&
                      params.left + params.crop <= image.width(),
                  "augment: crop window out of bounds");
  const Index channels = image.channels();

  NodeMatrix crop(params.crop * params.crop, channels);
  for (Index i = 0; i < params.crop; ++i)
    for (Index j = 0; j < params.crop; ++j)
      crop.row(i * params.crop + j) =
          image.nodes().row((params.top + i) * image.width() + (params.left + j));

  FeatureMap view = bilinear_resize(FeatureMap(params.crop, params.crop, std::move(crop)),
                                    out_size, out_size);

  NodeMatrix nodes = view.nodes();
  for (Index c = 0; c < channels && c < 3; ++c) nodes.col(c) *= params.color_scale[c];
  nodes = nodes.cwiseMax(0.0).cwiseMin(1.0);

  if (params.flip) {
    NodeMatrix flipped(nodes.rows(), nodes.cols());
    for (Index i = 0; i < out_size; ++i)
      for (Index j = 0; j < out_size; ++j)
        flipped.row(i * out_size + j) = nodes.row(i * out_size + (out_size - 1 - j));
    nodes = std::move(flipped);
  }
  return FeatureMap(out_size, out_size, std::move(nodes));
}

FeatureMap augment(const FeatureMap& image, Rng& rng) {
  return augment_with(image, sample_augment_params(rng, image.height(), image.width()),
                      kViewSize);
}

FeatureMap small_view(const FeatureMap& image, Rng& rng) {
  return augment_with(image, sample_augment_params(rng, image.height(), image.width()),
                      kSmallViewSize);
}

}  // namespace semd
