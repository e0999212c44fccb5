// SPDX-License-Identifier: Apache-2.0
//
// View augmentation for the training harness: random crop resized to the
// view resolution, per-channel color scaling, and horizontal flip. The small
// view uses the same crop distribution at half the output resolution.

#pragma once

#include "semd/core.hpp"
#include "semd/rng.hpp"

#include <array>

namespace semd {

inline constexpr Index kViewSize = 56;
inline constexpr Index kSmallViewSize = 28;  // half-resolution third view

struct AugmentParams {
  Index top = 0;
  Index left = 0;
  Index crop = 0;  // square crop side length
  bool flip = false;
  std::array<double, 3> color_scale{1.0, 1.0, 1.0};
};

// Fixed draw order (crop fraction, top, left, flip, three channel scales) so
// a given rng state always yields the same view.
AugmentParams sample_augment_params(Rng& rng, Index height, Index width);

// Bilinear resize with the half-pixel mapping src = (dst + 0.5)*scale - 0.5;
// exact identity when sizes match.
FeatureMap bilinear_resize(const FeatureMap& image, Index out_h, Index out_w);

// Crop -> resize -> color scale -> flip, clamped to [0, 1].
FeatureMap augment_with(const FeatureMap& image, const AugmentParams& params, Index out_size);

FeatureMap augment(const FeatureMap& image, Rng& rng);

FeatureMap small_view(const FeatureMap& image, Rng& rng);

}  // namespace semd
