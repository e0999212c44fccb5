// SPDX-License-Identifier: Apache-2.0
//
// Synthetic non-iconic training images: several colored shapes scattered
// over a textured noise background, so random crops of one image can cover
// different objects.

#pragma once

#include "semd/core.hpp"
#include "semd/rng.hpp"

#include <vector>

namespace semd {

inline constexpr Index kImageSize = 64;

// One 64x64x3 image in [0, 1] with 2..4 distinctly colored shapes.
FeatureMap synthetic_image(Rng& rng);

std::vector<FeatureMap> synthetic_dataset(Index count, Rng& rng);

}  // namespace semd
