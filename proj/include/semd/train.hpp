// SPDX-License-Identifier: Apache-2.0
//
// Deterministic self-supervised training loop: two augmented views (plus an
// optional half-resolution view) per image, symmetric map+vector loss
// between the query and momentum encoders, SGD with linear warmup and cosine
// decay on the query side, momentum updates on the key side.

#pragma once

#include "semd/augment.hpp"
#include "semd/emd_loss.hpp"
#include "semd/encoder.hpp"
#include "semd/pyramid.hpp"
#include "semd/sinkhorn.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace semd {

struct TrainConfig {
  double momentum = 0.99;  // key-encoder EMA rate
  double lr = 0.05;
  int warmup_steps = 20;
  int steps = 200;
  int batch = 8;
  std::uint64_t seed = 0;
  double loss_mix = 1.0;  // weight of the vector loss against the map loss
  SinkhornConfig sinkhorn;
  PyramidSpec pyramid;
  bool small_view = true;
  double small_view_scale = 0.5;
  Index shared_grid = kSharedGrid;

  void validate() const;
};

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  double emd_ab = 0.0;
  double emd_ba = 0.0;
  double vec_ab = 0.0;
  double vec_ba = 0.0;
  double total = 0.0;  // includes small-view terms when enabled
};

struct TrainResult {
  EncoderParams theta;
  EncoderParams xi;
  std::vector<StepRecord> history;
};

// Raised when the loss stops being finite; carries the offending step.
struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(int at_step)
      : std::runtime_error("training diverged: non-finite loss at step " +
                           std::to_string(at_step)),
        step(at_step) {}
  int step;
};

// Learning rate at a 0-based step: linear warmup to cfg.lr, then cosine
// decay to zero at cfg.steps.
double learning_rate(const TrainConfig& cfg, int step);

// Runs the loop on the given images. Fully determined by cfg.seed: parameter
// init, batch sampling, and augmentation draws all come from one stream.
TrainResult train(const TrainConfig& cfg, const std::vector<FeatureMap>& dataset);

// Query-branch embedding vectors for a batch of images (one augmented view
// each); used by collapse diagnostics.
Matrix probe_embeddings(const EncoderParams& theta, const std::vector<FeatureMap>& images,
                        Index shared_grid, Rng& rng);

}  // namespace semd
