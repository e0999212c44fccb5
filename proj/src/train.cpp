// SPDX-License-Identifier: Apache-2.0

#include "semd/train.hpp"

#include <cmath>

namespace semd {
namespace {

struct QueryPass {
  ForwardCache cache;
  BranchOutput out;
  NodeMatrix pyr_nodes;
  // Accumulated output-side gradients; one backward call per view.
  NodeMatrix d_map;
  EmbeddingVector d_vec;
};

struct KeyPass {
  BranchOutput out;
  NodeMatrix pyr_nodes;
};

QueryPass run_query(const EncoderParams& theta, const FeatureMap& view, const TrainConfig& cfg) {
  QueryPass q;
  q.out = forward(theta, view, BranchRole::kQuery, cfg.shared_grid, &q.cache);
  q.pyr_nodes = pyramid_nodes(q.out.map, cfg.pyramid);
  q.d_map = NodeMatrix::Zero(q.out.map.nodes().rows(), q.out.map.nodes().cols());
  q.d_vec = EmbeddingVector::Zero(q.out.vec.size());
  return q;
}

KeyPass run_key(const EncoderParams& xi, const FeatureMap& view, const TrainConfig& cfg) {
  KeyPass k;
  k.out = forward(xi, view, BranchRole::kKey, cfg.shared_grid);
  k.pyr_nodes = pyramid_nodes(k.out.map, cfg.pyramid);
  return k;
}

struct DirectionLoss {
  double emd = 0.0;
  double vec = 0.0;
};

// One loss direction: query side of `q` against key side of `k`. Adds the
// output-side gradients into q; the key side is a constant (stop-gradient).
DirectionLoss direction(QueryPass& q, const KeyPass& k, const TrainConfig& cfg) {
  LossConfig loss_cfg;
  loss_cfg.sinkhorn = cfg.sinkhorn;

  LossBreakdown lb = emd_loss_nodes(q.pyr_nodes, k.pyr_nodes, q.out.vec, k.out.vec, loss_cfg);
  const NodeMatrix d_pyr = emd_loss_grad_x(q.pyr_nodes, k.pyr_nodes, lb.plan);
  q.d_map += pyramid_backward(d_pyr, q.out.map.height(), q.out.map.width(), cfg.pyramid);

  const double vec_loss = byol_vector_loss(q.out.vec, k.out.vec);
  q.d_vec += cfg.loss_mix * byol_vector_loss_grad_p(q.out.vec, k.out.vec);

  return DirectionLoss{lb.emd_loss, vec_loss};
}

// One optimization step: samples a batch, accumulates the loss record and
// parameter gradients (sum over batch items, not yet averaged).
void run_step(const TrainConfig& cfg, const std::vector<FeatureMap>& dataset, Rng& rng,
              const TrainResult& state, EncoderParams& grads, StepRecord& rec) {
  for (int item = 0; item < cfg.batch; ++item) {
    const auto& image = dataset[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(dataset.size()) - 1))];
    const FeatureMap view_a = augment(image, rng);
    const FeatureMap view_b = augment(image, rng);

    QueryPass qa = run_query(state.theta, view_a, cfg);
    QueryPass qb = run_query(state.theta, view_b, cfg);
    const KeyPass ka = run_key(state.xi, view_a, cfg);
    const KeyPass kb = run_key(state.xi, view_b, cfg);

    const DirectionLoss ab = direction(qa, kb, cfg);
    const DirectionLoss ba = direction(qb, ka, cfg);
    rec.emd_ab += ab.emd;
    rec.emd_ba += ba.emd;
    rec.vec_ab += ab.vec;
    rec.vec_ba += ba.vec;
    rec.total += ab.emd + cfg.loss_mix * ab.vec + ba.emd + cfg.loss_mix * ba.vec;

    if (cfg.small_view) {
      // The small view joins as an extra query against both key views.
      const FeatureMap view_s = small_view(image, rng);
      QueryPass qs = run_query(state.theta, view_s, cfg);
      const DirectionLoss sa = direction(qs, ka, cfg);
      const DirectionLoss sb = direction(qs, kb, cfg);
      rec.total += sa.emd + cfg.loss_mix * sa.vec + sb.emd + cfg.loss_mix * sb.vec;
      backward(state.theta, qs.cache, qs.d_map, qs.d_vec, grads);
    }

    backward(state.theta, qa.cache, qa.d_map, qa.d_vec, grads);
    backward(state.theta, qb.cache, qb.d_map, qb.d_vec, grads);
  }

  const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
  rec.emd_ab *= inv_batch;
  rec.emd_ba *= inv_batch;
  rec.vec_ab *= inv_batch;
  rec.vec_ba *= inv_batch;
  rec.total *= inv_batch;
}

}  // namespace

void TrainConfig::validate() const {
  detail::require(momentum >= 0.0 && momentum <= 1.0, "train: momentum must be in [0, 1]");
  detail::require(lr > 0.0, "train: lr must be > 0");
  detail::require(steps >= 0, "train: steps must be >= 0");
  detail::require(batch >= 1, "train: batch must be >= 1");
  detail::require(warmup_steps >= 0, "train: warmup_steps must be >= 0");
  detail::require(loss_mix >= 0.0, "train: loss_mix must be >= 0");
  detail::require(small_view_scale > 0.0 && small_view_scale <= 1.0,
                  "train: small_view_scale must be in (0, 1]");
}

double learning_rate(const TrainConfig& cfg, int step) {
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
    return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  const int decay_span = cfg.steps - cfg.warmup_steps;
  if (decay_span <= 0) return cfg.lr;
  const double progress =
      static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(decay_span);
  return cfg.lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

TrainResult train(const TrainConfig& cfg, const std::vector<FeatureMap>& dataset) {
  cfg.validate();
  detail::require(!dataset.empty(), "train: dataset must not be empty");

  Rng rng(cfg.seed);
  TrainResult result;
  result.theta = EncoderParams::random_init(rng);
  result.xi = result.theta;  // target starts as a copy of the online network
  result.history.reserve(static_cast<std::size_t>(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    const double lr = learning_rate(cfg, step);
    EncoderParams grads = EncoderParams::zeros();
    StepRecord rec;
    rec.step = step;
    rec.lr = lr;

    // With a validated config, the only invalid_argument reachable inside a
    // step is a non-finite numeric state (exploded activations, NaN costs):
    // divergence, not misuse.
    try {
      run_step(cfg, dataset, rng, result, grads, rec);
    } catch (const std::invalid_argument&) {
      throw TrainingDiverged(step);
    }
    if (!std::isfinite(rec.total)) throw TrainingDiverged(step);

    add_scaled(result.theta, grads, -lr / static_cast<double>(cfg.batch));
    if (!result.theta.to_vector().allFinite()) throw TrainingDiverged(step);
    result.xi = ema_update(result.xi, result.theta, cfg.momentum);
    result.history.push_back(rec);
  }
  return result;
}

Matrix probe_embeddings(const EncoderParams& theta, const std::vector<FeatureMap>& images,
                        Index shared_grid, Rng& rng) {
  Matrix out(static_cast<Index>(images.size()), kEmbedDim);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const FeatureMap view = augment(images[i], rng);
    out.row(static_cast<Index>(i)) =
        forward(theta, view, BranchRole::kQuery, shared_grid).vec.transpose();
  }
  return out;
}

}  // namespace semd
