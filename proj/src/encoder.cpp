// SPDX-License-Identifier: Apache-2.0

#include "semd/encoder.hpp"

#include "semd/pyramid.hpp"

#include <cmath>

namespace semd {
namespace {

Index conv_out_size(Index in) { return (in + 2 * kConvPad - kConvKernel) / kConvStride + 1; }

// Patch matrix for a 3x3 stride-2 pad-1 convolution: row = output position,
// column = c_in * 9 + dy * 3 + dx; zero padding fills out-of-bounds taps.
Matrix im2col(const NodeMatrix& input, Index h, Index w) {
  const Index channels = input.cols();
  const Index oh = conv_out_size(h);
  const Index ow = conv_out_size(w);
  Matrix patches = Matrix::Zero(oh * ow, channels * kConvKernel * kConvKernel);
  for (Index oy = 0; oy < oh; ++oy) {
    for (Index ox = 0; ox < ow; ++ox) {
      const Index row = oy * ow + ox;
      for (Index dy = 0; dy < kConvKernel; ++dy) {
        const Index y = oy * kConvStride - kConvPad + dy;
        if (y < 0 || y >= h) continue;
        for (Index dx = 0; dx < kConvKernel; ++dx) {
          const Index x = ox * kConvStride - kConvPad + dx;
          if (x < 0 || x >= w) continue;
          for (Index c = 0; c < channels; ++c)
            patches(row, c * 9 + dy * 3 + dx) = input(y * w + x, c);
        }
      }
    }
  }
  return patches;
}

// Adjoint of im2col: scatters patch gradients back onto the input grid.
NodeMatrix col2im(const Matrix& d_patches, Index h, Index w, Index channels) {
  const Index oh = conv_out_size(h);
  const Index ow = conv_out_size(w);
  NodeMatrix d_input = NodeMatrix::Zero(h * w, channels);
  for (Index oy = 0; oy < oh; ++oy) {
    for (Index ox = 0; ox < ow; ++ox) {
      const Index row = oy * ow + ox;
      for (Index dy = 0; dy < kConvKernel; ++dy) {
        const Index y = oy * kConvStride - kConvPad + dy;
        if (y < 0 || y >= h) continue;
        for (Index dx = 0; dx < kConvKernel; ++dx) {
          const Index x = ox * kConvStride - kConvPad + dx;
          if (x < 0 || x >= w) continue;
          for (Index c = 0; c < channels; ++c)
            d_input(y * w + x, c) += d_patches(row, c * 9 + dy * 3 + dx);
        }
      }
    }
  }
  return d_input;
}

void append(Vector& flat, Index& at, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) flat(at++) = m(i, j);
}

void append(Vector& flat, Index& at, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) flat(at++) = v(i);
}

void take(const Vector& flat, Index& at, Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = flat(at++);
}

void take(const Vector& flat, Index& at, Vector& v) {
  for (Index i = 0; i < v.size(); ++i) v(i) = flat(at++);
}

}  // namespace

Index native_grid(Index input_size) {
  Index g = input_size;
  for (int l = 0; l < kConvLayers; ++l) g = conv_out_size(g);
  return g;
}

EncoderParams EncoderParams::zeros() {
  EncoderParams p;
  for (int l = 0; l < kConvLayers; ++l) {
    p.conv_w[l] = Matrix::Zero(kChannelPlan[l + 1], kChannelPlan[l] * 9);
    p.conv_b[l] = Vector::Zero(kChannelPlan[l + 1]);
  }
  p.proj_w = Matrix::Zero(kProjDim, kChannelPlan[3]);
  p.proj_b = Vector::Zero(kProjDim);
  p.pred_w = Matrix::Zero(kProjDim, kProjDim);
  p.pred_b = Vector::Zero(kProjDim);
  p.vec_w = Matrix::Zero(kEmbedDim, kChannelPlan[3]);
  p.vec_b = Vector::Zero(kEmbedDim);
  return p;
}

EncoderParams EncoderParams::random_init(Rng& rng) {
  EncoderParams p = zeros();
  auto he_fill = [&rng](Matrix& w) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(w.cols()));
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = rng.normal(0.0, stddev);
  };
  for (int l = 0; l < kConvLayers; ++l) he_fill(p.conv_w[l]);
  he_fill(p.proj_w);
  he_fill(p.pred_w);
  he_fill(p.vec_w);
  return p;
}

Index EncoderParams::param_count() const {
  Index n = 0;
  for (int l = 0; l < kConvLayers; ++l) n += conv_w[l].size() + conv_b[l].size();
  n += proj_w.size() + proj_b.size();
  n += pred_w.size() + pred_b.size();
  n += vec_w.size() + vec_b.size();
  return n;
}

Vector EncoderParams::to_vector() const {
  Vector flat(param_count());
  Index at = 0;
  for (int l = 0; l < kConvLayers; ++l) {
    append(flat, at, conv_w[l]);
    append(flat, at, conv_b[l]);
  }
  append(flat, at, proj_w);
  append(flat, at, proj_b);
  append(flat, at, pred_w);
  append(flat, at, pred_b);
  append(flat, at, vec_w);
  append(flat, at, vec_b);
  return flat;
}

EncoderParams EncoderParams::from_vector(const Vector& flat) {
  EncoderParams p = zeros();
  detail::require(flat.size() == p.param_count(), "EncoderParams: flat size mismatch");
  Index at = 0;
  for (int l = 0; l < kConvLayers; ++l) {
    take(flat, at, p.conv_w[l]);
    take(flat, at, p.conv_b[l]);
  }
  take(flat, at, p.proj_w);
  take(flat, at, p.proj_b);
  take(flat, at, p.pred_w);
  take(flat, at, p.pred_b);
  take(flat, at, p.vec_w);
  take(flat, at, p.vec_b);
  return p;
}

bool EncoderParams::same_topology(const EncoderParams& other) const {
  for (int l = 0; l < kConvLayers; ++l)
    if (conv_w[l].rows() != other.conv_w[l].rows() || conv_w[l].cols() != other.conv_w[l].cols())
      return false;
  return proj_w.size() == other.proj_w.size() && pred_w.size() == other.pred_w.size() &&
         vec_w.size() == other.vec_w.size();
}

void add_scaled(EncoderParams& dst, const EncoderParams& src, double scale) {
  for (int l = 0; l < kConvLayers; ++l) {
    dst.conv_w[l] += scale * src.conv_w[l];
    dst.conv_b[l] += scale * src.conv_b[l];
  }
  dst.proj_w += scale * src.proj_w;
  dst.proj_b += scale * src.proj_b;
  dst.pred_w += scale * src.pred_w;
  dst.pred_b += scale * src.pred_b;
  dst.vec_w += scale * src.vec_w;
  dst.vec_b += scale * src.vec_b;
}

void sgd_step(EncoderParams& theta, const EncoderParams& grad, double lr) {
  add_scaled(theta, grad, -lr);
}

EncoderParams ema_update(const EncoderParams& xi, const EncoderParams& theta, double m) {
  detail::require(m >= 0.0 && m <= 1.0, "ema_update: momentum must be in [0, 1]");
  detail::require(xi.same_topology(theta), "ema_update: topology mismatch");
  if (m == 0.0) return theta;
  if (m == 1.0) return xi;
  EncoderParams out = xi;
  auto blend_m = [m](Matrix& target, const Matrix& anchor) {
    target = anchor + m * (target - anchor);
  };
  auto blend_v = [m](Vector& target, const Vector& anchor) {
    target = anchor + m * (target - anchor);
  };
  for (int l = 0; l < kConvLayers; ++l) {
    blend_m(out.conv_w[l], theta.conv_w[l]);
    blend_v(out.conv_b[l], theta.conv_b[l]);
  }
  blend_m(out.proj_w, theta.proj_w);
  blend_v(out.proj_b, theta.proj_b);
  blend_m(out.pred_w, theta.pred_w);
  blend_v(out.pred_b, theta.pred_b);
  blend_m(out.vec_w, theta.vec_w);
  blend_v(out.vec_b, theta.vec_b);
  return out;
}

BranchOutput forward(const EncoderParams& params, const FeatureMap& view, BranchRole role,
                     Index shared_grid, ForwardCache* cache) {
  detail::require(view.channels() == kChannelPlan[0], "forward: view must have 3 channels");
  NodeMatrix x = view.nodes();
  Index h = view.height();
  Index w = view.width();

  for (int l = 0; l < kConvLayers; ++l) {
    Matrix patches = im2col(x, h, w);
    Matrix pre = patches * params.conv_w[l].transpose();
    pre.rowwise() += params.conv_b[l].transpose();
    if (cache) {
      cache->patches[l] = patches;
      cache->preact[l] = pre;
      cache->in_shape[l] = {h, w};
    }
    x = pre.cwiseMax(0.0);
    h = conv_out_size(h);
    w = conv_out_size(w);
  }

  Matrix proj = x * params.proj_w.transpose();
  proj.rowwise() += params.proj_b.transpose();

  Matrix map_nodes;
  if (role == BranchRole::kQuery) {
    map_nodes = proj * params.pred_w.transpose();
    map_nodes.rowwise() += params.pred_b.transpose();
  } else {
    map_nodes = proj;
  }

  Matrix resample;
  if (h != shared_grid || w != shared_grid) {
    resample = pooling_matrix(h, w, shared_grid);
    map_nodes = resample * map_nodes;
  }

  const Vector gap = x.colwise().mean().transpose();
  EmbeddingVector vec = params.vec_w * gap + params.vec_b;

  if (cache) {
    cache->conv_out = x;
    cache->out_h = h;
    cache->out_w = w;
    cache->proj_out = proj;
    cache->resample = resample;
    cache->gap = gap;
  }

  NodeMatrix nodes = map_nodes;
  return BranchOutput{FeatureMap(shared_grid, shared_grid, std::move(nodes)), std::move(vec)};
}

void backward(const EncoderParams& params, const ForwardCache& cache,
              const NodeMatrix& d_map_nodes, const EmbeddingVector& d_vec,
              EncoderParams& grads) {
  // Map head: undo the shared-grid resample, then predictor, then projection.
  Matrix d_nodes = d_map_nodes;
  if (cache.resample.size() > 0) d_nodes = cache.resample.transpose() * d_nodes;

  grads.pred_w += d_nodes.transpose() * cache.proj_out;
  grads.pred_b += d_nodes.colwise().sum().transpose();
  Matrix d_proj = d_nodes * params.pred_w;

  grads.proj_w += d_proj.transpose() * cache.conv_out;
  grads.proj_b += d_proj.colwise().sum().transpose();
  Matrix d_conv_out = d_proj * params.proj_w;

  // Vector head: affine on the global average of the conv output.
  grads.vec_w += d_vec * cache.gap.transpose();
  grads.vec_b += d_vec;
  const Vector d_gap = params.vec_w.transpose() * d_vec;
  d_conv_out.rowwise() += (d_gap / static_cast<double>(cache.conv_out.rows())).transpose();

  // Conv stack, last layer first.
  Matrix d_out = std::move(d_conv_out);
  for (int l = kConvLayers - 1; l >= 0; --l) {
    const Matrix d_pre =
        d_out.cwiseProduct((cache.preact[l].array() > 0.0).cast<double>().matrix());
    grads.conv_w[l] += d_pre.transpose() * cache.patches[l];
    grads.conv_b[l] += d_pre.colwise().sum().transpose();
    if (l > 0) {
      const Matrix d_patches = d_pre * params.conv_w[l];
      d_out = col2im(d_patches, cache.in_shape[l].first, cache.in_shape[l].second,
                     kChannelPlan[l]);
    }
  }
}

}  // namespace semd
