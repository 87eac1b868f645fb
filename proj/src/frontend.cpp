// SPDX-License-Identifier: Apache-2.0

#include "avsr/frontend.hpp"

#include <cmath>

#include "avsr/error.hpp"

namespace avsr {

void VideoClip::validate() const {
  if (frames.ndim() != 3 || frames.dim(1) != kClipSize || frames.dim(2) != kClipSize)
    throw FormatError("clip must be [T,112,112], got " + shape_str(frames.shape()));
  for (double v : frames.data())
    if (!(v >= 0.0 && v <= 1.0))
      throw FormatError("clip pixels must lie in [0,1]");
}

namespace {
int64_t scaled(int64_t base, double mult) {
  const auto v = static_cast<int64_t>(std::llround(base * mult));
  return v < 1 ? 1 : v;
}
}  // namespace

int64_t P3DConfig::stem_ch() const { return scaled(64, width_mult); }

int64_t P3DConfig::stage_ch(int stage) const {
  static constexpr int64_t kBase[4] = {64, 128, 256, 512};
  return scaled(kBase[stage], width_mult);
}

P3DBlock::P3DBlock(P3DMode mode, int64_t in_ch, int64_t out_ch,
                   int64_t spatial_stride, bool zero_init_residual)
    : mode_(mode) {
  const int64_t mid = std::max<int64_t>(1, out_ch / 4);
  ops::Conv3dOpts one;
  ops::Conv3dOpts reduce = one;
  reduce.sh = reduce.sw = spatial_stride;
  ops::Conv3dOpts spatial = one;
  spatial.ph = spatial.pw = 1;
  ops::Conv3dOpts temporal = one;
  temporal.pt = 1;

  reduce_ = std::make_unique<nn::Conv3dLayer>(in_ch, mid, 1, 1, 1, reduce, false);
  spatial_ = std::make_unique<nn::Conv3dLayer>(mid, mid, 1, 3, 3, spatial, false);
  temporal_ = std::make_unique<nn::Conv3dLayer>(mid, mid, 3, 1, 1, temporal, false);
  expand_ = std::make_unique<nn::Conv3dLayer>(mid, out_ch, 1, 1, 1, one, false);
  bn_reduce_ = std::make_unique<nn::BatchNorm>(mid);
  bn_spatial_ = std::make_unique<nn::BatchNorm>(mid);
  bn_temporal_ = std::make_unique<nn::BatchNorm>(mid);
  bn_expand_ = std::make_unique<nn::BatchNorm>(out_ch, zero_init_residual);
  register_module("reduce", *reduce_);
  register_module("spatial", *spatial_);
  register_module("temporal", *temporal_);
  register_module("expand", *expand_);
  register_module("bn_reduce", *bn_reduce_);
  register_module("bn_spatial", *bn_spatial_);
  register_module("bn_temporal", *bn_temporal_);
  register_module("bn_expand", *bn_expand_);
  if (in_ch != out_ch || spatial_stride != 1) {
    proj_ = std::make_unique<nn::Conv3dLayer>(in_ch, out_ch, 1, 1, 1, reduce, false);
    bn_proj_ = std::make_unique<nn::BatchNorm>(out_ch);
    register_module("proj", *proj_);
    register_module("bn_proj", *bn_proj_);
  }
}

Tensor P3DBlock::forward(const Tensor& x) {
  Tensor y = ops::relu(bn_reduce_->forward(reduce_->forward(x)));
  Tensor branch;
  switch (mode_) {
    case P3DMode::kA: {
      Tensor s = ops::relu(bn_spatial_->forward(spatial_->forward(y)));
      branch = ops::relu(bn_temporal_->forward(temporal_->forward(s)));
      break;
    }
    case P3DMode::kB: {
      Tensor s = ops::relu(bn_spatial_->forward(spatial_->forward(y)));
      Tensor t = ops::relu(bn_temporal_->forward(temporal_->forward(y)));
      branch = ops::add(s, t);
      break;
    }
    case P3DMode::kC: {
      Tensor s = ops::relu(bn_spatial_->forward(spatial_->forward(y)));
      Tensor t = ops::relu(bn_temporal_->forward(temporal_->forward(s)));
      branch = ops::add(s, t);
      break;
    }
  }
  branch = bn_expand_->forward(expand_->forward(branch));
  Tensor skip = proj_ ? bn_proj_->forward(proj_->forward(x)) : x;
  return ops::relu(ops::add(skip, branch));
}

VisualFrontend::VisualFrontend(const P3DConfig& cfg) : cfg_(cfg) {
  ops::Conv3dOpts stem;
  stem.sh = stem.sw = 2;
  stem.pt = 2;
  stem.ph = stem.pw = 3;
  stem_ = std::make_unique<nn::Conv3dLayer>(1, cfg.stem_ch(), 5, 7, 7, stem, false);
  stem_bn_ = std::make_unique<nn::BatchNorm>(cfg.stem_ch());
  register_module("stem", *stem_);
  register_module("stem_bn", *stem_bn_);

  // Trunk blocks cycle A,B,C over the global block index.
  static constexpr P3DMode kCycle[3] = {P3DMode::kA, P3DMode::kB, P3DMode::kC};
  int64_t in_ch = cfg.stem_ch();
  int block_idx = 0;
  for (int stage = 0; stage < 4; ++stage) {
    const int64_t out_ch = cfg.stage_ch(stage);
    for (int b = 0; b < cfg.blocks[static_cast<size_t>(stage)]; ++b) {
      const int64_t stride = (stage > 0 && b == 0) ? 2 : 1;
      trunk_.push_back(std::make_unique<P3DBlock>(kCycle[block_idx % 3], in_ch,
                                                  out_ch, stride));
      register_module("stage" + std::to_string(stage) + "/block" + std::to_string(b),
                      *trunk_.back());
      in_ch = out_ch;
      ++block_idx;
    }
  }
}

Tensor VisualFrontend::forward(const VideoClip& clip) {
  return forward_frames(clip.frames);
}

Tensor VisualFrontend::forward_frames(const Tensor& frames) {
  if (frames.ndim() != 3 || frames.dim(1) != kClipSize || frames.dim(2) != kClipSize)
    throw FormatError("frontend: clip must be [T,112,112], got " +
                      shape_str(frames.shape()));
  const int64_t t = frames.dim(0);
  Tensor x = ops::reshape(frames, {1, t, kClipSize, kClipSize});
  x = ops::relu(stem_bn_->forward(stem_->forward(x)));
  x = ops::maxpool_spatial(x, 3, 3, 2, 2, 1, 1);
  for (auto& block : trunk_) x = block->forward(x);
  return ops::transpose2d(ops::mean_pool_spatial(x));  // [T, feat]
}

WordClassifier::WordClassifier(const P3DConfig& cfg, int n_classes)
    : n_classes_(n_classes) {
  if (n_classes < 2) throw ConfigError("word classifier: need at least two classes");
  frontend_ = std::make_unique<VisualFrontend>(cfg);
  head_ = std::make_unique<nn::Linear>(cfg.feat_dim(), n_classes);
  register_module("frontend", *frontend_);
  register_module("head", *head_);
}

Tensor WordClassifier::forward(const VideoClip& clip) {
  Tensor feats = frontend_->forward(clip);       // [T, D]
  return head_->forward(ops::mean_rows(feats));  // [1, n_classes]
}

}  // namespace avsr
