// SPDX-License-Identifier: Apache-2.0
//
// Visual front-end: a 3D-conv stem (64 filters, 5x7x7, spatial stride 2,
// BN/ReLU/max-pool) followed by a residual trunk of factored pseudo-3D
// bottleneck blocks cycled in the order A, B, C. Spatial extent shrinks
// with depth; the temporal extent is preserved throughout. The trunk ends
// with a spatial mean-pool, one feature vector per frame.

#pragma once

#include <array>
#include <memory>

#include "avsr/nn.hpp"
#include "avsr/tensor.hpp"

namespace avsr {

struct VideoClip {
  Tensor frames;  // [T,112,112], grayscale in [0,1]

  int64_t t() const { return frames.dim(0); }
  void validate() const;
};

inline constexpr int64_t kClipSize = 112;

struct P3DConfig {
  double width_mult = 0.125;            // desk-scale default
  std::array<int, 4> blocks{1, 1, 1, 1};

  // Full-size preset (50-layer trunk); used for shape checks.
  static P3DConfig full() { return {1.0, {3, 4, 6, 3}}; }

  int64_t stem_ch() const;
  int64_t stage_ch(int stage) const;  // trunk stage output widths
  int64_t feat_dim() const { return stage_ch(3); }
};

enum class P3DMode { kA, kB, kC };

// Bottleneck: 1x1x1 reduce, factored spatial (1x3x3) / temporal (3x1x1)
// pair wired per mode, 1x1x1 expand, identity or projected skip.
class P3DBlock : public nn::Module {
 public:
  P3DBlock(P3DMode mode, int64_t in_ch, int64_t out_ch, int64_t spatial_stride,
           bool zero_init_residual = true);
  Tensor forward(const Tensor& x);  // [C,T,H,W]
  P3DMode mode() const { return mode_; }

 private:
  P3DMode mode_;
  std::unique_ptr<nn::Conv3dLayer> reduce_, spatial_, temporal_, expand_, proj_;
  std::unique_ptr<nn::BatchNorm> bn_reduce_, bn_spatial_, bn_temporal_, bn_expand_, bn_proj_;
};

class VisualFrontend : public nn::Module {
 public:
  explicit VisualFrontend(const P3DConfig& cfg);
  // clip [T,112,112] -> features [T, feat_dim]
  Tensor forward(const VideoClip& clip);
  Tensor forward_frames(const Tensor& frames);
  int64_t feat_dim() const { return cfg_.feat_dim(); }
  const P3DConfig& config() const { return cfg_; }

 private:
  P3DConfig cfg_;
  std::unique_ptr<nn::Conv3dLayer> stem_;
  std::unique_ptr<nn::BatchNorm> stem_bn_;
  std::vector<std::unique_ptr<P3DBlock>> trunk_;
};

// Front-end plus a temporal mean-pool and one dense layer; the word-level
// pre-training head.
class WordClassifier : public nn::Module {
 public:
  WordClassifier(const P3DConfig& cfg, int n_classes);
  Tensor forward(const VideoClip& clip);  // [1, n_classes] logits
  VisualFrontend& frontend() { return *frontend_; }
  int n_classes() const { return n_classes_; }

 private:
  int n_classes_;
  std::unique_ptr<VisualFrontend> frontend_;
  std::unique_ptr<nn::Linear> head_;
};

}  // namespace avsr
