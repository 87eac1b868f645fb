// SPDX-License-Identifier: Apache-2.0
//
// Temporal convolution units and the stream assemblers of the enhancement
// network. Two interchangeable unit families: dilated-causal TCN blocks and
// depthwise-separable 1D ResNet blocks. Video streams upsample by 4 in two
// transposed-convolution stages; audio streams preserve length.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "avsr/nn.hpp"
#include "avsr/tensor.hpp"

namespace avsr {

// Two dilated causal conv layers (weight norm, ReLU, spatial dropout after
// each) with an identity skip. No output at time t reads an input past t.
class TCNBlock : public nn::Module {
 public:
  TCNBlock(int64_t channels, int64_t kernel, int64_t dilation, double dropout_p);
  Tensor forward(const Tensor& x);  // [C,L] -> [C,L]

 private:
  std::unique_ptr<nn::WNConv1dLayer> conv1_, conv2_;
  std::unique_ptr<nn::SpatialDropout> drop1_, drop2_;
  int64_t channels_;
};

// Depthwise-separable conv, batch norm, ReLU; residual added after the ReLU.
// Stride-2 variants halve the length and project the skip.
class ResNet1DBlock : public nn::Module {
 public:
  ResNet1DBlock(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride);
  Tensor forward(const Tensor& x);  // [C,L] -> [C',ceil(L/stride)]

 private:
  std::unique_ptr<nn::Conv1dLayer> depth_, point_, proj_;
  std::unique_ptr<nn::BatchNorm> bn_;
};

// One row of a stream layer table. `fractional` marks a transposed
// convolution (stride acts as the upsampling factor).
struct StreamRow {
  enum class Kind { kFc, kBlock, kUp, kTcn };
  Kind kind = Kind::kFc;
  int64_t filters = 0;
  int64_t kernel = 1;
  int64_t stride = 1;
  bool fractional = false;
  int64_t n_blocks = 1;  // TCN rows: stacked blocks with dilations 1,2,4,...
};

struct StreamSpec {
  enum class Unit { kTcn, kResnet1d };
  Unit unit = Unit::kResnet1d;
  std::vector<StreamRow> rows;
  double dropout_p = 0.1;

  // Compact textual form, e.g.
  //   "fc:96; block:96 k5; up:96 k5 x2; tcn:96 k3 n3; fc:48"
  static StreamSpec parse(const std::string& text);
  std::string to_string() const;
  // Appendix-style layer table (filters, K, S, P, Out) for a length-T input.
  std::string table(int64_t t_in) const;

  int64_t upsample_factor() const;
  int64_t out_channels(int64_t in_ch) const;
  void validate_video() const;  // exactly two x2 upsampling stages
  void validate_audio() const;  // length-preserving rows only
};

// A stream instantiated from a StreamSpec.
class TemporalStream : public nn::Module {
 public:
  TemporalStream(int64_t in_ch, const StreamSpec& spec);
  Tensor forward(const Tensor& x);  // [C,L] -> [C',L * upsample]
  const StreamSpec& spec() const { return spec_; }

 private:
  struct Stage {
    StreamRow row;
    std::unique_ptr<nn::Conv1dLayer> conv;       // fc / up rows
    std::unique_ptr<nn::BatchNorm> bn;           // up rows (resnet unit)
    std::vector<std::unique_ptr<TCNBlock>> tcn;  // tcn rows
    std::unique_ptr<ResNet1DBlock> block;        // block rows
  };
  StreamSpec spec_;
  std::vector<Stage> stages_;
};

// feats [T,D] -> [4T,C]; throws ConfigError unless the spec upsamples by 4.
Tensor video_stream(TemporalStream& stream, const Tensor& feats);
// mel [4T,F] -> [4T,C]; length must be preserved.
Tensor audio_stream(TemporalStream& stream, const Tensor& mel);

}  // namespace avsr
