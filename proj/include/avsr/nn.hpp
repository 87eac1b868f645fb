// SPDX-License-Identifier: Apache-2.0
//
// Parameter registry and the layer zoo shared by the front-end, temporal
// streams and recurrent models. Parameters get slash-separated path names
// for checkpointing; buffers hold non-trainable state (running statistics).

#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "avsr/ops.hpp"
#include "avsr/tensor.hpp"

namespace avsr::nn {

// Seeds the global stream used for parameter init and dropout masks. Call
// once before constructing models; construction order then fixes the run.
void seed_all(uint64_t seed);
std::mt19937_64& init_rng();
uint64_t next_stream_seed();

struct Parameter {
  std::string name;  // full path, assigned when the owning tree is walked
  Tensor value;
  bool frozen = false;
};

struct Buffer {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

class Module {
 public:
  virtual ~Module() = default;
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  std::vector<Parameter*> parameters();
  std::vector<Buffer*> buffers();
  // Walks the tree, assigning full path names as a side effect.
  void named_parameters(const std::string& prefix, std::vector<Parameter*>& out);
  void named_buffers(const std::string& prefix, std::vector<Buffer*>& out);

  void set_training(bool training);
  bool training() const { return training_; }
  // Marks every parameter in the subtree (non-)trainable for the optimizer.
  void set_frozen(bool frozen);

  int64_t parameter_count();

 protected:
  enum class Init { kZeros, kOnes, kFanInUniform };
  Parameter& register_parameter(const std::string& name, Shape shape, Init init,
                                int64_t fan_in = 0);
  Buffer& register_buffer(const std::string& name, Shape shape, double fill);
  void register_module(const std::string& name, Module& m);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::vector<std::unique_ptr<Buffer>> buffers_;
  std::vector<std::pair<std::string, Module*>> children_;
  bool training_ = true;
};

// ---------------------------------------------------------------------------

class Linear : public Module {
 public:
  Linear(int64_t in, int64_t out, bool bias = true);
  Tensor forward(const Tensor& x) const;  // [m,in] -> [m,out]

 private:
  Parameter* w_;
  Parameter* b_ = nullptr;
};

class Embedding : public Module {
 public:
  Embedding(int64_t vocab, int64_t dim);
  Tensor forward(const std::vector<int>& ids) const;

 private:
  Parameter* table_;
};

struct ConvSpec {
  int64_t stride = 1;
  int64_t dilation = 1;
  int64_t pad_lo = 0, pad_hi = 0;
  int64_t groups = 1;
  bool transposed = false;
  bool causal = false;  // overrides pad_lo/pad_hi with (K-1)*dilation left pad
};

class Conv1dLayer : public Module {
 public:
  Conv1dLayer(int64_t in_ch, int64_t out_ch, int64_t kernel, ConvSpec spec,
              bool bias = true);
  Tensor forward(const Tensor& x) const;

 private:
  Parameter* w_;
  Parameter* b_ = nullptr;
  ops::Conv1dOpts opts_;
};

// Conv1d with the weight-norm reparameterization w = g * v / ||v||.
class WNConv1dLayer : public Module {
 public:
  WNConv1dLayer(int64_t in_ch, int64_t out_ch, int64_t kernel, ConvSpec spec,
                bool bias = true);
  Tensor forward(const Tensor& x) const;

 private:
  Parameter* v_;
  Parameter* g_;
  Parameter* b_ = nullptr;
  ops::Conv1dOpts opts_;
};

class Conv3dLayer : public Module {
 public:
  Conv3dLayer(int64_t in_ch, int64_t out_ch, int64_t kt, int64_t kh, int64_t kw,
              ops::Conv3dOpts opts, bool bias = true);
  Tensor forward(const Tensor& x) const;

 private:
  Parameter* w_;
  Parameter* b_ = nullptr;
  ops::Conv3dOpts opts_;
};

// Normalizes over all trailing axes of a channel-first tensor.
class BatchNorm : public Module {
 public:
  explicit BatchNorm(int64_t channels, bool zero_init_gamma = false);
  Tensor forward(const Tensor& x);

 private:
  Parameter* gamma_;
  Parameter* beta_;
  Buffer* mean_;
  Buffer* var_;
};

class Dropout : public Module {
 public:
  explicit Dropout(double p);
  Tensor forward(const Tensor& x);
  void reseed(uint64_t seed) { rng_.seed(seed); }

 private:
  double p_;
  std::mt19937_64 rng_;
};

class SpatialDropout : public Module {
 public:
  explicit SpatialDropout(double p);
  Tensor forward(const Tensor& x);
  void reseed(uint64_t seed) { rng_.seed(seed); }

 private:
  double p_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------

class Adam {
 public:
  explicit Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step();
  void zero_grad();
  double lr() const { return lr_; }
  void set_lr(double lr);

 private:
  std::vector<Parameter*> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

// Halves the learning rate when the tracked loss stops improving; never
// drops below the floor.
class PlateauLr {
 public:
  PlateauLr(double initial, double floor, int patience, double factor = 0.5,
            double min_delta = 1e-4);
  double update(double loss);  // returns the (possibly reduced) rate
  double current() const { return lr_; }

 private:
  double lr_, floor_, factor_, min_delta_;
  int patience_, since_ = 0;
  double best_;
};

}  // namespace avsr::nn
