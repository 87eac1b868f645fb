// SPDX-License-Identifier: Apache-2.0
//
// GRU layer with an element-wise attention gate on the input. One gate is
// shared by the whole layer; its response a_t has the input's dimension and
// rescales x_t before the ordinary GRU gates:
//
//   a_t = sigmoid(W_xa x_t + W_ha h_{t-1} + b_a)
//   x~  = a_t  * x_t
//   r_t = sigmoid(W_xr x~ + W_hr h_{t-1} + b_r)
//   z_t = sigmoid(W_xz x~ + W_hz h_{t-1} + b_z)
//   h'  = tanh(W_xh x~ + W_hh (r_t * h_{t-1}) + b_h)
//   h_t = z_t * h_{t-1} + (1 - z_t) * h'

#pragma once

#include "avsr/nn.hpp"
#include "avsr/tensor.hpp"

namespace avsr {

class EleAttGRU : public nn::Module {
 public:
  EleAttGRU(int64_t input_dim, int64_t hidden_dim);

  // x [1,D], h_prev [1,N] -> h [1,N]
  Tensor step(const Tensor& x, const Tensor& h_prev) const;
  // xs [L,D] -> hidden states [L,N]; h0 defaults to zeros. L >= 1.
  Tensor run(const Tensor& xs, const Tensor& h0 = Tensor()) const;

  int64_t input_dim() const { return input_dim_; }
  int64_t hidden_dim() const { return hidden_dim_; }

  // Test hook: pin the attention response at exactly 1, which reduces the
  // cell to a vanilla GRU.
  void force_attention_ones(bool on) { force_attention_ones_ = on; }

 private:
  int64_t input_dim_, hidden_dim_;
  bool force_attention_ones_ = false;
  nn::Parameter *w_xa_, *w_ha_, *b_a_;
  nn::Parameter *w_xr_, *w_hr_, *b_r_;
  nn::Parameter *w_xz_, *w_hz_, *b_z_;
  nn::Parameter *w_xh_, *w_hh_, *b_h_;
};

// Stacked recurrent encoder; parameters live under eleatt_gru/<layer>/<name>.
class EleAttGRUStack : public nn::Module {
 public:
  EleAttGRUStack(int layers, int64_t input_dim, int64_t hidden_dim);

  Tensor run(const Tensor& xs) const;  // [L,D] -> [L,N]
  EleAttGRU& layer(int i) { return *layers_.at(static_cast<size_t>(i)); }
  int layer_count() const { return static_cast<int>(layers_.size()); }

 private:
  std::vector<std::unique_ptr<EleAttGRU>> layers_;
};

}  // namespace avsr
