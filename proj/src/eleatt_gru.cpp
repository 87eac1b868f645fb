// SPDX-License-Identifier: Apache-2.0

#include "avsr/eleatt_gru.hpp"

#include "avsr/error.hpp"

namespace avsr {

using ops::add;
using ops::add_rowvec;
using ops::matmul;
using ops::mul;
using ops::one_minus;
using ops::sigmoid;
using ops::tanh_op;

EleAttGRU::EleAttGRU(int64_t input_dim, int64_t hidden_dim)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (input_dim < 1 || hidden_dim < 1)
    throw ConfigError("eleatt_gru: dimensions must be positive");
  using I = Init;
  w_xa_ = &register_parameter("w_xa", {input_dim, input_dim}, I::kFanInUniform, input_dim);
  w_ha_ = &register_parameter("w_ha", {hidden_dim, input_dim}, I::kFanInUniform, hidden_dim);
  b_a_ = &register_parameter("b_a", {input_dim}, I::kZeros);
  w_xr_ = &register_parameter("w_xr", {input_dim, hidden_dim}, I::kFanInUniform, input_dim);
  w_hr_ = &register_parameter("w_hr", {hidden_dim, hidden_dim}, I::kFanInUniform, hidden_dim);
  b_r_ = &register_parameter("b_r", {hidden_dim}, I::kZeros);
  w_xz_ = &register_parameter("w_xz", {input_dim, hidden_dim}, I::kFanInUniform, input_dim);
  w_hz_ = &register_parameter("w_hz", {hidden_dim, hidden_dim}, I::kFanInUniform, hidden_dim);
  b_z_ = &register_parameter("b_z", {hidden_dim}, I::kZeros);
  w_xh_ = &register_parameter("w_xh", {input_dim, hidden_dim}, I::kFanInUniform, input_dim);
  w_hh_ = &register_parameter("w_hh", {hidden_dim, hidden_dim}, I::kFanInUniform, hidden_dim);
  b_h_ = &register_parameter("b_h", {hidden_dim}, I::kZeros);
}

Tensor EleAttGRU::step(const Tensor& x, const Tensor& h_prev) const {
  if (x.ndim() != 2 || x.dim(0) != 1 || x.dim(1) != input_dim_)
    throw ContractError("eleatt_gru: input " + shape_str(x.shape()) + " does not match D=" +
                        std::to_string(input_dim_));
  if (h_prev.ndim() != 2 || h_prev.dim(0) != 1 || h_prev.dim(1) != hidden_dim_)
    throw ContractError("eleatt_gru: state " + shape_str(h_prev.shape()) +
                        " does not match N=" + std::to_string(hidden_dim_));

  Tensor xt;
  if (force_attention_ones_) {
    xt = mul(Tensor::full({1, input_dim_}, 1.0), x);
  } else {
    Tensor a = sigmoid(add_rowvec(
        add(matmul(x, w_xa_->value), matmul(h_prev, w_ha_->value)), b_a_->value));
    xt = mul(a, x);
  }
  Tensor r = sigmoid(add_rowvec(
      add(matmul(xt, w_xr_->value), matmul(h_prev, w_hr_->value)), b_r_->value));
  Tensor z = sigmoid(add_rowvec(
      add(matmul(xt, w_xz_->value), matmul(h_prev, w_hz_->value)), b_z_->value));
  Tensor hc = tanh_op(add_rowvec(
      add(matmul(xt, w_xh_->value), matmul(mul(r, h_prev), w_hh_->value)), b_h_->value));
  return add(mul(z, h_prev), mul(one_minus(z), hc));
}

Tensor EleAttGRU::run(const Tensor& xs, const Tensor& h0) const {
  if (xs.ndim() != 2 || xs.dim(1) != input_dim_)
    throw ContractError("eleatt_gru: sequence " + shape_str(xs.shape()) +
                        " does not match D=" + std::to_string(input_dim_));
  const int64_t steps = xs.dim(0);
  if (steps < 1) throw ContractError("eleatt_gru: zero-length sequence");
  Tensor h = h0.defined() ? h0 : Tensor::zeros({1, hidden_dim_});
  std::vector<Tensor> outs;
  outs.reserve(static_cast<size_t>(steps));
  for (int64_t t = 0; t < steps; ++t) {
    h = step(ops::row(xs, t), h);
    outs.push_back(h);
  }
  return ops::stack_rows(outs);
}

EleAttGRUStack::EleAttGRUStack(int layers, int64_t input_dim, int64_t hidden_dim) {
  if (layers < 1) throw ConfigError("eleatt_gru stack: need at least one layer");
  for (int i = 0; i < layers; ++i) {
    layers_.push_back(std::make_unique<EleAttGRU>(i == 0 ? input_dim : hidden_dim,
                                                  hidden_dim));
    register_module("eleatt_gru/" + std::to_string(i), *layers_.back());
  }
}

Tensor EleAttGRUStack::run(const Tensor& xs) const {
  Tensor h = xs;
  for (const auto& l : layers_) h = l->run(h);
  return h;
}

}  // namespace avsr
