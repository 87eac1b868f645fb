// SPDX-License-Identifier: Apache-2.0
//
// Differentiable tensor operations. Every op validates shapes, computes the
// forward value through avsr::kernels, and registers a reverse-mode closure
// when gradients are being recorded.

#pragma once

#include <random>
#include <vector>

#include "avsr/tensor.hpp"

namespace avsr::ops {

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]
Tensor transpose2d(const Tensor& a);

// ---- pointwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor add_rowvec(const Tensor& x, const Tensor& v);   // [m,n] + [n]
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor one_minus(const Tensor& a);                     // 1 - a
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);

// ---- reductions & losses --------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor l1_loss(const Tensor& pred, const Tensor& target);
// Softmax over the last axis ([n] or [m,n]).
Tensor softmax(const Tensor& a);
// Teacher-forced sequence loss: mean over rows whose target != ignore_index
// of the label-smoothed negative log-likelihood. targets.size() must equal
// the number of logit rows.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     double label_smoothing = 0.0, int ignore_index = -1);

// ---- shape ----------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);  // rank 1 or 2
std::vector<Tensor> split(const Tensor& a, int axis,
                          const std::vector<int64_t>& sizes);
Tensor row(const Tensor& a, int64_t i);                  // [m,n] -> [1,n]
Tensor slice_rows(const Tensor& a, int64_t i0, int64_t i1);
Tensor stack_rows(const std::vector<Tensor>& rows);      // k x [1,n] -> [k,n]
Tensor mean_rows(const Tensor& a);                       // [m,n] -> [1,n]
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

// ---- regularization -------------------------------------------------------

Tensor dropout(const Tensor& a, double p, bool training, std::mt19937_64& rng);
// Drops whole channels of a [C,L] map.
Tensor spatial_dropout(const Tensor& a, double p, bool training,
                       std::mt19937_64& rng);

// Batch normalization over all trailing axes of a channel-first tensor
// ([C,L] or [C,T,H,W]). Running statistics live in caller-owned buffers and
// are updated only when training.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean,
                  std::vector<double>& running_var, bool training,
                  double momentum = 0.1, double eps = 1e-5);

// Weight-norm reparameterization w = g * v / ||v||, per output channel
// (axis 0 of v).
Tensor weight_norm(const Tensor& v, const Tensor& g);

// ---- convolution & pooling ------------------------------------------------

struct Conv1dOpts {
  int64_t stride = 1;
  int64_t dilation = 1;
  int64_t pad_lo = 0, pad_hi = 0;
  int64_t groups = 1;
  bool transposed = false;
};

// x[C_in,L], w[C_out,C_in/groups,K] -> [C_out,L']. The spec-level entry
// point: causal_pad left-pads by (K-1)*dilation; transposed interprets
// stride as the upsampling factor (L' = L*stride).
Tensor conv1d(const Tensor& x, const Tensor& w, int64_t stride,
              int64_t dilation, bool causal_pad, bool transposed);
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              const Conv1dOpts& opts);

struct Conv3dOpts {
  int64_t st = 1, sh = 1, sw = 1;
  int64_t pt = 0, ph = 0, pw = 0;
};

// x[C_in,T,H,W], w[C_out,C_in,Kt,Kh,Kw]
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias,
              const Conv3dOpts& opts);

Tensor maxpool_spatial(const Tensor& x, int64_t kh, int64_t kw, int64_t sh,
                       int64_t sw, int64_t ph, int64_t pw);
Tensor mean_pool_spatial(const Tensor& x);  // [C,T,H,W] -> [C,T]

}  // namespace avsr::ops
