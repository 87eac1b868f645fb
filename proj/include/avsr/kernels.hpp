// SPDX-License-Identifier: Apache-2.0
//
// Raw numeric kernels behind the tensor ops. The default entry points are
// OpenMP-parallel; kernels::ref holds plain serial implementations of the
// same contracts, kept as the reference for testing and benchmarking.
//
// Parallel kernels assign each output element to exactly one thread and keep
// the per-element summation order fixed, so results are bit-identical across
// thread counts. Gradient kernels accumulate (+=) into their output buffer.

#pragma once

#include <cstdint>

namespace avsr::kernels {

// y[m,n] = a[m,k] * b[k,n]
void matmul(const double* a, const double* b, double* y, int64_t m, int64_t k,
            int64_t n);
// ga[m,k] += gy[m,n] * b[k,n]^T
void matmul_nt_acc(const double* gy, const double* b, double* ga, int64_t m,
                   int64_t k, int64_t n);
// gb[k,n] += a[m,k]^T * gy[m,n]
void matmul_tn_acc(const double* a, const double* gy, double* gb, int64_t m,
                   int64_t k, int64_t n);

struct Conv1dGeom {
  int64_t in_ch = 0, out_ch = 0, in_len = 0;
  int64_t kernel = 1, stride = 1, dilation = 1;
  int64_t pad_lo = 0, pad_hi = 0;
  int64_t groups = 1;
  bool transposed = false;  // stride acts as the upsampling factor

  int64_t out_len() const;
  void validate() const;
};

// x[in_ch, in_len], w[out_ch, in_ch/groups, kernel], y[out_ch, out_len]
void conv1d(const Conv1dGeom& g, const double* x, const double* w, double* y);
void conv1d_grad_x(const Conv1dGeom& g, const double* gy, const double* w,
                   double* gx);
void conv1d_grad_w(const Conv1dGeom& g, const double* gy, const double* x,
                   double* gw);

struct Conv3dGeom {
  int64_t in_ch = 0, out_ch = 0;
  int64_t t = 0, h = 0, w = 0;
  int64_t kt = 1, kh = 1, kw = 1;
  int64_t st = 1, sh = 1, sw = 1;
  int64_t pt = 0, ph = 0, pw = 0;

  int64_t out_t() const;
  int64_t out_h() const;
  int64_t out_w() const;
  void validate() const;
};

// x[in_ch, t, h, w], w[out_ch, in_ch, kt, kh, kw]
void conv3d(const Conv3dGeom& g, const double* x, const double* w, double* y);
void conv3d_grad_x(const Conv3dGeom& g, const double* gy, const double* w,
                   double* gx);
void conv3d_grad_w(const Conv3dGeom& g, const double* gy, const double* x,
                   double* gw);

struct Pool2dGeom {
  int64_t ch = 0, t = 0, h = 0, w = 0;  // pooling over the trailing h,w axes
  int64_t kh = 1, kw = 1;
  int64_t sh = 1, sw = 1;
  int64_t ph = 0, pw = 0;

  int64_t out_h() const;
  int64_t out_w() const;
};

// argmax stores the flat (h*w) input index of each window maximum; ties go
// to the first element in row-major scan order.
void maxpool_spatial(const Pool2dGeom& g, const double* x, double* y,
                     int64_t* argmax);
void maxpool_spatial_grad(const Pool2dGeom& g, const double* gy,
                          const int64_t* argmax, double* gx);

namespace ref {
void matmul(const double* a, const double* b, double* y, int64_t m, int64_t k,
            int64_t n);
void matmul_nt_acc(const double* gy, const double* b, double* ga, int64_t m,
                   int64_t k, int64_t n);
void matmul_tn_acc(const double* a, const double* gy, double* gb, int64_t m,
                   int64_t k, int64_t n);
void conv1d(const Conv1dGeom& g, const double* x, const double* w, double* y);
void conv1d_grad_x(const Conv1dGeom& g, const double* gy, const double* w,
                   double* gx);
void conv1d_grad_w(const Conv1dGeom& g, const double* gy, const double* x,
                   double* gw);
void conv3d(const Conv3dGeom& g, const double* x, const double* w, double* y);
void conv3d_grad_x(const Conv3dGeom& g, const double* gy, const double* w,
                   double* gx);
void conv3d_grad_w(const Conv3dGeom& g, const double* gy, const double* x,
                   double* gw);
}  // namespace ref

}  // namespace avsr::kernels
