// SPDX-License-Identifier: Apache-2.0

#include "avsr/kernels.hpp"

#include <vector>

#include "avsr/error.hpp"

namespace avsr::kernels {

int64_t Conv1dGeom::out_len() const {
  if (transposed) return in_len * stride;
  const int64_t span = (kernel - 1) * dilation + 1;
  const int64_t padded = in_len + pad_lo + pad_hi;
  if (padded < span) return 0;
  return (padded - span) / stride + 1;
}

void Conv1dGeom::validate() const {
  if (kernel < 1 || stride < 1 || dilation < 1 || groups < 1)
    throw ConfigError("conv1d: kernel/stride/dilation/groups must be >= 1");
  if (in_ch % groups != 0 || out_ch % groups != 0)
    throw ConfigError("conv1d: channels not divisible by groups");
  if (transposed && dilation != 1)
    throw ConfigError("conv1d: dilation is unsupported for transposed convolution");
  if (!transposed && out_len() < 1)
    throw ShapeError("conv1d: input length " + std::to_string(in_len) +
                     " is smaller than the effective kernel span " +
                     std::to_string((kernel - 1) * dilation + 1) +
                     " with padding " + std::to_string(pad_lo + pad_hi));
}

int64_t Conv3dGeom::out_t() const { return (t + 2 * pt - kt) / st + 1; }
int64_t Conv3dGeom::out_h() const { return (h + 2 * ph - kh) / sh + 1; }
int64_t Conv3dGeom::out_w() const { return (w + 2 * pw - kw) / sw + 1; }

void Conv3dGeom::validate() const {
  if (kt < 1 || kh < 1 || kw < 1 || st < 1 || sh < 1 || sw < 1)
    throw ConfigError("conv3d: kernel/stride must be >= 1");
  if (t + 2 * pt < kt || h + 2 * ph < kh || w + 2 * pw < kw)
    throw ShapeError("conv3d: input extent smaller than kernel");
}

int64_t Pool2dGeom::out_h() const { return (h + 2 * ph - kh) / sh + 1; }
int64_t Pool2dGeom::out_w() const { return (w + 2 * pw - kw) / sw + 1; }

// ---------------------------------------------------------------------------
// matmul

void matmul(const double* a, const double* b, double* y, int64_t m, int64_t k,
            int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* yr = y + i * n;
    for (int64_t j = 0; j < n; ++j) yr[j] = 0.0;
    for (int64_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* br = b + p * n;
      for (int64_t j = 0; j < n; ++j) yr[j] += av * br[j];
    }
  }
}

void matmul_nt_acc(const double* gy, const double* b, double* ga, int64_t m,
                   int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double* gr = gy + i * n;
      const double* br = b + p * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += gr[j] * br[j];
      ga[i * k + p] += acc;
    }
  }
}

void matmul_tn_acc(const double* a, const double* gy, double* gb, int64_t m,
                   int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < k; ++p) {
    double* gbr = gb + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* gr = gy + i * n;
      for (int64_t j = 0; j < n; ++j) gbr[j] += av * gr[j];
    }
  }
}

// ---------------------------------------------------------------------------
// conv1d

void conv1d(const Conv1dGeom& g, const double* x, const double* w, double* y) {
  const int64_t O = g.out_len();
  const int64_t cg = g.in_ch / g.groups;   // input channels per group
  const int64_t og = g.out_ch / g.groups;  // output channels per group
  if (!g.transposed) {
#pragma omp parallel for schedule(static)
    for (int64_t co = 0; co < g.out_ch; ++co) {
      const int64_t base = (co / og) * cg;
      for (int64_t t = 0; t < O; ++t) {
        double acc = 0.0;
        for (int64_t c = 0; c < cg; ++c) {
          const double* xr = x + (base + c) * g.in_len;
          const double* wr = w + (co * cg + c) * g.kernel;
          for (int64_t k = 0; k < g.kernel; ++k) {
            const int64_t i = t * g.stride + k * g.dilation - g.pad_lo;
            if (i >= 0 && i < g.in_len) acc += wr[k] * xr[i];
          }
        }
        y[co * O + t] = acc;
      }
    }
  } else {
#pragma omp parallel for schedule(static)
    for (int64_t co = 0; co < g.out_ch; ++co) {
      const int64_t base = (co / og) * cg;
      for (int64_t o = 0; o < O; ++o) {
        double acc = 0.0;
        for (int64_t c = 0; c < cg; ++c) {
          const double* xr = x + (base + c) * g.in_len;
          const double* wr = w + (co * cg + c) * g.kernel;
          for (int64_t k = 0; k < g.kernel; ++k) {
            const int64_t num = o + g.pad_lo - k;
            if (num < 0 || num % g.stride != 0) continue;
            const int64_t i = num / g.stride;
            if (i < g.in_len) acc += wr[k] * xr[i];
          }
        }
        y[co * O + o] = acc;
      }
    }
  }
}

void conv1d_grad_x(const Conv1dGeom& g, const double* gy, const double* w,
                   double* gx) {
  const int64_t O = g.out_len();
  const int64_t cg = g.in_ch / g.groups;
  const int64_t og = g.out_ch / g.groups;
  if (!g.transposed) {
#pragma omp parallel for schedule(static)
    for (int64_t ci = 0; ci < g.in_ch; ++ci) {
      const int64_t grp = ci / cg;
      const int64_t c = ci % cg;
      for (int64_t i = 0; i < g.in_len; ++i) {
        double acc = 0.0;
        for (int64_t k = 0; k < g.kernel; ++k) {
          const int64_t num = i + g.pad_lo - k * g.dilation;
          if (num < 0 || num % g.stride != 0) continue;
          const int64_t t = num / g.stride;
          if (t >= O) continue;
          for (int64_t co = grp * og; co < (grp + 1) * og; ++co)
            acc += w[(co * cg + c) * g.kernel + k] * gy[co * O + t];
        }
        gx[ci * g.in_len + i] += acc;
      }
    }
  } else {
#pragma omp parallel for schedule(static)
    for (int64_t ci = 0; ci < g.in_ch; ++ci) {
      const int64_t grp = ci / cg;
      const int64_t c = ci % cg;
      for (int64_t i = 0; i < g.in_len; ++i) {
        double acc = 0.0;
        for (int64_t k = 0; k < g.kernel; ++k) {
          const int64_t o = i * g.stride + k - g.pad_lo;
          if (o < 0 || o >= O) continue;
          for (int64_t co = grp * og; co < (grp + 1) * og; ++co)
            acc += w[(co * cg + c) * g.kernel + k] * gy[co * O + o];
        }
        gx[ci * g.in_len + i] += acc;
      }
    }
  }
}

void conv1d_grad_w(const Conv1dGeom& g, const double* gy, const double* x,
                   double* gw) {
  const int64_t O = g.out_len();
  const int64_t cg = g.in_ch / g.groups;
  const int64_t og = g.out_ch / g.groups;
#pragma omp parallel for schedule(static)
  for (int64_t co = 0; co < g.out_ch; ++co) {
    const int64_t base = (co / og) * cg;
    const double* gr = gy + co * O;
    for (int64_t c = 0; c < cg; ++c) {
      const double* xr = x + (base + c) * g.in_len;
      double* wr = gw + (co * cg + c) * g.kernel;
      for (int64_t k = 0; k < g.kernel; ++k) {
        double acc = 0.0;
        if (!g.transposed) {
          for (int64_t t = 0; t < O; ++t) {
            const int64_t i = t * g.stride + k * g.dilation - g.pad_lo;
            if (i >= 0 && i < g.in_len) acc += gr[t] * xr[i];
          }
        } else {
          for (int64_t i = 0; i < g.in_len; ++i) {
            const int64_t o = i * g.stride + k - g.pad_lo;
            if (o >= 0 && o < O) acc += gr[o] * xr[i];
          }
        }
        wr[k] += acc;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// conv3d

void conv3d(const Conv3dGeom& g, const double* x, const double* w, double* y) {
  const int64_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  const int64_t xs = g.h * g.w;          // input t-slice stride
  const int64_t xc = g.t * xs;           // input channel stride
  const int64_t ks = g.kh * g.kw;
  const int64_t kc = g.kt * ks;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t co = 0; co < g.out_ch; ++co) {
    for (int64_t to = 0; to < ot; ++to) {
      double* yr = y + ((co * ot + to) * oh) * ow;
      for (int64_t ho = 0; ho < oh; ++ho) {
        for (int64_t wo = 0; wo < ow; ++wo) {
          double acc = 0.0;
          for (int64_t ci = 0; ci < g.in_ch; ++ci) {
            const double* xb = x + ci * xc;
            const double* wb = w + (co * g.in_ch + ci) * kc;
            for (int64_t kt = 0; kt < g.kt; ++kt) {
              const int64_t ti = to * g.st + kt - g.pt;
              if (ti < 0 || ti >= g.t) continue;
              for (int64_t kh = 0; kh < g.kh; ++kh) {
                const int64_t hi = ho * g.sh + kh - g.ph;
                if (hi < 0 || hi >= g.h) continue;
                const double* xrow = xb + ti * xs + hi * g.w;
                const double* wrow = wb + kt * ks + kh * g.kw;
                for (int64_t kw = 0; kw < g.kw; ++kw) {
                  const int64_t wi = wo * g.sw + kw - g.pw;
                  if (wi >= 0 && wi < g.w) acc += wrow[kw] * xrow[wi];
                }
              }
            }
          }
          yr[ho * ow + wo] = acc;
        }
      }
    }
  }
}

void conv3d_grad_x(const Conv3dGeom& g, const double* gy, const double* w,
                   double* gx) {
  const int64_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  const int64_t ks = g.kh * g.kw;
  const int64_t kc = g.kt * ks;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t ci = 0; ci < g.in_ch; ++ci) {
    for (int64_t ti = 0; ti < g.t; ++ti) {
      for (int64_t hi = 0; hi < g.h; ++hi) {
        for (int64_t wi = 0; wi < g.w; ++wi) {
          double acc = 0.0;
          for (int64_t co = 0; co < g.out_ch; ++co) {
            const double* wb = w + (co * g.in_ch + ci) * kc;
            const double* gb = gy + co * ot * oh * ow;
            for (int64_t kt = 0; kt < g.kt; ++kt) {
              const int64_t tn = ti + g.pt - kt;
              if (tn < 0 || tn % g.st != 0) continue;
              const int64_t to = tn / g.st;
              if (to >= ot) continue;
              for (int64_t kh = 0; kh < g.kh; ++kh) {
                const int64_t hn = hi + g.ph - kh;
                if (hn < 0 || hn % g.sh != 0) continue;
                const int64_t ho = hn / g.sh;
                if (ho >= oh) continue;
                for (int64_t kw = 0; kw < g.kw; ++kw) {
                  const int64_t wn = wi + g.pw - kw;
                  if (wn < 0 || wn % g.sw != 0) continue;
                  const int64_t wo = wn / g.sw;
                  if (wo >= ow) continue;
                  acc += wb[kt * ks + kh * g.kw + kw] *
                         gb[(to * oh + ho) * ow + wo];
                }
              }
            }
          }
          gx[((ci * g.t + ti) * g.h + hi) * g.w + wi] += acc;
        }
      }
    }
  }
}

void conv3d_grad_w(const Conv3dGeom& g, const double* gy, const double* x,
                   double* gw) {
  const int64_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  const int64_t xs = g.h * g.w;
  const int64_t xc = g.t * xs;
  const int64_t ks = g.kh * g.kw;
  const int64_t kc = g.kt * ks;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t co = 0; co < g.out_ch; ++co) {
    for (int64_t ci = 0; ci < g.in_ch; ++ci) {
      const double* gb = gy + co * ot * oh * ow;
      const double* xb = x + ci * xc;
      double* wb = gw + (co * g.in_ch + ci) * kc;
      for (int64_t kt = 0; kt < g.kt; ++kt) {
        for (int64_t kh = 0; kh < g.kh; ++kh) {
          for (int64_t kw = 0; kw < g.kw; ++kw) {
            double acc = 0.0;
            for (int64_t to = 0; to < ot; ++to) {
              const int64_t ti = to * g.st + kt - g.pt;
              if (ti < 0 || ti >= g.t) continue;
              for (int64_t ho = 0; ho < oh; ++ho) {
                const int64_t hi = ho * g.sh + kh - g.ph;
                if (hi < 0 || hi >= g.h) continue;
                const double* xrow = xb + ti * xs + hi * g.w;
                const double* grow = gb + (to * oh + ho) * ow;
                for (int64_t wo = 0; wo < ow; ++wo) {
                  const int64_t wi = wo * g.sw + kw - g.pw;
                  if (wi >= 0 && wi < g.w) acc += grow[wo] * xrow[wi];
                }
              }
            }
            wb[kt * ks + kh * g.kw + kw] += acc;
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// spatial max pooling

void maxpool_spatial(const Pool2dGeom& g, const double* x, double* y,
                     int64_t* argmax) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  const int64_t plane = g.h * g.w;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t c = 0; c < g.ch; ++c) {
    for (int64_t t = 0; t < g.t; ++t) {
      const double* xp = x + (c * g.t + t) * plane;
      double* yp = y + (c * g.t + t) * oh * ow;
      int64_t* ap = argmax + (c * g.t + t) * oh * ow;
      for (int64_t ho = 0; ho < oh; ++ho) {
        for (int64_t wo = 0; wo < ow; ++wo) {
          double best = 0.0;
          int64_t best_idx = -1;
          for (int64_t kh = 0; kh < g.kh; ++kh) {
            const int64_t hi = ho * g.sh + kh - g.ph;
            if (hi < 0 || hi >= g.h) continue;
            for (int64_t kw = 0; kw < g.kw; ++kw) {
              const int64_t wi = wo * g.sw + kw - g.pw;
              if (wi < 0 || wi >= g.w) continue;
              const double v = xp[hi * g.w + wi];
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = hi * g.w + wi;
              }
            }
          }
          yp[ho * ow + wo] = best_idx < 0 ? 0.0 : best;
          ap[ho * ow + wo] = best_idx;
        }
      }
    }
  }
}

void maxpool_spatial_grad(const Pool2dGeom& g, const double* gy,
                          const int64_t* argmax, double* gx) {
  const int64_t oh = g.out_h(), ow = g.out_w();
  const int64_t plane = g.h * g.w;
  // Windows within one (c,t) plane may overlap; keep that loop sequential.
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t c = 0; c < g.ch; ++c) {
    for (int64_t t = 0; t < g.t; ++t) {
      const double* gp = gy + (c * g.t + t) * oh * ow;
      const int64_t* ap = argmax + (c * g.t + t) * oh * ow;
      double* xp = gx + (c * g.t + t) * plane;
      for (int64_t i = 0; i < oh * ow; ++i) {
        if (ap[i] >= 0) xp[ap[i]] += gp[i];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// serial reference implementations

namespace ref {

void matmul(const double* a, const double* b, double* y, int64_t m, int64_t k,
            int64_t n) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      y[i * n + j] = acc;
    }
}

void matmul_nt_acc(const double* gy, const double* b, double* ga, int64_t m,
                   int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += gy[i * n + j] * b[p * n + j];
      ga[i * k + p] += acc;
    }
}

void matmul_tn_acc(const double* a, const double* gy, double* gb, int64_t m,
                   int64_t k, int64_t n) {
  for (int64_t p = 0; p < k; ++p)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t i = 0; i < m; ++i) acc += a[i * k + p] * gy[i * n + j];
      gb[p * n + j] += acc;
    }
}

// Direct convolution over an explicitly padded (and, for the transposed
// case, zero-stuffed) copy of the input.
void conv1d(const Conv1dGeom& g, const double* x, const double* w, double* y) {
  const int64_t O = g.out_len();
  const int64_t cg = g.in_ch / g.groups;
  const int64_t og = g.out_ch / g.groups;
  if (!g.transposed) {
    const int64_t lp = g.in_len + g.pad_lo + g.pad_hi;
    std::vector<double> xp(static_cast<size_t>(g.in_ch * lp), 0.0);
    for (int64_t c = 0; c < g.in_ch; ++c)
      for (int64_t i = 0; i < g.in_len; ++i)
        xp[c * lp + i + g.pad_lo] = x[c * g.in_len + i];
    for (int64_t co = 0; co < g.out_ch; ++co) {
      const int64_t base = (co / og) * cg;
      for (int64_t t = 0; t < O; ++t) {
        double acc = 0.0;
        for (int64_t c = 0; c < cg; ++c)
          for (int64_t k = 0; k < g.kernel; ++k)
            acc += w[(co * cg + c) * g.kernel + k] *
                   xp[(base + c) * lp + t * g.stride + k * g.dilation];
        y[co * O + t] = acc;
      }
    }
  } else {
    const int64_t lu = (g.in_len - 1) * g.stride + 1;
    std::vector<double> xu(static_cast<size_t>(g.in_ch * lu), 0.0);
    for (int64_t c = 0; c < g.in_ch; ++c)
      for (int64_t i = 0; i < g.in_len; ++i)
        xu[c * lu + i * g.stride] = x[c * g.in_len + i];
    for (int64_t co = 0; co < g.out_ch; ++co) {
      const int64_t base = (co / og) * cg;
      for (int64_t o = 0; o < O; ++o) {
        double acc = 0.0;
        for (int64_t c = 0; c < cg; ++c)
          for (int64_t k = 0; k < g.kernel; ++k) {
            const int64_t j = o + g.pad_lo - k;
            if (j >= 0 && j < lu) acc += w[(co * cg + c) * g.kernel + k] * xu[(base + c) * lu + j];
          }
        y[co * O + o] = acc;
      }
    }
  }
}

// Scatter form: walks every forward contribution and transposes it.
void conv1d_grad_x(const Conv1dGeom& g, const double* gy, const double* w,
                   double* gx) {
  const int64_t O = g.out_len();
  const int64_t cg = g.in_ch / g.groups;
  const int64_t og = g.out_ch / g.groups;
  for (int64_t co = 0; co < g.out_ch; ++co) {
    const int64_t base = (co / og) * cg;
    for (int64_t t = 0; t < O; ++t) {
      for (int64_t c = 0; c < cg; ++c)
        for (int64_t k = 0; k < g.kernel; ++k) {
          int64_t i;
          if (!g.transposed) {
            i = t * g.stride + k * g.dilation - g.pad_lo;
          } else {
            const int64_t num = t + g.pad_lo - k;
            if (num < 0 || num % g.stride != 0) continue;
            i = num / g.stride;
          }
          if (i >= 0 && i < g.in_len)
            gx[(base + c) * g.in_len + i] +=
                w[(co * cg + c) * g.kernel + k] * gy[co * O + t];
        }
    }
  }
}

void conv1d_grad_w(const Conv1dGeom& g, const double* gy, const double* x,
                   double* gw) {
  const int64_t O = g.out_len();
  const int64_t cg = g.in_ch / g.groups;
  const int64_t og = g.out_ch / g.groups;
  for (int64_t co = 0; co < g.out_ch; ++co) {
    const int64_t base = (co / og) * cg;
    for (int64_t t = 0; t < O; ++t) {
      for (int64_t c = 0; c < cg; ++c)
        for (int64_t k = 0; k < g.kernel; ++k) {
          int64_t i;
          if (!g.transposed) {
            i = t * g.stride + k * g.dilation - g.pad_lo;
          } else {
            const int64_t num = t + g.pad_lo - k;
            if (num < 0 || num % g.stride != 0) continue;
            i = num / g.stride;
          }
          if (i >= 0 && i < g.in_len)
            gw[(co * cg + c) * g.kernel + k] +=
                gy[co * O + t] * x[(base + c) * g.in_len + i];
        }
    }
  }
}

void conv3d(const Conv3dGeom& g, const double* x, const double* w, double* y) {
  const int64_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  for (int64_t co = 0; co < g.out_ch; ++co)
    for (int64_t to = 0; to < ot; ++to)
      for (int64_t ho = 0; ho < oh; ++ho)
        for (int64_t wo = 0; wo < ow; ++wo) {
          double acc = 0.0;
          for (int64_t ci = 0; ci < g.in_ch; ++ci)
            for (int64_t kt = 0; kt < g.kt; ++kt)
              for (int64_t kh = 0; kh < g.kh; ++kh)
                for (int64_t kw = 0; kw < g.kw; ++kw) {
                  const int64_t ti = to * g.st + kt - g.pt;
                  const int64_t hi = ho * g.sh + kh - g.ph;
                  const int64_t wi = wo * g.sw + kw - g.pw;
                  if (ti < 0 || ti >= g.t || hi < 0 || hi >= g.h || wi < 0 ||
                      wi >= g.w)
                    continue;
                  acc += w[(((co * g.in_ch + ci) * g.kt + kt) * g.kh + kh) * g.kw + kw] *
                         x[((ci * g.t + ti) * g.h + hi) * g.w + wi];
                }
          y[((co * ot + to) * oh + ho) * ow + wo] = acc;
        }
}

void conv3d_grad_x(const Conv3dGeom& g, const double* gy, const double* w,
                   double* gx) {
  const int64_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  for (int64_t co = 0; co < g.out_ch; ++co)
    for (int64_t to = 0; to < ot; ++to)
      for (int64_t ho = 0; ho < oh; ++ho)
        for (int64_t wo = 0; wo < ow; ++wo) {
          const double gv = gy[((co * ot + to) * oh + ho) * ow + wo];
          if (gv == 0.0) continue;
          for (int64_t ci = 0; ci < g.in_ch; ++ci)
            for (int64_t kt = 0; kt < g.kt; ++kt)
              for (int64_t kh = 0; kh < g.kh; ++kh)
                for (int64_t kw = 0; kw < g.kw; ++kw) {
                  const int64_t ti = to * g.st + kt - g.pt;
                  const int64_t hi = ho * g.sh + kh - g.ph;
                  const int64_t wi = wo * g.sw + kw - g.pw;
                  if (ti < 0 || ti >= g.t || hi < 0 || hi >= g.h || wi < 0 ||
                      wi >= g.w)
                    continue;
                  gx[((ci * g.t + ti) * g.h + hi) * g.w + wi] +=
                      gv * w[(((co * g.in_ch + ci) * g.kt + kt) * g.kh + kh) * g.kw + kw];
                }
        }
}

void conv3d_grad_w(const Conv3dGeom& g, const double* gy, const double* x,
                   double* gw) {
  const int64_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  for (int64_t co = 0; co < g.out_ch; ++co)
    for (int64_t to = 0; to < ot; ++to)
      for (int64_t ho = 0; ho < oh; ++ho)
        for (int64_t wo = 0; wo < ow; ++wo) {
          const double gv = gy[((co * ot + to) * oh + ho) * ow + wo];
          if (gv == 0.0) continue;
          for (int64_t ci = 0; ci < g.in_ch; ++ci)
            for (int64_t kt = 0; kt < g.kt; ++kt)
              for (int64_t kh = 0; kh < g.kh; ++kh)
                for (int64_t kw = 0; kw < g.kw; ++kw) {
                  const int64_t ti = to * g.st + kt - g.pt;
                  const int64_t hi = ho * g.sh + kh - g.ph;
                  const int64_t wi = wo * g.sw + kw - g.pw;
                  if (ti < 0 || ti >= g.t || hi < 0 || hi >= g.h || wi < 0 ||
                      wi >= g.w)
                    continue;
                  gw[(((co * g.in_ch + ci) * g.kt + kt) * g.kh + kh) * g.kw + kw] +=
                      gv * x[((ci * g.t + ti) * g.h + hi) * g.w + wi];
                }
        }
}

}  // namespace ref

}  // namespace avsr::kernels
