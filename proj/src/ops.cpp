// SPDX-License-Identifier: Apache-2.0

#include "avsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "avsr/error.hpp"
#include "avsr/kernels.hpp"

namespace avsr::ops {

namespace {

bool recording(std::initializer_list<const Tensor*> ins) {
  if (!NoGradGuard::grad_enabled()) return false;
  for (const Tensor* t : ins)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

void attach(Tensor& out, std::vector<Tensor> parents, std::function<void()> fn) {
  auto& node = out.node();
  node->parents.reserve(parents.size());
  for (auto& p : parents) node->parents.push_back(p.node());
  node->backward_fn = std::move(fn);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------
// linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> y(static_cast<size_t>(m * n));
  kernels::matmul(a.data().data(), b.data().data(), y.data(), m, k, n);
  const bool rg = recording({&a, &b});
  Tensor out = Tensor::from_data({m, n}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    TensorNode* bn = b.node().get();
    attach(out, {a, b}, [on, an, bn, m, k, n] {
      if (an->requires_grad)
        kernels::matmul_nt_acc(on->grad.data(), bn->data.data(), an->grad.data(), m, k, n);
      if (bn->requires_grad)
        kernels::matmul_tn_acc(an->data.data(), on->grad.data(), bn->grad.data(), m, k, n);
    });
  }
  return out;
}

Tensor transpose2d(const Tensor& a) {
  if (a.ndim() != 2) throw ShapeError("transpose2d: rank-2 tensor required");
  const int64_t m = a.dim(0), n = a.dim(1);
  std::vector<double> y(static_cast<size_t>(m * n));
  const auto src = a.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) y[j * m + i] = src[i * n + j];
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data({n, m}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, m, n] {
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) an->grad[i * n + j] += on->grad[j * m + i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// pointwise

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  const auto n = a.numel();
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y[i] = a.data()[i] + b.data()[i];
  const bool rg = recording({&a, &b});
  Tensor out = Tensor::from_data(a.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    TensorNode* bn = b.node().get();
    attach(out, {a, b}, [on, an, bn, n] {
      if (an->requires_grad)
        for (int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
      if (bn->requires_grad)
        for (int64_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i];
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  if (x.ndim() != 2 || v.ndim() != 1 || v.dim(0) != x.dim(1))
    throw ShapeError("add_rowvec: " + shape_str(x.shape()) + " + " + shape_str(v.shape()));
  const int64_t m = x.dim(0), n = x.dim(1);
  std::vector<double> y(static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) y[i * n + j] = x.data()[i * n + j] + v.data()[j];
  const bool rg = recording({&x, &v});
  Tensor out = Tensor::from_data({m, n}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* xn = x.node().get();
    TensorNode* vn = v.node().get();
    attach(out, {x, v}, [on, xn, vn, m, n] {
      if (xn->requires_grad)
        for (int64_t i = 0; i < m * n; ++i) xn->grad[i] += on->grad[i];
      if (vn->requires_grad)
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) vn->grad[j] += on->grad[i * n + j];
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  const auto n = a.numel();
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y[i] = a.data()[i] - b.data()[i];
  const bool rg = recording({&a, &b});
  Tensor out = Tensor::from_data(a.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    TensorNode* bn = b.node().get();
    attach(out, {a, b}, [on, an, bn, n] {
      if (an->requires_grad)
        for (int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
      if (bn->requires_grad)
        for (int64_t i = 0; i < n; ++i) bn->grad[i] -= on->grad[i];
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  const auto n = a.numel();
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y[i] = a.data()[i] * b.data()[i];
  const bool rg = recording({&a, &b});
  Tensor out = Tensor::from_data(a.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    TensorNode* bn = b.node().get();
    attach(out, {a, b}, [on, an, bn, n] {
      if (an->requires_grad)
        for (int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * bn->data[i];
      if (bn->requires_grad)
        for (int64_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i] * an->data[i];
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  const auto n = a.numel();
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y[i] = c * a.data()[i];
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data(a.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, c, n] {
      for (int64_t i = 0; i < n; ++i) an->grad[i] += c * on->grad[i];
    });
  }
  return out;
}

Tensor one_minus(const Tensor& a) {
  const auto n = a.numel();
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y[i] = 1.0 - a.data()[i];
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data(a.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, n] {
      for (int64_t i = 0; i < n; ++i) an->grad[i] -= on->grad[i];
    });
  }
  return out;
}

Tensor relu(const Tensor& a) {
  const auto n = a.numel();
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data(a.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, n] {
      for (int64_t i = 0; i < n; ++i)
        if (an->data[i] > 0.0) an->grad[i] += on->grad[i];
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& a) {
  const auto n = a.numel();
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-a.data()[i]));
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data(a.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, n] {
      for (int64_t i = 0; i < n; ++i) {
        const double s = on->data[i];
        an->grad[i] += on->grad[i] * s * (1.0 - s);
      }
    });
  }
  return out;
}

Tensor tanh_op(const Tensor& a) {
  const auto n = a.numel();
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(a.data()[i]);
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data(a.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, n] {
      for (int64_t i = 0; i < n; ++i) {
        const double t = on->data[i];
        an->grad[i] += on->grad[i] * (1.0 - t * t);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions & losses

Tensor sum(const Tensor& a) {
  const auto n = a.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += a.data()[i];
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data({1}, {acc}, rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, n] {
      const double g = on->grad[0];
      for (int64_t i = 0; i < n; ++i) an->grad[i] += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "l1_loss");
  const auto n = pred.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += std::abs(pred.data()[i] - target.data()[i]);
  acc /= static_cast<double>(n);
  const bool rg = recording({&pred, &target});
  Tensor out = Tensor::from_data({1}, {acc}, rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* pn = pred.node().get();
    TensorNode* tn = target.node().get();
    attach(out, {pred, target}, [on, pn, tn, n] {
      const double g = on->grad[0] / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i) {
        const double d = pn->data[i] - tn->data[i];
        const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (pn->requires_grad) pn->grad[i] += g * s;
        if (tn->requires_grad) tn->grad[i] -= g * s;
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& a) {
  if (a.ndim() < 1 || a.ndim() > 2) throw ShapeError("softmax: rank 1 or 2 required");
  const int64_t rows = a.ndim() == 2 ? a.dim(0) : 1;
  const int64_t cols = a.ndim() == 2 ? a.dim(1) : a.dim(0);
  std::vector<double> y(static_cast<size_t>(rows * cols));
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = a.data().data() + r * cols;
    double m = xr[0];
    for (int64_t j = 1; j < cols; ++j) m = std::max(m, xr[j]);
    double z = 0.0;
    for (int64_t j = 0; j < cols; ++j) z += std::exp(xr[j] - m);
    for (int64_t j = 0; j < cols; ++j) y[r * cols + j] = std::exp(xr[j] - m) / z;
  }
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data(a.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, rows, cols] {
      for (int64_t r = 0; r < rows; ++r) {
        const double* yr = on->data.data() + r * cols;
        const double* gr = on->grad.data() + r * cols;
        double dot = 0.0;
        for (int64_t j = 0; j < cols; ++j) dot += yr[j] * gr[j];
        for (int64_t j = 0; j < cols; ++j) an->grad[r * cols + j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     double label_smoothing, int ignore_index) {
  if (label_smoothing < 0.0 || label_smoothing > 1.0)
    throw ConfigError("cross_entropy: label_smoothing must lie in [0,1]");
  if (logits.ndim() != 2) throw ShapeError("cross_entropy: logits must be [rows, classes]");
  const int64_t rows = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int64_t>(targets.size()) != rows)
    throw ContractError("cross_entropy: " + std::to_string(targets.size()) +
                        " targets for " + std::to_string(rows) + " logit rows");
  int64_t active = 0;
  for (int t : targets) {
    if (t == ignore_index) continue;
    if (t < 0 || t >= classes) throw ContractError("cross_entropy: target id out of range");
    ++active;
  }
  if (active == 0) throw DataError("cross_entropy: no non-ignored targets");

  const double eps = label_smoothing;
  const double uni = eps / static_cast<double>(classes);
  double total = 0.0;
  for (int64_t r = 0; r < rows; ++r) {
    if (targets[static_cast<size_t>(r)] == ignore_index) continue;
    const double* xr = logits.data().data() + r * classes;
    double m = xr[0];
    for (int64_t j = 1; j < classes; ++j) m = std::max(m, xr[j]);
    double z = 0.0, sx = 0.0;
    for (int64_t j = 0; j < classes; ++j) {
      z += std::exp(xr[j] - m);
      sx += xr[j];
    }
    const double lse = m + std::log(z);
    total += lse - (1.0 - eps) * xr[targets[static_cast<size_t>(r)]] - uni * sx;
  }
  total /= static_cast<double>(active);

  const bool rg = recording({&logits});
  Tensor out = Tensor::from_data({1}, {total}, rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* ln = logits.node().get();
    std::vector<int> tgt = targets;
    attach(out, {logits}, [on, ln, tgt, rows, classes, eps, uni, ignore_index, active] {
      const double g = on->grad[0] / static_cast<double>(active);
      for (int64_t r = 0; r < rows; ++r) {
        const int t = tgt[static_cast<size_t>(r)];
        if (t == ignore_index) continue;
        const double* xr = ln->data.data() + r * classes;
        double m = xr[0];
        for (int64_t j = 1; j < classes; ++j) m = std::max(m, xr[j]);
        double z = 0.0;
        for (int64_t j = 0; j < classes; ++j) z += std::exp(xr[j] - m);
        for (int64_t j = 0; j < classes; ++j) {
          const double p = std::exp(xr[j] - m) / z;
          const double q = uni + (j == t ? 1.0 - eps : 0.0);
          ln->grad[r * classes + j] += g * (p - q);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// shape ops

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<double> y(a.data().begin(), a.data().end());
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data(std::move(shape), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    const int64_t n = a.numel();
    attach(out, {a}, [on, an, n] {
      for (int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
    });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const int rank = parts[0].ndim();
  if (rank != 1 && rank != 2) throw ShapeError("concat: rank 1 or 2 required");
  if (axis < 0 || axis >= rank) throw ShapeError("concat: bad axis");

  Shape out_shape = parts[0].shape();
  for (size_t i = 1; i < parts.size(); ++i) {
    const Shape& s = parts[i].shape();
    if (static_cast<int>(s.size()) != rank)
      throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < rank; ++d)
      if (d != axis && s[static_cast<size_t>(d)] != out_shape[static_cast<size_t>(d)])
        throw ShapeError("concat: shape mismatch " + shape_str(out_shape) + " vs " + shape_str(s));
    out_shape[static_cast<size_t>(axis)] += s[static_cast<size_t>(axis)];
  }

  std::vector<double> y(static_cast<size_t>(shape_numel(out_shape)));
  const int64_t rows = rank == 2 ? out_shape[0] : 1;
  const int64_t cols = rank == 2 ? out_shape[1] : out_shape[0];
  std::vector<int64_t> offsets(parts.size(), 0);
  if (rank == 1 || axis == 0) {
    int64_t off = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
      offsets[i] = off;
      const auto d = parts[i].data();
      std::copy(d.begin(), d.end(), y.begin() + off);
      off += parts[i].numel();
    }
  } else {  // rank 2, axis 1
    int64_t col_off = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
      offsets[i] = col_off;
      const int64_t pc = parts[i].dim(1);
      const auto d = parts[i].data();
      for (int64_t r = 0; r < rows; ++r)
        std::copy(d.begin() + r * pc, d.begin() + (r + 1) * pc,
                  y.begin() + r * cols + col_off);
      col_off += pc;
    }
  }

  bool rg = false;
  for (const auto& p : parts)
    if (p.requires_grad()) rg = true;
  rg = rg && NoGradGuard::grad_enabled();
  Tensor out = Tensor::from_data(out_shape, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    std::vector<TensorNode*> pn;
    for (const auto& p : parts) pn.push_back(p.node().get());
    const bool along_cols = (rank == 2 && axis == 1);
    attach(out, parts, [on, pn, offsets, rows, cols, along_cols] {
      for (size_t i = 0; i < pn.size(); ++i) {
        if (!pn[i]->requires_grad) continue;
        if (!along_cols) {
          const int64_t n = static_cast<int64_t>(pn[i]->data.size());
          for (int64_t j = 0; j < n; ++j) pn[i]->grad[j] += on->grad[offsets[i] + j];
        } else {
          const int64_t pc = pn[i]->shape[1];
          for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < pc; ++j)
              pn[i]->grad[r * pc + j] += on->grad[r * cols + offsets[i] + j];
        }
      }
    });
  }
  return out;
}

std::vector<Tensor> split(const Tensor& a, int axis, const std::vector<int64_t>& sizes) {
  const int rank = a.ndim();
  if (rank != 1 && rank != 2) throw ShapeError("split: rank 1 or 2 required");
  if (axis < 0 || axis >= rank) throw ShapeError("split: bad axis");
  int64_t total = 0;
  for (int64_t s : sizes) total += s;
  if (total != a.dim(axis)) throw ShapeError("split: sizes do not cover axis");

  std::vector<Tensor> outs;
  int64_t off = 0;
  for (int64_t sz : sizes) {
    if (rank == 1 || axis == 0) {
      const int64_t cols = rank == 2 ? a.dim(1) : 1;
      Shape shape = rank == 2 ? Shape{sz, cols} : Shape{sz};
      std::vector<double> y(a.data().begin() + off * cols,
                            a.data().begin() + (off + sz) * cols);
      const bool rg = recording({&a});
      Tensor out = Tensor::from_data(std::move(shape), std::move(y), rg);
      if (rg) {
        TensorNode* on = out.node().get();
        TensorNode* an = a.node().get();
        const int64_t start = off * cols, n = sz * cols;
        attach(out, {a}, [on, an, start, n] {
          for (int64_t i = 0; i < n; ++i) an->grad[start + i] += on->grad[i];
        });
      }
      outs.push_back(std::move(out));
    } else {
      const int64_t rows = a.dim(0), cols = a.dim(1);
      std::vector<double> y(static_cast<size_t>(rows * sz));
      for (int64_t r = 0; r < rows; ++r)
        std::copy(a.data().begin() + r * cols + off, a.data().begin() + r * cols + off + sz,
                  y.begin() + r * sz);
      const bool rg = recording({&a});
      Tensor out = Tensor::from_data({rows, sz}, std::move(y), rg);
      if (rg) {
        TensorNode* on = out.node().get();
        TensorNode* an = a.node().get();
        const int64_t start = off, width = sz;
        attach(out, {a}, [on, an, rows, cols, start, width] {
          for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < width; ++j)
              an->grad[r * cols + start + j] += on->grad[r * width + j];
        });
      }
      outs.push_back(std::move(out));
    }
    off += sz;
  }
  return outs;
}

Tensor row(const Tensor& a, int64_t i) { return slice_rows(a, i, i + 1); }

Tensor slice_rows(const Tensor& a, int64_t i0, int64_t i1) {
  if (a.ndim() != 2) throw ShapeError("slice_rows: rank-2 tensor required");
  const int64_t m = a.dim(0), n = a.dim(1);
  if (i0 < 0 || i1 > m || i0 >= i1) throw ShapeError("slice_rows: bad range");
  std::vector<double> y(a.data().begin() + i0 * n, a.data().begin() + i1 * n);
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data({i1 - i0, n}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, i0, i1, n] {
      for (int64_t i = 0; i < (i1 - i0) * n; ++i) an->grad[i0 * n + i] += on->grad[i];
    });
  }
  return out;
}

Tensor stack_rows(const std::vector<Tensor>& rows_in) {
  if (rows_in.empty()) throw ContractError("stack_rows: no inputs");
  const int64_t n = rows_in[0].numel();
  for (const auto& r : rows_in) {
    if (r.ndim() > 2 || r.numel() != n)
      throw ShapeError("stack_rows: inconsistent row widths");
  }
  const int64_t m = static_cast<int64_t>(rows_in.size());
  std::vector<double> y(static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i) {
    const auto d = rows_in[static_cast<size_t>(i)].data();
    std::copy(d.begin(), d.end(), y.begin() + i * n);
  }
  bool rg = false;
  for (const auto& r : rows_in)
    if (r.requires_grad()) rg = true;
  rg = rg && NoGradGuard::grad_enabled();
  Tensor out = Tensor::from_data({m, n}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    std::vector<TensorNode*> pn;
    for (const auto& r : rows_in) pn.push_back(r.node().get());
    attach(out, rows_in, [on, pn, n] {
      for (size_t i = 0; i < pn.size(); ++i) {
        if (!pn[i]->requires_grad) continue;
        for (int64_t j = 0; j < n; ++j)
          pn[i]->grad[j] += on->grad[static_cast<int64_t>(i) * n + j];
      }
    });
  }
  return out;
}

Tensor mean_rows(const Tensor& a) {
  if (a.ndim() != 2) throw ShapeError("mean_rows: rank-2 tensor required");
  const int64_t m = a.dim(0), n = a.dim(1);
  std::vector<double> y(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) y[j] += a.data()[i * n + j];
  for (int64_t j = 0; j < n; ++j) y[j] /= static_cast<double>(m);
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data({1, n}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, m, n] {
      const double inv = 1.0 / static_cast<double>(m);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) an->grad[i * n + j] += inv * on->grad[j];
    });
  }
  return out;
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  if (table.ndim() != 2) throw ShapeError("embedding: table must be [vocab, dim]");
  const int64_t v = table.dim(0), e = table.dim(1);
  const int64_t m = static_cast<int64_t>(ids.size());
  if (m == 0) throw ContractError("embedding: empty id list");
  std::vector<double> y(static_cast<size_t>(m * e));
  for (int64_t i = 0; i < m; ++i) {
    const int id = ids[static_cast<size_t>(i)];
    if (id < 0 || id >= v) throw ContractError("embedding: id out of range");
    std::copy(table.data().begin() + id * e, table.data().begin() + (id + 1) * e,
              y.begin() + i * e);
  }
  const bool rg = recording({&table});
  Tensor out = Tensor::from_data({m, e}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* tn = table.node().get();
    std::vector<int> idv = ids;
    attach(out, {table}, [on, tn, idv, e] {
      for (size_t i = 0; i < idv.size(); ++i)
        for (int64_t j = 0; j < e; ++j)
          tn->grad[idv[i] * e + j] += on->grad[static_cast<int64_t>(i) * e + j];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// regularization

namespace {

Tensor apply_mask_dropout(const Tensor& a, std::vector<double> mask) {
  const auto n = a.numel();
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y[i] = a.data()[i] * mask[static_cast<size_t>(i)];
  const bool rg = recording({&a});
  Tensor out = Tensor::from_data(a.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* an = a.node().get();
    attach(out, {a}, [on, an, mask = std::move(mask), n] {
      for (int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * mask[static_cast<size_t>(i)];
    });
  }
  return out;
}

}  // namespace

Tensor dropout(const Tensor& a, double p, bool training, std::mt19937_64& rng) {
  if (p < 0.0 || p > 1.0) throw ConfigError("dropout: p must lie in [0,1]");
  if (!training || p == 0.0) return a;
  const double keep_scale = p < 1.0 ? 1.0 / (1.0 - p) : 0.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> mask(static_cast<size_t>(a.numel()));
  for (auto& m : mask) m = (u(rng) >= p) ? keep_scale : 0.0;
  return apply_mask_dropout(a, std::move(mask));
}

Tensor spatial_dropout(const Tensor& a, double p, bool training, std::mt19937_64& rng) {
  if (p < 0.0 || p > 1.0) throw ConfigError("spatial_dropout: p must lie in [0,1]");
  if (a.ndim() != 2) throw ShapeError("spatial_dropout: [C,L] map required");
  if (!training || p == 0.0) return a;
  const double keep_scale = p < 1.0 ? 1.0 / (1.0 - p) : 0.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int64_t c = a.dim(0), l = a.dim(1);
  std::vector<double> mask(static_cast<size_t>(c * l));
  for (int64_t i = 0; i < c; ++i) {
    const double m = (u(rng) >= p) ? keep_scale : 0.0;
    std::fill(mask.begin() + i * l, mask.begin() + (i + 1) * l, m);
  }
  return apply_mask_dropout(a, std::move(mask));
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var,
                  bool training, double momentum, double eps) {
  if (x.ndim() < 2) throw ShapeError("batch_norm: channel-first tensor required");
  const int64_t c = x.dim(0);
  const int64_t r = x.numel() / c;
  if (gamma.numel() != c || beta.numel() != c ||
      static_cast<int64_t>(running_mean.size()) != c ||
      static_cast<int64_t>(running_var.size()) != c)
    throw ShapeError("batch_norm: per-channel parameter size mismatch");

  std::vector<double> xhat(static_cast<size_t>(c * r));
  std::vector<double> invstd(static_cast<size_t>(c));
  std::vector<double> y(static_cast<size_t>(c * r));
  const auto xd = x.data();
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* xr = xd.data() + ch * r;
    double m, v;
    if (training) {
      m = 0.0;
      for (int64_t i = 0; i < r; ++i) m += xr[i];
      m /= static_cast<double>(r);
      v = 0.0;
      for (int64_t i = 0; i < r; ++i) v += (xr[i] - m) * (xr[i] - m);
      v /= static_cast<double>(r);
      running_mean[static_cast<size_t>(ch)] =
          (1.0 - momentum) * running_mean[static_cast<size_t>(ch)] + momentum * m;
      running_var[static_cast<size_t>(ch)] =
          (1.0 - momentum) * running_var[static_cast<size_t>(ch)] + momentum * v;
    } else {
      m = running_mean[static_cast<size_t>(ch)];
      v = running_var[static_cast<size_t>(ch)];
    }
    const double inv = 1.0 / std::sqrt(v + eps);
    invstd[static_cast<size_t>(ch)] = inv;
    const double g = gamma.data()[ch], b = beta.data()[ch];
    for (int64_t i = 0; i < r; ++i) {
      const double xh = (xr[i] - m) * inv;
      xhat[static_cast<size_t>(ch * r + i)] = xh;
      y[static_cast<size_t>(ch * r + i)] = g * xh + b;
    }
  }

  const bool rg = recording({&x, &gamma, &beta});
  Tensor out = Tensor::from_data(x.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* xn = x.node().get();
    TensorNode* gn = gamma.node().get();
    TensorNode* bn = beta.node().get();
    attach(out, {x, gamma, beta},
           [on, xn, gn, bn, xhat = std::move(xhat), invstd = std::move(invstd), c, r,
            training] {
             for (int64_t ch = 0; ch < c; ++ch) {
               const double* gy = on->grad.data() + ch * r;
               const double* xh = xhat.data() + ch * r;
               double s0 = 0.0, s1 = 0.0;
               for (int64_t i = 0; i < r; ++i) {
                 s0 += gy[i];
                 s1 += gy[i] * xh[i];
               }
               if (gn->requires_grad) gn->grad[ch] += s1;
               if (bn->requires_grad) bn->grad[ch] += s0;
               if (xn->requires_grad) {
                 const double gscale = gn->data[static_cast<size_t>(ch)] *
                                       invstd[static_cast<size_t>(ch)];
                 const double inv_r = 1.0 / static_cast<double>(r);
                 for (int64_t i = 0; i < r; ++i) {
                   double contrib = gy[i];
                   if (training) contrib -= s0 * inv_r + xh[i] * s1 * inv_r;
                   xn->grad[ch * r + i] += gscale * contrib;
                 }
               }
             }
           });
  }
  return out;
}

Tensor weight_norm(const Tensor& v, const Tensor& g) {
  if (v.ndim() < 2) throw ShapeError("weight_norm: v must have an output-channel axis");
  const int64_t co = v.dim(0);
  if (g.numel() != co)
    throw ShapeError("weight_norm: g size " + shape_str(g.shape()) +
                     " does not match output channels of " + shape_str(v.shape()));
  const int64_t r = v.numel() / co;
  std::vector<double> norms(static_cast<size_t>(co));
  std::vector<double> y(static_cast<size_t>(co * r));
  for (int64_t o = 0; o < co; ++o) {
    double s = 0.0;
    for (int64_t i = 0; i < r; ++i) s += v.data()[o * r + i] * v.data()[o * r + i];
    const double n = std::sqrt(s);
    if (n == 0.0) throw DataError("weight_norm: zero direction vector");
    norms[static_cast<size_t>(o)] = n;
    const double f = g.data()[o] / n;
    for (int64_t i = 0; i < r; ++i) y[static_cast<size_t>(o * r + i)] = f * v.data()[o * r + i];
  }
  const bool rg = recording({&v, &g});
  Tensor out = Tensor::from_data(v.shape(), std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* vn = v.node().get();
    TensorNode* gn = g.node().get();
    attach(out, {v, g}, [on, vn, gn, norms = std::move(norms), co, r] {
      for (int64_t o = 0; o < co; ++o) {
        const double n = norms[static_cast<size_t>(o)];
        const double gv = gn->data[static_cast<size_t>(o)];
        const double* gw = on->grad.data() + o * r;
        const double* vd = vn->data.data() + o * r;
        double dot = 0.0;
        for (int64_t i = 0; i < r; ++i) dot += gw[i] * vd[i];
        if (gn->requires_grad) gn->grad[o] += dot / n;
        if (vn->requires_grad) {
          const double a = gv / n;
          const double b = gv * dot / (n * n * n);
          for (int64_t i = 0; i < r; ++i) vn->grad[o * r + i] += a * gw[i] - b * vd[i];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// convolution & pooling

Tensor conv1d(const Tensor& x, const Tensor& w, int64_t stride, int64_t dilation,
              bool causal_pad, bool transposed) {
  if (causal_pad && transposed)
    throw ConfigError("conv1d: causal padding is undefined for transposed convolution");
  Conv1dOpts opts;
  opts.stride = stride;
  opts.dilation = dilation;
  opts.transposed = transposed;
  const int64_t k = w.dim(static_cast<int>(w.ndim()) - 1);
  if (causal_pad) {
    opts.pad_lo = (k - 1) * dilation;
    opts.pad_hi = 0;
  } else if (transposed) {
    opts.pad_lo = (k - 1) / 2;
  }
  return conv1d(x, w, Tensor(), opts);
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              const Conv1dOpts& opts) {
  if (x.ndim() != 2 || w.ndim() != 3)
    throw ShapeError("conv1d: expected x[C,L] and w[Co,Ci,K], got " +
                     shape_str(x.shape()) + " and " + shape_str(w.shape()));
  kernels::Conv1dGeom geom;
  geom.in_ch = x.dim(0);
  geom.in_len = x.dim(1);
  geom.out_ch = w.dim(0);
  geom.kernel = w.dim(2);
  geom.stride = opts.stride;
  geom.dilation = opts.dilation;
  geom.pad_lo = opts.pad_lo;
  geom.pad_hi = opts.pad_hi;
  geom.groups = opts.groups;
  geom.transposed = opts.transposed;
  geom.validate();
  if (w.dim(1) * geom.groups != geom.in_ch)
    throw ShapeError("conv1d: weight " + shape_str(w.shape()) + " does not match input " +
                     shape_str(x.shape()) + " with groups=" + std::to_string(geom.groups));
  if (geom.transposed && geom.pad_lo < geom.stride - 1)
    throw ConfigError("conv1d: transposed kernel too small for upsampling factor");
  if (bias.defined() && bias.numel() != geom.out_ch)
    throw ShapeError("conv1d: bias size mismatch");

  const int64_t o = geom.out_len();
  std::vector<double> y(static_cast<size_t>(geom.out_ch * o));
  kernels::conv1d(geom, x.data().data(), w.data().data(), y.data());
  if (bias.defined()) {
    for (int64_t co = 0; co < geom.out_ch; ++co) {
      const double b = bias.data()[co];
      for (int64_t t = 0; t < o; ++t) y[static_cast<size_t>(co * o + t)] += b;
    }
  }

  const bool rg = bias.defined() ? recording({&x, &w, &bias}) : recording({&x, &w});
  Tensor out = Tensor::from_data({geom.out_ch, o}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* xn = x.node().get();
    TensorNode* wn = w.node().get();
    TensorNode* bn = bias.defined() ? bias.node().get() : nullptr;
    std::vector<Tensor> parents{x, w};
    if (bias.defined()) parents.push_back(bias);
    attach(out, std::move(parents), [on, xn, wn, bn, geom, o] {
      if (xn->requires_grad)
        kernels::conv1d_grad_x(geom, on->grad.data(), wn->data.data(), xn->grad.data());
      if (wn->requires_grad)
        kernels::conv1d_grad_w(geom, on->grad.data(), xn->data.data(), wn->grad.data());
      if (bn && bn->requires_grad) {
        for (int64_t co = 0; co < geom.out_ch; ++co) {
          double acc = 0.0;
          for (int64_t t = 0; t < o; ++t) acc += on->grad[co * o + t];
          bn->grad[co] += acc;
        }
      }
    });
  }
  return out;
}

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias,
              const Conv3dOpts& opts) {
  if (x.ndim() != 4 || w.ndim() != 5)
    throw ShapeError("conv3d: expected x[C,T,H,W] and w[Co,Ci,Kt,Kh,Kw], got " +
                     shape_str(x.shape()) + " and " + shape_str(w.shape()));
  if (w.dim(1) != x.dim(0))
    throw ShapeError("conv3d: weight " + shape_str(w.shape()) + " does not match input " +
                     shape_str(x.shape()));
  kernels::Conv3dGeom geom;
  geom.in_ch = x.dim(0);
  geom.t = x.dim(1);
  geom.h = x.dim(2);
  geom.w = x.dim(3);
  geom.out_ch = w.dim(0);
  geom.kt = w.dim(2);
  geom.kh = w.dim(3);
  geom.kw = w.dim(4);
  geom.st = opts.st;
  geom.sh = opts.sh;
  geom.sw = opts.sw;
  geom.pt = opts.pt;
  geom.ph = opts.ph;
  geom.pw = opts.pw;
  geom.validate();
  if (bias.defined() && bias.numel() != geom.out_ch)
    throw ShapeError("conv3d: bias size mismatch");

  const int64_t ot = geom.out_t(), oh = geom.out_h(), ow = geom.out_w();
  const int64_t plane = ot * oh * ow;
  std::vector<double> y(static_cast<size_t>(geom.out_ch * plane));
  kernels::conv3d(geom, x.data().data(), w.data().data(), y.data());
  if (bias.defined()) {
    for (int64_t co = 0; co < geom.out_ch; ++co) {
      const double b = bias.data()[co];
      for (int64_t i = 0; i < plane; ++i) y[static_cast<size_t>(co * plane + i)] += b;
    }
  }

  const bool rg = bias.defined() ? recording({&x, &w, &bias}) : recording({&x, &w});
  Tensor out = Tensor::from_data({geom.out_ch, ot, oh, ow}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* xn = x.node().get();
    TensorNode* wn = w.node().get();
    TensorNode* bn = bias.defined() ? bias.node().get() : nullptr;
    std::vector<Tensor> parents{x, w};
    if (bias.defined()) parents.push_back(bias);
    attach(out, std::move(parents), [on, xn, wn, bn, geom, plane] {
      if (xn->requires_grad)
        kernels::conv3d_grad_x(geom, on->grad.data(), wn->data.data(), xn->grad.data());
      if (wn->requires_grad)
        kernels::conv3d_grad_w(geom, on->grad.data(), xn->data.data(), wn->grad.data());
      if (bn && bn->requires_grad) {
        for (int64_t co = 0; co < geom.out_ch; ++co) {
          double acc = 0.0;
          for (int64_t i = 0; i < plane; ++i) acc += on->grad[co * plane + i];
          bn->grad[co] += acc;
        }
      }
    });
  }
  return out;
}

Tensor maxpool_spatial(const Tensor& x, int64_t kh, int64_t kw, int64_t sh,
                       int64_t sw, int64_t ph, int64_t pw) {
  if (x.ndim() != 4) throw ShapeError("maxpool_spatial: [C,T,H,W] required");
  kernels::Pool2dGeom geom;
  geom.ch = x.dim(0);
  geom.t = x.dim(1);
  geom.h = x.dim(2);
  geom.w = x.dim(3);
  geom.kh = kh;
  geom.kw = kw;
  geom.sh = sh;
  geom.sw = sw;
  geom.ph = ph;
  geom.pw = pw;
  const int64_t oh = geom.out_h(), ow = geom.out_w();
  if (oh < 1 || ow < 1) throw ShapeError("maxpool_spatial: window exceeds input");
  std::vector<double> y(static_cast<size_t>(geom.ch * geom.t * oh * ow));
  std::vector<int64_t> argmax(y.size());
  kernels::maxpool_spatial(geom, x.data().data(), y.data(), argmax.data());
  const bool rg = recording({&x});
  Tensor out = Tensor::from_data({geom.ch, geom.t, oh, ow}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* xn = x.node().get();
    attach(out, {x}, [on, xn, geom, argmax = std::move(argmax)] {
      kernels::maxpool_spatial_grad(geom, on->grad.data(), argmax.data(), xn->grad.data());
    });
  }
  return out;
}

Tensor mean_pool_spatial(const Tensor& x) {
  if (x.ndim() != 4) throw ShapeError("mean_pool_spatial: [C,T,H,W] required");
  const int64_t c = x.dim(0), t = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<double> y(static_cast<size_t>(c * t), 0.0);
  for (int64_t i = 0; i < c * t; ++i) {
    double acc = 0.0;
    for (int64_t j = 0; j < plane; ++j) acc += x.data()[i * plane + j];
    y[static_cast<size_t>(i)] = acc / static_cast<double>(plane);
  }
  const bool rg = recording({&x});
  Tensor out = Tensor::from_data({c, t}, std::move(y), rg);
  if (rg) {
    TensorNode* on = out.node().get();
    TensorNode* xn = x.node().get();
    attach(out, {x}, [on, xn, c, t, plane] {
      const double inv = 1.0 / static_cast<double>(plane);
      for (int64_t i = 0; i < c * t; ++i)
        for (int64_t j = 0; j < plane; ++j) xn->grad[i * plane + j] += inv * on->grad[i];
    });
  }
  return out;
}

}  // namespace avsr::ops
