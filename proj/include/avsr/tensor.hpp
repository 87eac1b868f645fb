// SPDX-License-Identifier: Apache-2.0
//
// Dense float64 tensors with reverse-mode autodiff. A Tensor is a shared
// handle to a node in the implicit computation graph; ops in ops.hpp build
// the graph and backward() walks it in reverse topological order.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace avsr {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this->grad and accumulates into parents' grads. Captures raw
  // node pointers only; `parents` keeps them alive.
  std::function<void()> backward_fn;

  bool is_leaf() const { return parents.empty(); }
  ~TensorNode();  // iterative teardown, long graph chains must not recurse
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int ndim() const { return static_cast<int>(shape().size()); }
  int64_t dim(int i) const;
  int64_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  bool requires_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  double item() const;                              // scalar only
  double at(std::initializer_list<int64_t>) const;  // row-major indexing

  // Reverse-mode pass from a scalar. Gradients of leaves accumulate across
  // calls; interior gradients are reset at the start of each pass.
  void backward() const;

  // Deep copy of values; result is a detached leaf.
  Tensor clone_detached(bool requires_grad = false) const;

  std::shared_ptr<TensorNode>& node() { return node_; }
  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// While a guard is alive, ops do not record the graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
  static bool grad_enabled();

 private:
  bool prev_;
};

void backward(const Tensor& loss);

}  // namespace avsr
