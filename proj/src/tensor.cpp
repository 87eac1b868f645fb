// SPDX-License-Identifier: Apache-2.0

#include "avsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "avsr/error.hpp"

namespace avsr {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

TensorNode::~TensorNode() {
  if (parents.empty()) return;
  // Unlink ancestors iteratively so that destroying a deep graph (one node
  // per time step in a long recurrence) cannot overflow the stack.
  std::vector<std::shared_ptr<TensorNode>> pending;
  pending.swap(parents);
  while (!pending.empty()) {
    std::shared_ptr<TensorNode> p = std::move(pending.back());
    pending.pop_back();
    if (p && p.use_count() == 1 && !p->parents.empty()) {
      for (auto& gp : p->parents) pending.push_back(std::move(gp));
      p->parents.clear();
    }
  }
}

namespace {

thread_local bool g_grad_enabled = true;

void validate_shape(const Shape& shape) {
  for (int64_t d : shape) {
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
}

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> data,
                                      bool requires_grad) {
  validate_shape(shape);
  const auto n = static_cast<size_t>(shape_numel(shape));
  if (data.size() != n) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(n, 0.0);
  return node;
}

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  validate_shape(shape);
  std::vector<double> d(static_cast<size_t>(shape_numel(shape)), value);
  Tensor t;
  t.node_ = make_node(std::move(shape), std::move(d), requires_grad);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  Tensor t;
  t.node_ = make_node(std::move(shape), std::move(data), requires_grad);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("operation on an undefined tensor");
  return node_->shape;
}

int64_t Tensor::dim(int i) const { return shape().at(static_cast<size_t>(i)); }

int64_t Tensor::numel() const { return static_cast<int64_t>(node_->data.size()); }

std::span<const double> Tensor::data() const {
  if (!node_) throw ContractError("operation on an undefined tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw ContractError("operation on an undefined tensor");
  return node_->data;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::grad() const {
  if (!requires_grad()) throw ContractError("grad() on a tensor without requires_grad");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!requires_grad()) throw ContractError("grad() on a tensor without requires_grad");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (requires_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() requires a scalar, got " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size()) throw ShapeError("index rank mismatch for " + shape_str(s));
  int64_t off = 0;
  size_t i = 0;
  for (int64_t v : idx) {
    if (v < 0 || v >= s[i]) throw ShapeError("index out of range");
    off = off * s[i] + v;
    ++i;
  }
  return node_->data[static_cast<size_t>(off)];
}

Tensor Tensor::clone_detached(bool requires_grad) const {
  return from_data(shape(), node_->data, requires_grad);
}

void Tensor::backward() const { avsr::backward(*this); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a defined scalar loss");
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a tensor that does not require grad");
  }

  // Iterative post-order DFS: parents precede children in `order`.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    TensorNode* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  TensorNode* root = loss.node().get();
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorNode* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-pass scratch; leaf gradients accumulate.
  for (TensorNode* n : order) {
    if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  root->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn();
  }
}

}  // namespace avsr
