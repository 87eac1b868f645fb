// SPDX-License-Identifier: Apache-2.0

#include "avsr/nn.hpp"

#include <cmath>
#include <limits>

#include "avsr/error.hpp"

namespace avsr::nn {

namespace {
std::mt19937_64 g_init_rng{0x5eedULL};
uint64_t g_stream_counter = 1;
uint64_t g_base_seed = 0x5eedULL;
}  // namespace

void seed_all(uint64_t seed) {
  g_base_seed = seed;
  g_init_rng.seed(seed);
  g_stream_counter = 1;
}

std::mt19937_64& init_rng() { return g_init_rng; }

uint64_t next_stream_seed() {
  // splitmix-style spread so consecutive streams are uncorrelated
  uint64_t z = g_base_seed + 0x9e3779b97f4a7c15ULL * (g_stream_counter++);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Parameter& Module::register_parameter(const std::string& name, Shape shape,
                                      Init init, int64_t fan_in) {
  auto p = std::make_unique<Parameter>();
  p->name = name;
  const auto n = static_cast<size_t>(shape_numel(shape));
  std::vector<double> data(n, 0.0);
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kOnes:
      std::fill(data.begin(), data.end(), 1.0);
      break;
    case Init::kFanInUniform: {
      if (fan_in <= 0) throw ConfigError("fan-in init needs a positive fan_in");
      const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& d : data) d = u(g_init_rng);
      break;
    }
  }
  p->value = Tensor::from_data(std::move(shape), std::move(data), /*requires_grad=*/true);
  params_.push_back(std::move(p));
  return *params_.back();
}

Buffer& Module::register_buffer(const std::string& name, Shape shape, double fill) {
  auto b = std::make_unique<Buffer>();
  b->name = name;
  b->shape = shape;
  b->data.assign(static_cast<size_t>(shape_numel(shape)), fill);
  buffers_.push_back(std::move(b));
  return *buffers_.back();
}

void Module::register_module(const std::string& name, Module& m) {
  children_.emplace_back(name, &m);
}

void Module::named_parameters(const std::string& prefix, std::vector<Parameter*>& out) {
  for (auto& p : params_) {
    // local names are stable; rebuild the full path on each walk
    const std::string local = p->name.substr(p->name.find_last_of('/') + 1);
    p->name = prefix.empty() ? local : prefix + "/" + local;
    out.push_back(p.get());
  }
  for (auto& [name, child] : children_)
    child->named_parameters(prefix.empty() ? name : prefix + "/" + name, out);
}

void Module::named_buffers(const std::string& prefix, std::vector<Buffer*>& out) {
  for (auto& b : buffers_) {
    const std::string local = b->name.substr(b->name.find_last_of('/') + 1);
    b->name = prefix.empty() ? local : prefix + "/" + local;
    out.push_back(b.get());
  }
  for (auto& [name, child] : children_)
    child->named_buffers(prefix.empty() ? name : prefix + "/" + name, out);
}

std::vector<Parameter*> Module::parameters() {
  std::vector<Parameter*> out;
  named_parameters("", out);
  return out;
}

std::vector<Buffer*> Module::buffers() {
  std::vector<Buffer*> out;
  named_buffers("", out);
  return out;
}

void Module::set_training(bool training) {
  training_ = training;
  for (auto& [name, child] : children_) child->set_training(training);
}

void Module::set_frozen(bool frozen) {
  for (Parameter* p : parameters()) p->frozen = frozen;
}

int64_t Module::parameter_count() {
  int64_t n = 0;
  for (Parameter* p : parameters()) n += p->value.numel();
  return n;
}

// ---------------------------------------------------------------------------

Linear::Linear(int64_t in, int64_t out, bool bias) {
  w_ = &register_parameter("weight", {in, out}, Init::kFanInUniform, in);
  if (bias) b_ = &register_parameter("bias", {out}, Init::kZeros);
}

Tensor Linear::forward(const Tensor& x) const {
  Tensor y = ops::matmul(x, w_->value);
  if (b_) y = ops::add_rowvec(y, b_->value);
  return y;
}

Embedding::Embedding(int64_t vocab, int64_t dim) {
  table_ = &register_parameter("table", {vocab, dim}, Init::kFanInUniform, dim);
}

Tensor Embedding::forward(const std::vector<int>& ids) const {
  return ops::embedding(table_->value, ids);
}

namespace {

ops::Conv1dOpts to_opts(const ConvSpec& s, int64_t kernel) {
  ops::Conv1dOpts o;
  o.stride = s.stride;
  o.dilation = s.dilation;
  o.groups = s.groups;
  o.transposed = s.transposed;
  if (s.causal) {
    o.pad_lo = (kernel - 1) * s.dilation;
    o.pad_hi = 0;
  } else {
    o.pad_lo = s.pad_lo;
    o.pad_hi = s.pad_hi;
  }
  return o;
}

}  // namespace

Conv1dLayer::Conv1dLayer(int64_t in_ch, int64_t out_ch, int64_t kernel,
                         ConvSpec spec, bool bias) {
  if (in_ch % spec.groups != 0 || out_ch % spec.groups != 0)
    throw ConfigError("conv1d layer: channels not divisible by groups");
  opts_ = to_opts(spec, kernel);
  const int64_t cg = in_ch / spec.groups;
  w_ = &register_parameter("weight", {out_ch, cg, kernel}, Init::kFanInUniform,
                           cg * kernel);
  if (bias) b_ = &register_parameter("bias", {out_ch}, Init::kZeros);
}

Tensor Conv1dLayer::forward(const Tensor& x) const {
  return ops::conv1d(x, w_->value, b_ ? b_->value : Tensor(), opts_);
}

WNConv1dLayer::WNConv1dLayer(int64_t in_ch, int64_t out_ch, int64_t kernel,
                             ConvSpec spec, bool bias) {
  if (spec.groups != 1) throw ConfigError("weight-norm conv: groups unsupported");
  opts_ = to_opts(spec, kernel);
  v_ = &register_parameter("v", {out_ch, in_ch, kernel}, Init::kFanInUniform,
                           in_ch * kernel);
  g_ = &register_parameter("g", {out_ch}, Init::kZeros);
  // g starts at ||v|| so the initial effective weight equals v
  const int64_t r = in_ch * kernel;
  for (int64_t o = 0; o < out_ch; ++o) {
    double s = 0.0;
    for (int64_t i = 0; i < r; ++i) {
      const double x = v_->value.data()[o * r + i];
      s += x * x;
    }
    g_->value.mutable_data()[o] = std::sqrt(s);
  }
  if (bias) b_ = &register_parameter("bias", {out_ch}, Init::kZeros);
}

Tensor WNConv1dLayer::forward(const Tensor& x) const {
  Tensor w = ops::weight_norm(v_->value, g_->value);
  return ops::conv1d(x, w, b_ ? b_->value : Tensor(), opts_);
}

Conv3dLayer::Conv3dLayer(int64_t in_ch, int64_t out_ch, int64_t kt, int64_t kh,
                         int64_t kw, ops::Conv3dOpts opts, bool bias)
    : opts_(opts) {
  w_ = &register_parameter("weight", {out_ch, in_ch, kt, kh, kw},
                           Init::kFanInUniform, in_ch * kt * kh * kw);
  if (bias) b_ = &register_parameter("bias", {out_ch}, Init::kZeros);
}

Tensor Conv3dLayer::forward(const Tensor& x) const {
  return ops::conv3d(x, w_->value, b_ ? b_->value : Tensor(), opts_);
}

BatchNorm::BatchNorm(int64_t channels, bool zero_init_gamma) {
  gamma_ = &register_parameter("gamma", {channels},
                               zero_init_gamma ? Init::kZeros : Init::kOnes);
  beta_ = &register_parameter("beta", {channels}, Init::kZeros);
  mean_ = &register_buffer("running_mean", {channels}, 0.0);
  var_ = &register_buffer("running_var", {channels}, 1.0);
}

Tensor BatchNorm::forward(const Tensor& x) {
  return ops::batch_norm(x, gamma_->value, beta_->value, mean_->data, var_->data,
                         training());
}

Dropout::Dropout(double p) : p_(p), rng_(next_stream_seed()) {
  if (p < 0.0 || p > 1.0) throw ConfigError("dropout: p must lie in [0,1]");
}

Tensor Dropout::forward(const Tensor& x) {
  return ops::dropout(x, p_, training(), rng_);
}

SpatialDropout::SpatialDropout(double p) : p_(p), rng_(next_stream_seed()) {
  if (p < 0.0 || p > 1.0) throw ConfigError("spatial dropout: p must lie in [0,1]");
}

Tensor SpatialDropout::forward(const Tensor& x) {
  return ops::spatial_dropout(x, p_, training(), rng_);
}

// ---------------------------------------------------------------------------

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr <= 0.0) throw ConfigError("adam: learning rate must be positive");
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(static_cast<size_t>(params_[i]->value.numel()), 0.0);
    v_[i].assign(static_cast<size_t>(params_[i]->value.numel()), 0.0);
  }
}

void Adam::set_lr(double lr) {
  if (lr <= 0.0) throw ConfigError("adam: learning rate must be positive");
  lr_ = lr;
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter* p = params_[i];
    if (p->frozen) continue;
    auto w = p->value.mutable_data();
    const auto g = p->value.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->value.zero_grad();
}

PlateauLr::PlateauLr(double initial, double floor, int patience, double factor,
                     double min_delta)
    : lr_(initial), floor_(floor), factor_(factor), min_delta_(min_delta),
      patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (initial <= 0.0 || floor <= 0.0 || factor <= 0.0 || factor >= 1.0 || patience < 1)
    throw ConfigError("plateau schedule: bad parameters");
}

double PlateauLr::update(double loss) {
  if (loss < best_ - min_delta_) {
    best_ = loss;
    since_ = 0;
  } else if (++since_ >= patience_) {
    lr_ = std::max(floor_, lr_ * factor_);
    since_ = 0;
  }
  return lr_;
}

}  // namespace avsr::nn
