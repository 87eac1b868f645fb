// SPDX-License-Identifier: Apache-2.0

#include "avsr/ae_net.hpp"

#include <cmath>

#include "avsr/error.hpp"

namespace avsr {

AEConfig AEConfig::preset(const std::string& unit, int64_t visual_dim,
                          int64_t width, int64_t out_width) {
  AEConfig cfg;
  cfg.visual_dim = visual_dim;
  const std::string w = std::to_string(width);
  const std::string o = std::to_string(out_width);
  if (unit == "tcn") {
    cfg.video_stream = StreamSpec::parse("tcn|fc:" + w + "; tcn:" + w +
                                         " k3 n3; up:" + w + " k3 x2; tcn:" + w +
                                         " k3 n3; up:" + w + " k3 x2; fc:" + o);
    cfg.audio_stream =
        StreamSpec::parse("tcn|fc:" + w + "; tcn:" + w + " k3 n3; fc:" + o);
  } else if (unit == "1drn") {
    cfg.video_stream = StreamSpec::parse(
        "1drn|fc:" + w + "; block:" + w + " k5; block:" + w + " k5; up:" + w +
        " k5 x2; block:" + w + " k5; block:" + w + " k5; block:" + w +
        " k5; up:" + w + " k5 x2; block:" + w + " k5; block:" + w + " k5; fc:" + o);
    cfg.audio_stream = StreamSpec::parse("1drn|fc:" + w + "; block:" + w +
                                         " k5; block:" + w + " k5; block:" + w +
                                         " k5; block:" + w + " k5; block:" + w +
                                         " k5; fc:" + o);
  } else {
    throw ConfigError("ae: unknown temporal unit '" + unit + "'");
  }
  return cfg;
}

AEModel::AEModel(const AEConfig& cfg) : cfg_(cfg) {
  cfg.video_stream.validate_video();
  cfg.audio_stream.validate_audio();
  video_ = std::make_unique<TemporalStream>(cfg.visual_dim, cfg.video_stream);
  audio_ = std::make_unique<TemporalStream>(cfg.mel_bins, cfg.audio_stream);
  const int64_t fused = cfg.video_stream.out_channels(cfg.visual_dim) +
                        cfg.audio_stream.out_channels(cfg.mel_bins);
  fusion_ = std::make_unique<EleAttGRU>(fused, cfg.gru_units);
  fc1_ = std::make_unique<nn::Linear>(cfg.gru_units, cfg.fc_width);
  fc2_ = std::make_unique<nn::Linear>(cfg.fc_width, cfg.fc_width);
  fc_mask_ = std::make_unique<nn::Linear>(cfg.fc_width, cfg.mel_bins);
  // start near an identity mask: with mostly-silent magnitude targets the
  // all-zero mask is a strong L1 local optimum that a mid-range sigmoid
  // init falls into
  for (nn::Parameter* p : fc_mask_->parameters())
    if (p->name.find("bias") != std::string::npos)
      for (double& v : p->value.mutable_data()) v = 2.0;
  register_module("video_stream", *video_);
  register_module("audio_stream", *audio_);
  register_module("fusion", *fusion_);
  register_module("fc1", *fc1_);
  register_module("fc2", *fc2_);
  register_module("fc_mask", *fc_mask_);
}

AEOutput AEModel::forward(const Tensor& v_feats, const Tensor& noisy_mel) {
  if (v_feats.ndim() != 2 || noisy_mel.ndim() != 2)
    throw ShapeError("ae: expected [T,Dv] features and [4T,F] magnitudes");
  if (noisy_mel.dim(0) != 4 * v_feats.dim(0))
    throw ShapeError("ae: audio frames " + std::to_string(noisy_mel.dim(0)) +
                     " are not 4x video frames " + std::to_string(v_feats.dim(0)));
  if (noisy_mel.dim(1) != cfg_.mel_bins)
    throw ShapeError("ae: expected " + std::to_string(cfg_.mel_bins) + " mel bins");

  Tensor mask;
  if (forced_mask_) {
    mask = Tensor::full(noisy_mel.shape(), *forced_mask_);
  } else {
    Tensor v = video_stream(*video_, v_feats);  // [4T,Cv]
    Tensor a = audio_stream(*audio_, ops::scale(noisy_mel, cfg_.mel_gain));
    Tensor fused = ops::concat({v, a}, 1);
    Tensor h = fusion_->run(fused);
    h = ops::relu(fc1_->forward(h));
    h = ops::relu(fc2_->forward(h));
    mask = ops::sigmoid(fc_mask_->forward(h));
  }
  return {mask, ops::mul(mask, noisy_mel)};
}

double ae_train_step(const std::vector<AETrainSample>& batch, AEModel& model,
                     nn::Adam& optimizer) {
  if (batch.empty()) throw ContractError("ae train step: empty batch");
  optimizer.zero_grad();
  Tensor total;
  for (const AETrainSample& s : batch) {
    if (s.noisy.shape() != s.clean.shape())
      throw ShapeError("ae train step: noisy/clean magnitudes misaligned");
    AEOutput out = model.forward(s.v_feats, s.noisy);
    Tensor loss = ops::l1_loss(out.enhanced, s.clean);
    total = total.defined() ? ops::add(total, loss) : loss;
  }
  total = ops::scale(total, 1.0 / static_cast<double>(batch.size()));
  const double value = total.item();
  if (!std::isfinite(value))
    throw DivergenceError("ae training diverged: loss=" + std::to_string(value) +
                          " over batch of " + std::to_string(batch.size()));
  total.backward();
  optimizer.step();
  return value;
}

double energy_error(const Tensor& m, const Tensor& m_o) {
  if (m.shape() != m_o.shape())
    throw ShapeError("energy error: shape mismatch " + shape_str(m.shape()) +
                     " vs " + shape_str(m_o.shape()));
  double num = 0.0, den = 0.0;
  for (int64_t i = 0; i < m.numel(); ++i) {
    const double d = m.data()[i] - m_o.data()[i];
    num += d * d;
    den += m_o.data()[i] * m_o.data()[i];
  }
  if (den == 0.0) throw DataError("energy error: reference magnitude is all-zero");
  return std::sqrt(num) / std::sqrt(den);
}

}  // namespace avsr
