// SPDX-License-Identifier: Apache-2.0
//
// Audio-enhancement network: video and audio temporal streams fused by
// channel concatenation, a one-layer recurrent encoder and three dense
// layers ending in a sigmoid mask that multiplies the noisy magnitudes.

#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "avsr/eleatt_gru.hpp"
#include "avsr/nn.hpp"
#include "avsr/signal.hpp"
#include "avsr/temporal.hpp"

namespace avsr {

struct AEConfig {
  StreamSpec video_stream;
  StreamSpec audio_stream;
  int64_t visual_dim = 64;
  int64_t mel_bins = signal::kMelBins;
  int64_t gru_units = 64;
  int64_t fc_width = 80;
  // fixed gain bringing linear mel magnitudes to unit scale at the stream
  // input; the mask still multiplies the raw magnitudes
  double mel_gain = 0.2;

  // Desk-scale presets of the two unit families; `unit` is "tcn" or "1drn".
  static AEConfig preset(const std::string& unit, int64_t visual_dim,
                         int64_t width = 64, int64_t out_width = 48);
};

struct AEOutput {
  Tensor mask;      // [4T,F], entries strictly inside (0,1)
  Tensor enhanced;  // mask * noisy, elementwise
};

class AEModel : public nn::Module {
 public:
  explicit AEModel(const AEConfig& cfg);

  // v_feats [T,Dv], noisy [4T,F]
  AEOutput forward(const Tensor& v_feats, const Tensor& noisy_mel);
  const AEConfig& config() const { return cfg_; }

  // Test hook: replace the mask with a constant.
  void force_mask(std::optional<double> value) { forced_mask_ = value; }

 private:
  AEConfig cfg_;
  std::optional<double> forced_mask_;
  std::unique_ptr<TemporalStream> video_, audio_;
  std::unique_ptr<EleAttGRU> fusion_;
  std::unique_ptr<nn::Linear> fc1_, fc2_, fc_mask_;
};

struct AETrainSample {
  Tensor v_feats;  // [T,Dv]
  Tensor noisy;    // [4T,F]
  Tensor clean;    // [4T,F]
};

// L1 loss between enhanced and clean magnitudes, one optimizer step.
double ae_train_step(const std::vector<AETrainSample>& batch, AEModel& model,
                     nn::Adam& optimizer);

// ||M - M_o||_2 / ||M_o||_2 over all entries.
double energy_error(const Tensor& m, const Tensor& m_o);

}  // namespace avsr
