// SPDX-License-Identifier: Apache-2.0
//
// Multi-modality sequence-to-sequence recognizer. Audio path: stride-2 1D
// ResNet blocks sandwiching recurrent encoder layers, reducing 4T mel frames
// to T to match the video features. Per-modality attention decoders produce
// context vectors that are concatenated and fed to a fusion decoder emitting
// 41-way character logits. A missing modality contributes a zero context.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "avsr/ae_net.hpp"
#include "avsr/eleatt_gru.hpp"
#include "avsr/nn.hpp"
#include "avsr/temporal.hpp"

namespace avsr {

// 41 symbols: [PAD] [BOS] [EOS] [SPACE] apostrophe, a-z, 0-9.
struct Vocab {
  static constexpr int kSize = 41;
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSpace = 3;
  static constexpr int kApostrophe = 4;

  static int encode_char(char c);
  static std::vector<int> encode(const std::string& text);
  static std::string decode(const std::vector<int>& ids);
};

struct TokenSequence {
  std::vector<int> ids;  // no BOS/EOS framing

  std::string text() const { return Vocab::decode(ids); }
};

struct MSRConfig {
  int64_t visual_dim = 64;
  int64_t mel_bins = signal::kMelBins;
  int64_t width = 64;       // audio-path conv width
  int64_t units = 64;       // encoder/decoder recurrent units
  int64_t embed_dim = 16;
  int64_t conv_kernel = 5;
  double dropout_p = 0.1;
  double label_smoothing = 0.1;
  double mel_gain = 0.2;  // input gain on linear mel magnitudes
};

class MSRModel : public nn::Module {
 public:
  explicit MSRModel(const MSRConfig& cfg);

  // mel [4T,F] -> [T,units]
  Tensor encode_audio(const Tensor& mel);
  // feats [T,Dv] -> [T,units]
  Tensor encode_video(const Tensor& feats);

  // Teacher-forced logits [len(targets)+1, 41]; rows predict the target
  // characters followed by EOS. Undefined tensors mark absent modalities.
  Tensor forward_teacher(const Tensor& mel, const Tensor& v_feats,
                         const std::vector<int>& target_ids);
  TokenSequence decode_greedy(const Tensor& mel, const Tensor& v_feats,
                              int max_len);

  const MSRConfig& config() const { return cfg_; }

 private:
  struct DecoderState;
  Tensor decode_step(int prev_token, DecoderState& state, const Tensor& a_mem,
                     const Tensor& v_mem);
  void check_modalities(const Tensor& mel, const Tensor& v_feats) const;

  MSRConfig cfg_;
  std::unique_ptr<nn::Conv1dLayer> audio_in_;
  std::unique_ptr<ResNet1DBlock> a_rn1_, a_rn2_;
  std::unique_ptr<EleAttGRU> a_enc1_, a_enc2_;
  std::unique_ptr<EleAttGRUStack> v_enc_;
  std::unique_ptr<nn::Embedding> embed_;
  std::unique_ptr<EleAttGRU> dec_audio_, dec_video_, dec_fusion_;
  std::unique_ptr<nn::Dropout> enc_drop_, dec_drop_;
  std::unique_ptr<nn::Linear> out_proj_;
};

struct MSRTrainSample {
  Tensor mel;      // undefined when the audio modality is dropped
  Tensor v_feats;  // undefined when the video modality is dropped
  std::vector<int> target_ids;
  int n_words = 1;
};

// Teacher-forced label-smoothed cross-entropy over the batch restricted to
// samples with at most curriculum_len words; one optimizer step.
double msr_train_step(const std::vector<MSRTrainSample>& batch, MSRModel& model,
                      nn::Adam& optimizer, int curriculum_len);

enum class Mode { kA, kV, kAV, kVA, kVAV };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);
bool mode_uses_enhancement(Mode mode);

// Wires one sample through the pipeline for the given mode. VA/VAV require
// an enhancement model. noisy_mel may be undefined only for mode V.
TokenSequence run_mode(Mode mode, const Tensor& noisy_mel, const Tensor& v_feats,
                       AEModel* ae, MSRModel& msr, int max_len);

}  // namespace avsr
