// SPDX-License-Identifier: Apache-2.0

#include "avsr/msr_net.hpp"

#include <cmath>

#include "avsr/error.hpp"

namespace avsr {

int Vocab::encode_char(char c) {
  if (c >= 'a' && c <= 'z') return 5 + (c - 'a');
  if (c >= 'A' && c <= 'Z') return 5 + (c - 'A');
  if (c >= '0' && c <= '9') return 31 + (c - '0');
  if (c == ' ') return kSpace;
  if (c == '\'') return kApostrophe;
  throw ContractError(std::string("vocab: unsupported character '") + c + "'");
}

std::vector<int> Vocab::encode(const std::string& text) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(encode_char(c));
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (id == kSpace)
      out.push_back(' ');
    else if (id == kApostrophe)
      out.push_back('\'');
    else if (id >= 5 && id < 31)
      out.push_back(static_cast<char>('a' + (id - 5)));
    else if (id >= 31 && id < kSize)
      out.push_back(static_cast<char>('0' + (id - 31)));
    else
      throw ContractError("vocab: id " + std::to_string(id) + " out of range");
  }
  return out;
}

// ---------------------------------------------------------------------------

MSRModel::MSRModel(const MSRConfig& cfg) : cfg_(cfg) {
  audio_in_ = std::make_unique<nn::Conv1dLayer>(cfg.mel_bins, cfg.width, 1,
                                                nn::ConvSpec{});
  a_rn1_ = std::make_unique<ResNet1DBlock>(cfg.width, cfg.width, cfg.conv_kernel, 2);
  a_enc1_ = std::make_unique<EleAttGRU>(cfg.width, cfg.units);
  a_rn2_ = std::make_unique<ResNet1DBlock>(cfg.units, cfg.units, cfg.conv_kernel, 2);
  a_enc2_ = std::make_unique<EleAttGRU>(cfg.units, cfg.units);
  v_enc_ = std::make_unique<EleAttGRUStack>(2, cfg.visual_dim, cfg.units);
  embed_ = std::make_unique<nn::Embedding>(Vocab::kSize, cfg.embed_dim);
  dec_audio_ = std::make_unique<EleAttGRU>(cfg.embed_dim + cfg.units, cfg.units);
  dec_video_ = std::make_unique<EleAttGRU>(cfg.embed_dim + cfg.units, cfg.units);
  dec_fusion_ = std::make_unique<EleAttGRU>(2 * cfg.units, cfg.units);
  enc_drop_ = std::make_unique<nn::Dropout>(cfg.dropout_p);
  dec_drop_ = std::make_unique<nn::Dropout>(cfg.dropout_p);
  out_proj_ = std::make_unique<nn::Linear>(cfg.units, Vocab::kSize);

  register_module("audio_in", *audio_in_);
  register_module("audio_rn1", *a_rn1_);
  register_module("audio_enc1", *a_enc1_);
  register_module("audio_rn2", *a_rn2_);
  register_module("audio_enc2", *a_enc2_);
  register_module("video_enc", *v_enc_);
  register_module("embed", *embed_);
  register_module("dec_audio", *dec_audio_);
  register_module("dec_video", *dec_video_);
  register_module("dec_fusion", *dec_fusion_);
  register_module("enc_drop", *enc_drop_);
  register_module("dec_drop", *dec_drop_);
  register_module("out_proj", *out_proj_);
}

Tensor MSRModel::encode_audio(const Tensor& mel) {
  if (mel.ndim() != 2 || mel.dim(1) != cfg_.mel_bins)
    throw ShapeError("msr: magnitudes must be [4T," + std::to_string(cfg_.mel_bins) +
                     "], got " + shape_str(mel.shape()));
  if (mel.dim(0) % 4 != 0)
    throw ShapeError("msr: audio frame count " + std::to_string(mel.dim(0)) +
                     " is not a multiple of 4");
  Tensor x = audio_in_->forward(ops::transpose2d(ops::scale(mel, cfg_.mel_gain)));
  x = a_rn1_->forward(x);                                // [W,2T]
  Tensor seq = a_enc1_->run(ops::transpose2d(x));        // [2T,U]
  x = a_rn2_->forward(ops::transpose2d(seq));            // [U,T]
  seq = a_enc2_->run(ops::transpose2d(x));               // [T,U]
  return enc_drop_->forward(seq);
}

Tensor MSRModel::encode_video(const Tensor& feats) {
  if (feats.ndim() != 2 || feats.dim(1) != cfg_.visual_dim)
    throw ShapeError("msr: features must be [T," + std::to_string(cfg_.visual_dim) +
                     "], got " + shape_str(feats.shape()));
  return enc_drop_->forward(v_enc_->run(feats));
}

struct MSRModel::DecoderState {
  Tensor s_audio, s_video, s_fusion;  // [1,U] each
  Tensor c_audio, c_video;            // previous context vectors
};

namespace {

Tensor attend(const Tensor& state, const Tensor& memory) {
  Tensor scores = ops::matmul(state, ops::transpose2d(memory));  // [1,T]
  return ops::matmul(ops::softmax(scores), memory);              // [1,U]
}

}  // namespace

Tensor MSRModel::decode_step(int prev_token, DecoderState& st, const Tensor& a_mem,
                             const Tensor& v_mem) {
  Tensor e = embed_->forward({prev_token});  // [1,E]
  if (a_mem.defined()) {
    st.s_audio = dec_audio_->step(ops::concat({e, st.c_audio}, 1), st.s_audio);
    st.c_audio = attend(st.s_audio, a_mem);
  }
  if (v_mem.defined()) {
    st.s_video = dec_video_->step(ops::concat({e, st.c_video}, 1), st.s_video);
    st.c_video = attend(st.s_video, v_mem);
  }
  st.s_fusion =
      dec_fusion_->step(ops::concat({st.c_audio, st.c_video}, 1), st.s_fusion);
  return out_proj_->forward(dec_drop_->forward(st.s_fusion));  // [1,41]
}

void MSRModel::check_modalities(const Tensor& mel, const Tensor& v_feats) const {
  if (!mel.defined() && !v_feats.defined())
    throw ContractError("msr: at least one modality must be present");
  if (mel.defined() && v_feats.defined() && mel.dim(0) != 4 * v_feats.dim(0))
    throw ShapeError("msr: audio frames " + std::to_string(mel.dim(0)) +
                     " misaligned with video frames " + std::to_string(v_feats.dim(0)));
}

Tensor MSRModel::forward_teacher(const Tensor& mel, const Tensor& v_feats,
                                 const std::vector<int>& target_ids) {
  check_modalities(mel, v_feats);
  Tensor a_mem = mel.defined() ? encode_audio(mel) : Tensor();
  Tensor v_mem = v_feats.defined() ? encode_video(v_feats) : Tensor();

  DecoderState st;
  st.s_audio = Tensor::zeros({1, cfg_.units});
  st.s_video = Tensor::zeros({1, cfg_.units});
  st.s_fusion = Tensor::zeros({1, cfg_.units});
  st.c_audio = Tensor::zeros({1, cfg_.units});
  st.c_video = Tensor::zeros({1, cfg_.units});

  std::vector<Tensor> rows;
  rows.reserve(target_ids.size() + 1);
  int prev = Vocab::kBos;
  for (size_t i = 0; i <= target_ids.size(); ++i) {
    rows.push_back(decode_step(prev, st, a_mem, v_mem));
    if (i < target_ids.size()) prev = target_ids[i];
  }
  return ops::stack_rows(rows);  // predicts target_ids then EOS
}

TokenSequence MSRModel::decode_greedy(const Tensor& mel, const Tensor& v_feats,
                                      int max_len) {
  check_modalities(mel, v_feats);
  NoGradGuard no_grad;
  Tensor a_mem = mel.defined() ? encode_audio(mel) : Tensor();
  Tensor v_mem = v_feats.defined() ? encode_video(v_feats) : Tensor();

  DecoderState st;
  st.s_audio = Tensor::zeros({1, cfg_.units});
  st.s_video = Tensor::zeros({1, cfg_.units});
  st.s_fusion = Tensor::zeros({1, cfg_.units});
  st.c_audio = Tensor::zeros({1, cfg_.units});
  st.c_video = Tensor::zeros({1, cfg_.units});

  TokenSequence out;
  int prev = Vocab::kBos;
  for (int step = 0; step < max_len; ++step) {
    Tensor logits = decode_step(prev, st, a_mem, v_mem);
    int best = 0;
    double best_v = logits.data()[0];
    for (int j = 1; j < Vocab::kSize; ++j)
      if (logits.data()[j] > best_v) {
        best_v = logits.data()[j];
        best = j;
      }
    if (best == Vocab::kEos) break;
    out.ids.push_back(best);
    prev = best;
  }
  return out;
}

// ---------------------------------------------------------------------------

double msr_train_step(const std::vector<MSRTrainSample>& batch, MSRModel& model,
                      nn::Adam& optimizer, int curriculum_len) {
  std::vector<const MSRTrainSample*> active;
  for (const MSRTrainSample& s : batch)
    if (s.n_words <= curriculum_len) active.push_back(&s);
  if (active.empty())
    throw SchedulingError("curriculum stage " + std::to_string(curriculum_len) +
                          " filtered out the whole batch");

  optimizer.zero_grad();
  Tensor total;
  for (const MSRTrainSample* s : active) {
    Tensor logits = model.forward_teacher(s->mel, s->v_feats, s->target_ids);
    std::vector<int> wanted = s->target_ids;
    wanted.push_back(Vocab::kEos);
    Tensor loss = ops::cross_entropy(logits, wanted, model.config().label_smoothing,
                                     Vocab::kPad);
    total = total.defined() ? ops::add(total, loss) : loss;
  }
  total = ops::scale(total, 1.0 / static_cast<double>(active.size()));
  const double value = total.item();
  if (!std::isfinite(value))
    throw DivergenceError("msr training diverged: loss=" + std::to_string(value));
  total.backward();
  optimizer.step();
  return value;
}

Mode parse_mode(const std::string& name) {
  if (name == "A" || name == "a") return Mode::kA;
  if (name == "V" || name == "v") return Mode::kV;
  if (name == "AV" || name == "av") return Mode::kAV;
  if (name == "VA" || name == "va") return Mode::kVA;
  if (name == "VAV" || name == "vav") return Mode::kVAV;
  throw ConfigError("unknown mode '" + name + "' (expected A, V, AV, VA or VAV)");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kA: return "A";
    case Mode::kV: return "V";
    case Mode::kAV: return "AV";
    case Mode::kVA: return "VA";
    case Mode::kVAV: return "VAV";
  }
  return "?";
}

bool mode_uses_enhancement(Mode mode) {
  return mode == Mode::kVA || mode == Mode::kVAV;
}

TokenSequence run_mode(Mode mode, const Tensor& noisy_mel, const Tensor& v_feats,
                       AEModel* ae, MSRModel& msr, int max_len) {
  if (mode_uses_enhancement(mode) && ae == nullptr)
    throw ConfigError("mode " + mode_name(mode) + " requires an enhancement model");
  if (mode != Mode::kV && !noisy_mel.defined())
    throw ContractError("mode " + mode_name(mode) + " requires audio input");
  if (mode != Mode::kA && !v_feats.defined())
    throw ContractError("mode " + mode_name(mode) + " requires video input");

  switch (mode) {
    case Mode::kA:
      return msr.decode_greedy(noisy_mel, Tensor(), max_len);
    case Mode::kV:
      return msr.decode_greedy(Tensor(), v_feats, max_len);
    case Mode::kAV:
      return msr.decode_greedy(noisy_mel, v_feats, max_len);
    case Mode::kVA:
    case Mode::kVAV: {
      NoGradGuard no_grad;
      Tensor enhanced = ae->forward(v_feats, noisy_mel).enhanced;
      return msr.decode_greedy(enhanced, mode == Mode::kVAV ? v_feats : Tensor(),
                               max_len);
    }
  }
  throw ContractError("unreachable mode");
}

}  // namespace avsr
