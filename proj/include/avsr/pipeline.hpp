// SPDX-License-Identifier: Apache-2.0
//
// Training phases and evaluation on top of the synthetic corpus:
//   frontend  word-classification pretraining, then frozen feature caching
//   ae        enhancement training on babble-mixed audio (L1 on magnitudes)
//   msr       recognizer training: curriculum, teacher forcing, modality
//             dropout, noise augmentation, plateau-halved learning rate
//   joint     recognizer fine-tuning on enhanced audio, enhancement frozen

#pragma once

#include <functional>
#include <optional>
#include <ostream>

#include "avsr/ae_net.hpp"
#include "avsr/config.hpp"
#include "avsr/corpus.hpp"
#include "avsr/frontend.hpp"
#include "avsr/metrics.hpp"
#include "avsr/msr_net.hpp"

namespace avsr::pipeline {

struct LoadedClip {
  corpus::ClipRecord rec;
  signal::Waveform wav;
  Tensor clean_mel;  // [4T,F]
  Tensor feats;      // [T,D] cached front-end features; may be undefined
  std::vector<int> target_ids;
};

class DataContext {
 public:
  DataContext(const RunConfig& cfg, bool need_features);

  const std::vector<LoadedClip>& train() const { return train_; }
  const std::vector<LoadedClip>& test() const { return test_; }
  const std::vector<signal::Waveform>& noise_sources() const { return noise_; }

  // Babble-mixes the clip at snr_db and recomputes aligned magnitudes.
  Tensor noisy_mel(const LoadedClip& clip, double snr_db, std::mt19937_64& rng) const;

 private:
  const RunConfig& cfg_;
  std::vector<LoadedClip> train_, test_;
  std::vector<signal::Waveform> noise_;
};

using StepLog = std::function<void(int step, double loss, double lr)>;

void synth_corpus(const RunConfig& cfg);
void train_frontend(const RunConfig& cfg, StepLog log = nullptr);
void train_ae(const RunConfig& cfg, StepLog log = nullptr);
void train_msr(const RunConfig& cfg, StepLog log = nullptr);
void train_joint(const RunConfig& cfg, StepLog log = nullptr);
void train_phase(const std::string& phase, const RunConfig& cfg, StepLog log = nullptr);

// Deterministic per-(seed, clip, snr) noise draw.
std::mt19937_64 eval_noise_rng(const RunConfig& cfg, const std::string& clip_id,
                               const std::string& snr);

struct EvalOptions {
  std::vector<std::string> modes;
  std::vector<std::string> snrs;
  bool use_train_split = false;
};

metrics::ResultGrid evaluate(const RunConfig& cfg, const EvalOptions& opts,
                             std::ostream* log = nullptr);

// Single-utterance decode; snr empty means the waveform is used as-is.
std::string decode_utterance(const RunConfig& cfg, const std::string& mode,
                             const std::filesystem::path& wav_path,
                             const std::filesystem::path& clip_path,
                             const std::string& snr = "");

// Dumps clean/noisy/mask/enhanced magnitudes for one test clip.
void enhance_dump(const RunConfig& cfg, const std::string& clip_id,
                  const std::string& snr, const std::filesystem::path& out);

// Loaders shared with tests; throw ConfigError when prerequisites miss.
std::unique_ptr<WordClassifier> load_frontend(const RunConfig& cfg);
std::unique_ptr<AEModel> load_ae(const RunConfig& cfg);
std::unique_ptr<MSRModel> load_msr(const RunConfig& cfg, bool joint);

AEConfig make_ae_config(const RunConfig& cfg);
MSRConfig make_msr_config(const RunConfig& cfg);
P3DConfig make_p3d_config(const RunConfig& cfg);

}  // namespace avsr::pipeline
