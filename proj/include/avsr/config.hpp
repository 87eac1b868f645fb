// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: plain-text `key = value` files with dotted keys and
// '#' comments. CLI flags override file values; AVSR_DATA_ROOT supplies the
// corpus location when neither does.

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "avsr/corpus.hpp"
#include "avsr/signal.hpp"

namespace avsr {

struct RunConfig {
  uint64_t seed = 42;
  std::filesystem::path data_root;  // corpus directory
  std::filesystem::path run_dir;    // checkpoints, feature cache, reports

  corpus::CorpusSpec corpus;
  signal::NoiseSpec noise;

  // visual front-end
  double frontend_width_mult = 0.125;
  std::array<int, 4> frontend_blocks{1, 1, 1, 1};
  int frontend_steps = 200;
  int frontend_batch = 4;
  double frontend_lr = 1e-3;

  // audio enhancement
  std::string ae_unit = "tcn";  // tcn | 1drn
  // optional explicit stream layer tables; empty means the preset for
  // ae_unit at the widths below
  std::string ae_video_stream;
  std::string ae_audio_stream;
  int64_t ae_width = 64;
  int64_t ae_out_width = 48;
  int64_t ae_gru_units = 64;
  int64_t ae_fc_width = 80;
  double ae_mel_gain = 0.2;
  int ae_steps = 600;
  int ae_batch = 4;
  double ae_lr = 2e-3;

  // recognizer
  int64_t msr_width = 64;
  int64_t msr_units = 64;
  int64_t msr_embed = 16;
  double msr_mel_gain = 0.2;
  double msr_dropout = 0.1;
  double msr_label_smoothing = 0.1;
  int msr_steps = 1600;
  int msr_batch = 8;
  double msr_lr = 2e-3;
  double p_audio_only = 0.2;  // modality dropout during MSR training
  double p_video_only = 0.2;

  // joint fine-tuning on enhanced audio with the enhancement net frozen
  int joint_steps = 400;
  double joint_lr = 1e-3;

  // learning-rate schedule: halve on plateau down to the floor
  double lr_floor = 5e-6;
  double lr_factor = 0.5;
  int lr_patience = 200;

  // curriculum: stage k admits samples with at most k words
  int curriculum_steps_per_stage = 400;

  // evaluation
  std::vector<std::string> eval_modes{"A", "V", "AV", "VA", "VAV"};
  std::vector<std::string> eval_snrs{"clean", "10", "5", "0", "-5", "-10"};
  int max_decode_len = 64;

  void validate() const;

  std::filesystem::path frontend_ckpt() const { return run_dir / "frontend.ckpt"; }
  std::filesystem::path ae_ckpt() const { return run_dir / ("ae_" + ae_unit + ".ckpt"); }
  std::filesystem::path msr_ckpt() const { return run_dir / "msr.ckpt"; }
  std::filesystem::path joint_ckpt() const { return run_dir / "msr_joint.ckpt"; }
  std::filesystem::path features_dir() const { return run_dir / "features"; }

  int64_t visual_dim() const;

  // Hashes of the shape-relevant settings, embedded in checkpoints and
  // checked on load.
  std::string frontend_hash() const;
  std::string ae_hash() const;
  std::string msr_hash() const;
};

// Parses a config file into `cfg`; unknown keys raise ConfigError.
void apply_config_file(const std::filesystem::path& path, RunConfig& cfg);
// Applies a single "key=value" override.
void apply_override(const std::string& key, const std::string& value, RunConfig& cfg);
// Fills data_root from AVSR_DATA_ROOT when unset.
void apply_env(RunConfig& cfg);

std::string config_summary(const RunConfig& cfg);

}  // namespace avsr
