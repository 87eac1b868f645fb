// SPDX-License-Identifier: Apache-2.0
//
// Synthetic audio-visual corpus: each word of a small lexicon is rendered
// as a distinctive tone pattern in the waveform and a moving glyph in the
// 112x112 frame sequence, so the two modalities carry correlated evidence.
// Babble noise sources are word sequences from the same lexicon.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "avsr/signal.hpp"
#include "avsr/tensor.hpp"

namespace avsr::corpus {

struct CorpusSpec {
  int n_train = 20;
  int n_test = 10;
  int min_words = 1;
  int max_words = 3;
  int word_frames = 8;  // video frames per word at 25 fps
  int gap_frames = 2;   // silent frames between words and at both ends
  int n_noise_sources = 30;
  uint64_t seed = 42;
  std::vector<std::string> lexicon;

  static std::vector<std::string> default_lexicon();
  void validate() const;
};

struct ClipRecord {
  std::string split;  // "train" | "test"
  std::string id;
  int64_t t_frames = 0;
  int n_words = 0;
  std::string transcript;
  std::filesystem::path wav_path;
  std::filesystem::path clip_path;
  std::filesystem::path txt_path;
};

// Renders one word sequence; exposed for tests and corpus generation.
signal::Waveform render_audio(const std::vector<int>& word_ids, const CorpusSpec& spec);
Tensor render_video(const std::vector<int>& word_ids, const CorpusSpec& spec);
int64_t clip_frames(size_t n_words, const CorpusSpec& spec);

// Writes train/, test/, noise/ and manifest.tsv under dir. Deterministic
// for a fixed spec (byte-identical files).
void generate(const std::filesystem::path& dir, const CorpusSpec& spec);

std::vector<ClipRecord> load_manifest(const std::filesystem::path& dir);
std::vector<signal::Waveform> load_noise_sources(const std::filesystem::path& dir);

// Raw clip tensor file: magic "AVSRVID1", u32 T,H,W, f32 payload (row-major,
// little-endian). load_clip also accepts a directory of 8-bit P5 PGM frames.
void save_clip(const std::filesystem::path& path, const Tensor& frames);
Tensor load_clip(const std::filesystem::path& path);

}  // namespace avsr::corpus
