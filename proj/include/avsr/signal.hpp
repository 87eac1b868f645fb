// SPDX-License-Identifier: Apache-2.0
//
// Waveform ingestion and the audio feature pipeline: STFT magnitudes on a
// 40 ms / 10 ms grid, mel filtering to 80 bins over 0-8 kHz, babble noise
// synthesis and SNR-controlled mixing.

#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "avsr/tensor.hpp"

namespace avsr::signal {

inline constexpr int kSampleRate = 16000;
inline constexpr int kWinSamples = 640;  // 40 ms
inline constexpr int kHopSamples = 160;  // 10 ms
inline constexpr int kMelBins = 80;
inline constexpr double kMelLoHz = 0.0;
inline constexpr double kMelHiHz = 8000.0;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double rms() const;
  void validate() const;  // 16 kHz, finite samples
};

// 16-bit PCM mono RIFF at 16 kHz.
Waveform load_wav(const std::filesystem::path& path);
void save_wav(const std::filesystem::path& path, const Waveform& w);

// Mel-scale magnitude spectrogram, time-major [frames, mel_bins].
struct MagnitudeSpectrogram {
  Tensor mag;

  int64_t frames() const { return mag.dim(0); }
  int64_t bins() const { return mag.dim(1); }
};

struct NoiseSpec {
  std::vector<double> snr_levels_db{-10.0, -5.0, 0.0, 5.0, 10.0};
  double p_n = 0.25;
  int n_sources = 30;

  void validate() const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel filterbank [n_bins, n_fft/2 + 1].
Tensor mel_filterbank(int n_bins = kMelBins, double f_lo = kMelLoHz,
                      double f_hi = kMelHiHz, int n_fft = kWinSamples,
                      int sample_rate = kSampleRate);
std::vector<double> mel_center_frequencies(int n_bins, double f_lo, double f_hi);

// Hann-windowed, reflect-centred STFT magnitudes through the mel filterbank.
// Yields ceil(len / hop) frames.
MagnitudeSpectrogram stft_mel(const Waveform& w);
// As above, then trimmed/zero-padded to exactly 4*video_frames rows.
MagnitudeSpectrogram stft_mel_aligned(const Waveform& w, int64_t video_frames);

// Sum of n randomly offset source segments, normalized to unit RMS.
Waveform synth_babble(const std::vector<Waveform>& sources, int64_t len,
                      std::mt19937_64& rng, int n_sources = 30);

// Scales noise so that 10*log10(P_clean / P_noise_scaled) == snr_db.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

}  // namespace avsr::signal
