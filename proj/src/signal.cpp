// SPDX-License-Identifier: Apache-2.0

#include "avsr/signal.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include "avsr/error.hpp"
#include "avsr/kernels.hpp"

namespace avsr::signal {

double Waveform::rms() const {
  if (samples.empty()) return 0.0;
  double s = 0.0;
  for (double x : samples) s += x * x;
  return std::sqrt(s / static_cast<double>(samples.size()));
}

void Waveform::validate() const {
  if (sample_rate != kSampleRate)
    throw FormatError("waveform sample rate " + std::to_string(sample_rate) +
                      " != " + std::to_string(kSampleRate));
  for (double x : samples)
    if (!std::isfinite(x)) throw DataError("waveform contains non-finite samples");
}

void NoiseSpec::validate() const {
  if (p_n < 0.0 || p_n > 1.0) throw ConfigError("noise: p_n must lie in [0,1]");
  if (n_sources < 1) throw ConfigError("noise: n_sources must be positive");
  if (snr_levels_db.empty()) throw ConfigError("noise: no SNR levels");
}

// ---------------------------------------------------------------------------
// WAV I/O (16-bit PCM mono RIFF)

namespace {

template <typename T>
T read_le(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("wav: truncated file");
  return v;
}

template <typename T>
void write_le(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0) throw FormatError("wav: missing RIFF header");
  read_le<uint32_t>(is);  // chunk size
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0) throw FormatError("wav: not a WAVE file");

  uint16_t channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  Waveform w;
  while (is.read(tag, 4)) {
    const auto size = read_le<uint32_t>(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const auto fmt = read_le<uint16_t>(is);
      channels = read_le<uint16_t>(is);
      rate = read_le<uint32_t>(is);
      read_le<uint32_t>(is);  // byte rate
      read_le<uint16_t>(is);  // block align
      bits = read_le<uint16_t>(is);
      if (size > 16) is.seekg(size - 16, std::ios::cur);
      if (fmt != 1) throw FormatError("wav: only PCM supported");
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("wav: data before fmt chunk");
      if (channels != 1 || bits != 16 || rate != kSampleRate)
        throw FormatError("wav: expected 16-bit mono 16 kHz, got " +
                          std::to_string(bits) + "-bit " + std::to_string(channels) +
                          "ch " + std::to_string(rate) + " Hz");
      const size_t n = size / 2;
      std::vector<int16_t> raw(n);
      is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
      if (!is) throw FormatError("wav: truncated data chunk");
      w.samples.resize(n);
      for (size_t i = 0; i < n; ++i) w.samples[i] = raw[i] / 32768.0;
      w.sample_rate = static_cast<int>(rate);
      return w;
    } else {
      is.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw FormatError("wav: no data chunk in " + path.string());
}

void save_wav(const std::filesystem::path& path, const Waveform& w) {
  w.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  const uint32_t n = static_cast<uint32_t>(w.samples.size());
  const uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  write_le<uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_le<uint32_t>(os, 16);
  write_le<uint16_t>(os, 1);  // PCM
  write_le<uint16_t>(os, 1);  // mono
  write_le<uint32_t>(os, kSampleRate);
  write_le<uint32_t>(os, kSampleRate * 2);
  write_le<uint16_t>(os, 2);
  write_le<uint16_t>(os, 16);
  os.write("data", 4);
  write_le<uint32_t>(os, data_bytes);
  for (double x : w.samples) {
    double c = std::min(1.0, std::max(-1.0, x));
    const auto s = static_cast<int16_t>(std::lrint(c * 32767.0));
    write_le<int16_t>(os, s);
  }
  if (!os) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// mel filterbank

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_center_frequencies(int n_bins, double f_lo, double f_hi) {
  const double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
  std::vector<double> centers(static_cast<size_t>(n_bins));
  for (int m = 0; m < n_bins; ++m) {
    const double mel = m_lo + (m_hi - m_lo) * (m + 1) / static_cast<double>(n_bins + 1);
    centers[static_cast<size_t>(m)] = mel_to_hz(mel);
  }
  return centers;
}

Tensor mel_filterbank(int n_bins, double f_lo, double f_hi, int n_fft,
                      int sample_rate) {
  const int n_freq = n_fft / 2 + 1;
  if (f_hi > sample_rate / 2.0) throw ConfigError("mel: f_hi above Nyquist");
  if (f_lo < 0.0 || f_lo >= f_hi) throw ConfigError("mel: bad frequency range");
  if (n_bins < 1 || n_bins > n_freq)
    throw ConfigError("mel: bin count " + std::to_string(n_bins) +
                      " exceeds FFT bins " + std::to_string(n_freq));

  const double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
  std::vector<double> edges(static_cast<size_t>(n_bins) + 2);
  for (int m = 0; m < n_bins + 2; ++m)
    edges[static_cast<size_t>(m)] =
        mel_to_hz(m_lo + (m_hi - m_lo) * m / static_cast<double>(n_bins + 1));

  std::vector<double> fb(static_cast<size_t>(n_bins) * n_freq, 0.0);
  for (int m = 0; m < n_bins; ++m) {
    const double left = edges[static_cast<size_t>(m)];
    const double center = edges[static_cast<size_t>(m) + 1];
    const double right = edges[static_cast<size_t>(m) + 2];
    for (int k = 0; k < n_freq; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double wgt = 0.0;
      if (f > left && f < right)
        wgt = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
      fb[static_cast<size_t>(m) * n_freq + k] = std::max(0.0, wgt);
    }
  }
  return Tensor::from_data({n_bins, n_freq}, std::move(fb));
}

// ---------------------------------------------------------------------------
// STFT

namespace {

// FFTW plan creation is not thread-safe; execution on per-call buffers is.
class Rfft {
 public:
  explicit Rfft(int n) : n_(n) {
    std::lock_guard<std::mutex> lock(plan_mutex());
    in_ = fftw_alloc_real(static_cast<size_t>(n));
    out_ = fftw_alloc_complex(static_cast<size_t>(n / 2 + 1));
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~Rfft() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  Rfft(const Rfft&) = delete;
  Rfft& operator=(const Rfft&) = delete;

  // Writes |X_k| for k = 0..n/2 into mags.
  void magnitudes(const double* frame, double* mags) {
    std::memcpy(in_, frame, sizeof(double) * static_cast<size_t>(n_));
    fftw_execute(plan_);
    for (int k = 0; k <= n_ / 2; ++k)
      mags[k] = std::hypot(out_[k][0], out_[k][1]);
  }

 private:
  static std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
  }
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

double reflect_sample(const std::vector<double>& x, int64_t i) {
  const int64_t n = static_cast<int64_t>(x.size());
  if (n == 1) return x[0];
  // mirror without repeating the edge sample, folded into range
  const int64_t period = 2 * (n - 1);
  int64_t j = ((i % period) + period) % period;
  if (j >= n) j = period - j;
  return x[static_cast<size_t>(j)];
}

}  // namespace

MagnitudeSpectrogram stft_mel(const Waveform& w) {
  w.validate();
  if (w.samples.empty()) throw DataError("stft: empty waveform");
  const int64_t len = static_cast<int64_t>(w.samples.size());
  const int64_t n_frames = (len + kHopSamples - 1) / kHopSamples;
  const int n_freq = kWinSamples / 2 + 1;

  static std::vector<double> hann = [] {
    std::vector<double> h(kWinSamples);
    for (int i = 0; i < kWinSamples; ++i)
      h[static_cast<size_t>(i)] =
          0.5 - 0.5 * std::cos(2.0 * M_PI * i / static_cast<double>(kWinSamples));
    return h;
  }();

  thread_local Rfft fft(kWinSamples);
  std::vector<double> frame(kWinSamples);
  std::vector<double> spec(static_cast<size_t>(n_frames) * n_freq);
  for (int64_t t = 0; t < n_frames; ++t) {
    const int64_t start = t * kHopSamples - kWinSamples / 2;  // centred framing
    for (int i = 0; i < kWinSamples; ++i)
      frame[static_cast<size_t>(i)] =
          hann[static_cast<size_t>(i)] * reflect_sample(w.samples, start + i);
    fft.magnitudes(frame.data(), spec.data() + t * n_freq);
  }

  static Tensor fb_t = [n_freq] {
    Tensor fb = mel_filterbank();
    std::vector<double> ft(static_cast<size_t>(n_freq) * kMelBins);
    for (int m = 0; m < kMelBins; ++m)
      for (int k = 0; k < n_freq; ++k)
        ft[static_cast<size_t>(k) * kMelBins + m] = fb.data()[m * n_freq + k];
    return Tensor::from_data({n_freq, kMelBins}, std::move(ft));
  }();

  std::vector<double> mel(static_cast<size_t>(n_frames) * kMelBins);
  kernels::matmul(spec.data(), fb_t.data().data(), mel.data(), n_frames, n_freq, kMelBins);
  // triangle weights and magnitudes are non-negative; clamp away any -0
  for (auto& v : mel) v = std::max(0.0, v);
  return {Tensor::from_data({n_frames, kMelBins}, std::move(mel))};
}

MagnitudeSpectrogram stft_mel_aligned(const Waveform& w, int64_t video_frames) {
  if (video_frames < 1) throw DataError("stft: clip with no video frames");
  MagnitudeSpectrogram s = stft_mel(w);
  const int64_t want = 4 * video_frames;
  const int64_t have = s.frames();
  if (have == want) return s;
  std::vector<double> out(static_cast<size_t>(want) * kMelBins, 0.0);
  const int64_t copy = std::min(have, want);
  std::copy(s.mag.data().begin(), s.mag.data().begin() + copy * kMelBins, out.begin());
  return {Tensor::from_data({want, kMelBins}, std::move(out))};
}

// ---------------------------------------------------------------------------
// noise

Waveform synth_babble(const std::vector<Waveform>& sources, int64_t len,
                      std::mt19937_64& rng, int n_sources) {
  if (static_cast<int>(sources.size()) < n_sources)
    throw ConfigError("babble: need at least " + std::to_string(n_sources) +
                      " source clips, got " + std::to_string(sources.size()));
  if (len < 1) throw DataError("babble: empty target length");

  std::vector<double> mix(static_cast<size_t>(len), 0.0);
  std::uniform_int_distribution<size_t> pick(0, sources.size() - 1);
  for (int s = 0; s < n_sources; ++s) {
    const Waveform& src = sources[pick(rng)];
    if (src.samples.empty()) continue;
    const int64_t n = static_cast<int64_t>(src.samples.size());
    std::uniform_int_distribution<int64_t> off_dist(0, n - 1);
    const int64_t off = off_dist(rng);
    for (int64_t i = 0; i < len; ++i)
      mix[static_cast<size_t>(i)] += src.samples[static_cast<size_t>((off + i) % n)];
  }

  Waveform out{std::move(mix), kSampleRate};
  const double r = out.rms();
  if (r > 0.0)
    for (double& x : out.samples) x /= r;
  return out;
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  if (clean.samples.size() != noise.samples.size())
    throw ShapeError("mix_at_snr: length mismatch " +
                     std::to_string(clean.samples.size()) + " vs " +
                     std::to_string(noise.samples.size()));
  double pc = 0.0, pn = 0.0;
  for (double x : clean.samples) pc += x * x;
  for (double x : noise.samples) pn += x * x;
  if (pc == 0.0) throw DataError("mix_at_snr: clean signal has zero power");
  if (pn == 0.0) throw DataError("mix_at_snr: noise signal has zero power");
  const double scale = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
  Waveform out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(clean.samples.size());
  for (size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = clean.samples[i] + scale * noise.samples[i];
  return out;
}

}  // namespace avsr::signal
