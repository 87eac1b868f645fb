// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "avsr/error.hpp"
#include "avsr/metrics.hpp"
#include "avsr/signal.hpp"
#include "oracles.hpp"

using namespace avsr;
namespace fs = std::filesystem;

namespace {

signal::Waveform sine(double freq, double seconds, double amp = 0.3) {
  signal::Waveform w;
  const auto n = static_cast<size_t>(seconds * signal::kSampleRate);
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    w.samples[i] = amp * std::sin(2.0 * M_PI * freq * i / signal::kSampleRate);
  return w;
}

}  // namespace

TEST_SUITE("wav") {
  TEST_CASE("round trip at 16-bit resolution") {
    signal::Waveform w = sine(440.0, 0.25);
    const fs::path path = fs::temp_directory_path() / "avsr_test_tone.wav";
    signal::save_wav(path, w);
    signal::Waveform r = signal::load_wav(path);
    REQUIRE(r.samples.size() == w.samples.size());
    CHECK(r.sample_rate == 16000);
    for (size_t i = 0; i < r.samples.size(); i += 97)
      CHECK(std::abs(r.samples[i] - w.samples[i]) < 1.0 / 32000.0);
    fs::remove(path);
  }

  TEST_CASE("wrong sample rate is a format error") {
    signal::Waveform w;
    w.samples = {0.0, 0.1};
    w.sample_rate = 8000;
    CHECK_THROWS_AS(w.validate(), FormatError);
  }
}

TEST_SUITE("stft") {
  TEST_CASE("one second at 25 fps gives exactly 100 frames") {
    signal::Waveform w = sine(500.0, 1.0);
    REQUIRE(w.samples.size() == 16000);
    auto spec = signal::stft_mel(w);
    CHECK(spec.frames() == 100);
    CHECK(spec.bins() == 80);
    auto aligned = signal::stft_mel_aligned(w, 25);
    CHECK(aligned.frames() == 100);
  }

  TEST_CASE("all-zero waveform gives an all-zero spectrogram") {
    signal::Waveform w;
    w.samples.assign(16000, 0.0);
    auto spec = signal::stft_mel(w);
    for (double v : spec.mag.data()) CHECK(v == 0.0);
  }

  TEST_CASE("frame count contract for arbitrary T") {
    for (int t : {3, 7, 12}) {
      signal::Waveform w = sine(800.0, t * 0.04);
      auto spec = signal::stft_mel_aligned(w, t);
      CHECK(spec.frames() == 4 * t);
    }
  }

  TEST_CASE("magnitudes are non-negative") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    signal::Waveform w;
    w.samples.resize(8000);
    for (auto& s : w.samples) s = u(rng);
    auto spec = signal::stft_mel(w);
    for (double v : spec.mag.data()) CHECK(v >= 0.0);
  }

  TEST_CASE("1 kHz sine peaks at the mel bin nearest 1 kHz") {
    signal::Waveform w = sine(1000.0, 0.8);
    auto spec = signal::stft_mel(w);
    // column energies
    std::vector<double> col(80, 0.0);
    for (int64_t t = 0; t < spec.frames(); ++t)
      for (int64_t m = 0; m < 80; ++m) col[static_cast<size_t>(m)] += spec.mag.at({t, m});
    const int argmax = static_cast<int>(std::max_element(col.begin(), col.end()) - col.begin());

    // independent mel inversion: nearest center to 1 kHz
    const auto centers = signal::mel_center_frequencies(80, 0.0, 8000.0);
    int nearest = 0;
    for (int m = 1; m < 80; ++m)
      if (std::abs(centers[static_cast<size_t>(m)] - 1000.0) <
          std::abs(centers[static_cast<size_t>(nearest)] - 1000.0))
        nearest = m;
    CHECK(argmax == nearest);
  }
}

TEST_SUITE("mel filterbank") {
  TEST_CASE("default bank shape is [80, 321]") {
    Tensor fb = signal::mel_filterbank();
    CHECK(fb.dim(0) == 80);
    CHECK(fb.dim(1) == 321);
  }

  TEST_CASE("rows are non-negative and unimodal; centers increase") {
    Tensor fb = signal::mel_filterbank();
    for (int64_t m = 0; m < 80; ++m) {
      bool rising = true;
      double prev = -1.0;
      for (int64_t k = 0; k < 321; ++k) {
        const double v = fb.at({m, k});
        CHECK(v >= 0.0);
        if (v < prev - 1e-15) rising = false;
        if (!rising) CHECK(v <= prev + 1e-15);
        prev = v;
      }
    }
    const auto centers = signal::mel_center_frequencies(80, 0.0, 8000.0);
    for (size_t m = 1; m < centers.size(); ++m) CHECK(centers[m] > centers[m - 1]);
  }

  TEST_CASE("4-bin centers match the mel formula inversion within 1 Hz") {
    // independent script: mel(f) = 2595 log10(1 + f/700), inverted at the
    // four interior knots of a 6-point grid over [0, 8000]
    const double m_hi = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
    const auto centers = signal::mel_center_frequencies(4, 0.0, 8000.0);
    for (int i = 0; i < 4; ++i) {
      const double mel = m_hi * (i + 1) / 5.0;
      const double f = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
      CHECK(std::abs(centers[static_cast<size_t>(i)] - f) < 1.0);
    }
  }

  TEST_CASE("bins between the first and last centers have positive weight") {
    Tensor fb = signal::mel_filterbank();
    const auto centers = signal::mel_center_frequencies(80, 0.0, 8000.0);
    const double hz_per_bin = 16000.0 / 640.0;
    for (int k = 0; k < 321; ++k) {
      const double f = k * hz_per_bin;
      if (f <= centers.front() || f >= centers.back()) continue;
      double total = 0.0;
      for (int64_t m = 0; m < 80; ++m) total += fb.at({m, k});
      CHECK(total > 0.0);
    }
  }

  TEST_CASE("flat unit spectrum recovers filter row sums") {
    Tensor fb = signal::mel_filterbank();
    std::vector<double> flat(321, 1.0);
    for (int64_t m = 0; m < 80; ++m) {
      double want = 0.0, got = 0.0;
      for (int64_t k = 0; k < 321; ++k) {
        want += fb.at({m, k});
        got += fb.at({m, k}) * flat[static_cast<size_t>(k)];
      }
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }

  TEST_CASE("configuration errors") {
    CHECK_THROWS_AS(signal::mel_filterbank(80, 0.0, 9000.0), ConfigError);
    CHECK_THROWS_AS(signal::mel_filterbank(400, 0.0, 8000.0), ConfigError);
  }
}

TEST_SUITE("babble") {
  TEST_CASE("30 copies of silence mix to silence") {
    std::vector<signal::Waveform> sources(30);
    for (auto& s : sources) s.samples.assign(4000, 0.0);
    std::mt19937_64 rng(1);
    signal::Waveform b = signal::synth_babble(sources, 2000, rng);
    for (double v : b.samples) CHECK(v == 0.0);
  }

  TEST_CASE("fewer than 30 sources is a configuration error") {
    std::vector<signal::Waveform> sources(10);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(signal::synth_babble(sources, 1000, rng), ConfigError);
  }

  TEST_CASE("output has unit rms") {
    std::vector<signal::Waveform> sources;
    for (int i = 0; i < 30; ++i) sources.push_back(sine(200.0 + 40.0 * i, 0.3));
    std::mt19937_64 rng(7);
    signal::Waveform b = signal::synth_babble(sources, 4800, rng);
    CHECK(std::abs(b.rms() - 1.0) < 1e-9);
  }

  TEST_CASE("mix of distinct sines matches a direct summation script") {
    std::vector<signal::Waveform> sources;
    for (int i = 0; i < 30; ++i) sources.push_back(sine(100.0 + 60.0 * i, 0.5, 1.0));
    const int64_t len = 3200;
    std::mt19937_64 rng(42);
    signal::Waveform got = signal::synth_babble(sources, len, rng);

    // replay the same offsets with the same generator sequence
    std::mt19937_64 rng2(42);
    std::vector<double> direct(static_cast<size_t>(len), 0.0);
    std::uniform_int_distribution<size_t> pick(0, sources.size() - 1);
    for (int s = 0; s < 30; ++s) {
      const auto& src = sources[pick(rng2)];
      std::uniform_int_distribution<int64_t> off_dist(0, static_cast<int64_t>(src.samples.size()) - 1);
      const int64_t off = off_dist(rng2);
      for (int64_t i = 0; i < len; ++i)
        direct[static_cast<size_t>(i)] +=
            src.samples[static_cast<size_t>((off + i) % src.samples.size())];
    }
    double p = 0.0;
    for (double v : direct) p += v * v;
    const double rms = std::sqrt(p / len);
    for (int64_t i = 0; i < len; i += 13)
      CHECK(got.samples[static_cast<size_t>(i)] ==
            doctest::Approx(direct[static_cast<size_t>(i)] / rms).epsilon(1e-9));
  }
}

TEST_SUITE("snr mixing") {
  TEST_CASE("equal power at 0 dB keeps the noise unscaled") {
    signal::Waveform clean = sine(400.0, 0.2, 0.5);
    signal::Waveform noise = sine(900.0, 0.2, 0.5);
    // make powers exactly equal
    double pc = 0, pn = 0;
    for (double v : clean.samples) pc += v * v;
    for (double v : noise.samples) pn += v * v;
    for (double& v : noise.samples) v *= std::sqrt(pc / pn);
    signal::Waveform mixed = signal::mix_at_snr(clean, noise, 0.0);
    for (size_t i = 0; i < mixed.samples.size(); i += 31)
      CHECK(mixed.samples[i] == doctest::Approx(clean.samples[i] + noise.samples[i]).epsilon(1e-12));
  }

  TEST_CASE("20 dB with equal powers scales noise by 0.1") {
    signal::Waveform clean = sine(400.0, 0.1, 0.5);
    signal::Waveform noise = clean;
    signal::Waveform mixed = signal::mix_at_snr(clean, noise, 20.0);
    for (size_t i = 0; i < mixed.samples.size(); i += 17)
      CHECK(mixed.samples[i] == doctest::Approx(clean.samples[i] * 1.1).epsilon(1e-12));
  }

  TEST_CASE("requested snr is realized exactly") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    signal::Waveform clean = sine(600.0, 0.2, 0.7);
    signal::Waveform noise;
    noise.samples.resize(clean.samples.size());
    for (auto& v : noise.samples) v = 0.2 * u(rng);
    for (double target : {-10.0, -5.0, 0.0, 5.0, 10.0}) {
      signal::Waveform mixed = signal::mix_at_snr(clean, noise, target);
      double pn = 0, pc = 0;
      for (size_t i = 0; i < mixed.samples.size(); ++i) {
        const double n = mixed.samples[i] - clean.samples[i];
        pn += n * n;
        pc += clean.samples[i] * clean.samples[i];
      }
      CHECK(10.0 * std::log10(pc / pn) == doctest::Approx(target).epsilon(1e-9));
    }
  }

  TEST_CASE("homogeneity: scaling both inputs scales the mix") {
    signal::Waveform clean = sine(500.0, 0.1, 0.4);
    signal::Waveform noise = sine(1300.0, 0.1, 0.2);
    signal::Waveform m1 = signal::mix_at_snr(clean, noise, 5.0);
    for (double& v : clean.samples) v *= 3.0;
    for (double& v : noise.samples) v *= 3.0;
    signal::Waveform m3 = signal::mix_at_snr(clean, noise, 5.0);
    for (size_t i = 0; i < m1.samples.size(); i += 23)
      CHECK(m3.samples[i] == doctest::Approx(3.0 * m1.samples[i]).epsilon(1e-9));
  }

  TEST_CASE("degenerate inputs raise data errors") {
    signal::Waveform clean = sine(500.0, 0.1);
    signal::Waveform zeros;
    zeros.samples.assign(clean.samples.size(), 0.0);
    CHECK_THROWS_AS(signal::mix_at_snr(clean, zeros, 0.0), DataError);
    CHECK_THROWS_AS(signal::mix_at_snr(zeros, clean, 0.0), DataError);
    signal::Waveform shorter = clean;
    shorter.samples.pop_back();
    CHECK_THROWS_AS(signal::mix_at_snr(clean, shorter, 0.0), ShapeError);
  }
}

TEST_SUITE("wer") {
  TEST_CASE("identical sequences score zero") {
    auto b = metrics::wer({"a", "b", "c"}, {"a", "b", "c"});
    CHECK(b.substitutions == 0);
    CHECK(b.deletions == 0);
    CHECK(b.insertions == 0);
    CHECK(b.wer == 0.0);
  }

  TEST_CASE("spec example: one substitution and one insertion") {
    auto b = metrics::wer({"a", "b", "c"}, {"a", "x", "c", "d"});
    CHECK(b.substitutions == 1);
    CHECK(b.insertions == 1);
    CHECK(b.deletions == 0);
    CHECK(b.wer == doctest::Approx(2.0 / 3.0));
  }

  TEST_CASE("empty hypothesis deletes everything") {
    auto b = metrics::wer({"v", "w", "x", "y", "z"}, {});
    CHECK(b.deletions == 5);
    CHECK(b.wer == 1.0);
  }

  TEST_CASE("empty reference is a degenerate input") {
    CHECK_THROWS_AS(metrics::wer({}, {"a"}), DataError);
  }

  TEST_CASE("asymmetry of insertions and deletions") {
    auto fwd = metrics::wer({"a", "b"}, {"a"});
    auto rev = metrics::wer({"a"}, {"a", "b"});
    CHECK(fwd.deletions == 1);
    CHECK(fwd.insertions == 0);
    CHECK(rev.insertions == 1);
    CHECK(rev.deletions == 0);
    CHECK(fwd.wer != rev.wer);  // N differs
  }

  TEST_CASE("matches the exhaustive alignment oracle on random small pairs") {
    std::mt19937_64 rng(17);
    const std::vector<std::string> vocab{"aa", "bb", "cc", "dd", "ee"};
    std::uniform_int_distribution<int> len(0, 6), word(0, 4), ref_len(1, 6);
    for (int trial = 0; trial < 2000; ++trial) {
      std::vector<std::string> ref(static_cast<size_t>(ref_len(rng)));
      std::vector<std::string> hyp(static_cast<size_t>(len(rng)));
      for (auto& w : ref) w = vocab[static_cast<size_t>(word(rng))];
      for (auto& w : hyp) w = vocab[static_cast<size_t>(word(rng))];
      const auto breakdown = metrics::wer(ref, hyp);
      const int total = static_cast<int>(breakdown.substitutions + breakdown.deletions +
                                         breakdown.insertions);
      CHECK(total == oracles::min_edits_oracle(ref, hyp));
      CHECK(breakdown.substitutions + breakdown.deletions <=
            static_cast<int64_t>(ref.size()));
      CHECK(breakdown.wer == doctest::Approx(static_cast<double>(total) / ref.size()));
    }
  }

  TEST_CASE("tokenizer folds case and splits on whitespace") {
    const auto words = metrics::tokenize_words("  It's  BOLD\tcare\n");
    REQUIRE(words.size() == 3);
    CHECK(words[0] == "it's");
    CHECK(words[1] == "bold");
    CHECK(words[2] == "care");
  }
}

TEST_SUITE("word accuracy") {
  TEST_CASE("all and none") {
    CHECK(metrics::word_accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(metrics::word_accuracy({1, 2, 3}, {4, 5, 6}) == 0.0);
  }
  TEST_CASE("length mismatch is a contract error") {
    CHECK_THROWS_AS(metrics::word_accuracy({1}, {1, 2}), ContractError);
  }
}

TEST_SUITE("report table") {
  TEST_CASE("empty grid renders header only rows with dashes") {
    const std::string table = metrics::report_table({"A", "AV"}, {});
    CHECK(table.find("SNR") != std::string::npos);
    CHECK(table.find("clean") != std::string::npos);
    CHECK(table.find("-10") != std::string::npos);
  }

  TEST_CASE("cells render one decimal percent and rows are ordered") {
    metrics::ResultGrid grid;
    grid[{"AV", "0"}] = {0.25, 1};
    grid[{"VA", "0"}] = {0.125, 1};
    grid[{"VAV", "0"}] = {0.0625, 1};
    const std::string table = metrics::report_table({"AV", "VA", "VAV"}, grid);
    CHECK(table.find("25.0") != std::string::npos);
    CHECK(table.find("12.5") != std::string::npos);
    CHECK(table.find("6.2") != std::string::npos);  // 6.25 rounds to banker-free %.1f
    const auto clean_pos = table.find("clean");
    const auto ten = table.find("\n10");
    const auto minus10 = table.find("\n-10");
    CHECK(clean_pos < ten);
    CHECK(ten < minus10);
    const std::string csv = metrics::report_csv({"AV", "VA", "VAV"}, grid);
    CHECK(csv.find("snr_db,AV,VA,VAV") == 0);
  }
}
