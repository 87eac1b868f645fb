// SPDX-License-Identifier: Apache-2.0

#include "avsr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "avsr/error.hpp"
#include "avsr/frontend.hpp"

namespace avsr::corpus {

namespace fs = std::filesystem;

std::vector<std::string> CorpusSpec::default_lexicon() {
  return {"aid", "bold", "care", "dusk", "echo", "fern", "gulf", "hum", "it's", "jade"};
}

void CorpusSpec::validate() const {
  if (n_train < 1 || n_test < 0) throw ConfigError("corpus: bad sentence counts");
  if (min_words < 1 || max_words < min_words) throw ConfigError("corpus: bad word range");
  if (word_frames < 2 || gap_frames < 1) throw ConfigError("corpus: bad frame layout");
  if (lexicon.empty()) throw ConfigError("corpus: empty lexicon");
  for (const auto& w : lexicon)
    for (char c : w)
      if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\''))
        throw ConfigError("corpus: lexicon word '" + w + "' leaves the vocabulary");
}

int64_t clip_frames(size_t n_words, const CorpusSpec& spec) {
  return spec.gap_frames +
         static_cast<int64_t>(n_words) * (spec.word_frames + spec.gap_frames);
}

// ---------------------------------------------------------------------------
// rendering

namespace {

constexpr int64_t kFrameSamples = signal::kSampleRate / 25;  // 640

double word_frequency(int word_id) { return 320.0 + 180.0 * word_id; }

}  // namespace

signal::Waveform render_audio(const std::vector<int>& word_ids, const CorpusSpec& spec) {
  const int64_t frames = clip_frames(word_ids.size(), spec);
  signal::Waveform w;
  w.samples.assign(static_cast<size_t>(frames * kFrameSamples), 0.0);
  int64_t frame = spec.gap_frames;
  for (int id : word_ids) {
    const int64_t start = frame * kFrameSamples;
    const int64_t len = spec.word_frames * kFrameSamples;
    const double f0 = word_frequency(id);
    for (int64_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / signal::kSampleRate;
      const double env = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / static_cast<double>(len));
      w.samples[static_cast<size_t>(start + i)] =
          0.35 * env *
          (std::sin(2.0 * M_PI * f0 * t) + 0.45 * std::sin(4.0 * M_PI * f0 * t));
    }
    frame += spec.word_frames + spec.gap_frames;
  }
  return w;
}

Tensor render_video(const std::vector<int>& word_ids, const CorpusSpec& spec) {
  const int64_t frames = clip_frames(word_ids.size(), spec);
  const int64_t hw = kClipSize * kClipSize;
  std::vector<double> px(static_cast<size_t>(frames * hw), 0.04);

  auto draw_rect = [&](int64_t frame, int64_t y0, int64_t y1, int64_t x0, int64_t x1,
                       double value) {
    y0 = std::max<int64_t>(0, y0);
    x0 = std::max<int64_t>(0, x0);
    y1 = std::min(kClipSize, y1);
    x1 = std::min(kClipSize, x1);
    for (int64_t y = y0; y < y1; ++y)
      for (int64_t x = x0; x < x1; ++x)
        px[static_cast<size_t>(frame * hw + y * kClipSize + x)] = value;
  };

  // Words map onto five visual identities (id mod 5): lip shapes are an
  // inexact cue, so distinct words may share the same appearance. Audio
  // alone separates all words; video alone cannot.
  int64_t frame = spec.gap_frames;
  for (int id : word_ids) {
    const int v = id % 5;
    for (int64_t k = 0; k < spec.word_frames; ++k) {
      const int64_t f = frame + k;
      // identity stripe: position and thickness encode the visual class
      const int64_t band = 6 + 16 * v;
      draw_rect(f, band, band + 3 + 2 * v, 8, kClipSize - 8, 0.85);
      // second cue: vertical bar whose position tracks the visual class
      const int64_t col = 96 - 14 * v;
      draw_rect(f, 60, 104, col, col + 3 + v, 0.7);
      // moving glyph: square orbiting at a class-specific radius and speed
      const double phase = 2.0 * M_PI * (v + 1) * k / (2.0 * spec.word_frames);
      const double radius = 14.0 + 2.5 * v;
      const int64_t cx = 34 + static_cast<int64_t>(std::llround(radius * std::cos(phase)));
      const int64_t cy = 34 + static_cast<int64_t>(std::llround(radius * std::sin(phase)));
      const int64_t half = 5 + (v % 3);
      draw_rect(f, cy - half, cy + half, cx - half, cx + half, 1.0);
    }
    frame += spec.word_frames + spec.gap_frames;
  }
  return Tensor::from_data({frames, kClipSize, kClipSize}, std::move(px));
}

// ---------------------------------------------------------------------------
// clip files

void save_clip(const fs::path& path, const Tensor& frames) {
  if (frames.ndim() != 3) throw ShapeError("clip tensor must be [T,H,W]");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write("AVSRVID1", 8);
  const uint32_t dims[3] = {static_cast<uint32_t>(frames.dim(0)),
                            static_cast<uint32_t>(frames.dim(1)),
                            static_cast<uint32_t>(frames.dim(2))};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  for (double v : frames.data()) {
    const float f = static_cast<float>(v);
    os.write(reinterpret_cast<const char*>(&f), sizeof(float));
  }
  if (!os) throw IoError("write failed for " + path.string());
}

namespace {

Tensor load_clip_tensor(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "AVSRVID1", 8) != 0)
    throw FormatError("not a clip tensor file: " + path.string());
  uint32_t dims[3];
  is.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!is) throw FormatError("clip tensor: truncated header");
  const int64_t n = static_cast<int64_t>(dims[0]) * dims[1] * dims[2];
  std::vector<float> raw(static_cast<size_t>(n));
  is.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw FormatError("clip tensor: truncated payload");
  std::vector<double> data(raw.begin(), raw.end());
  return Tensor::from_data({dims[0], dims[1], dims[2]}, std::move(data));
}

Tensor load_clip_pgm_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".pgm") files.push_back(e.path());
  if (files.empty()) throw FormatError("no .pgm frames in " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<double> data;
  int64_t h = 0, w = 0;
  for (const auto& f : files) {
    std::ifstream is(f, std::ios::binary);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw FormatError("pgm: only binary P5 supported: " + f.string());
    int64_t fw, fh, maxval;
    // skip comment lines between header fields
    auto next_int = [&is, &f]() {
      std::string tok;
      while (is >> tok) {
        if (tok[0] == '#') {
          std::string rest;
          std::getline(is, rest);
          continue;
        }
        return std::stoll(tok);
      }
      throw FormatError("pgm: truncated header in " + f.string());
    };
    fw = next_int();
    fh = next_int();
    maxval = next_int();
    if (maxval != 255) throw FormatError("pgm: only 8-bit frames supported");
    is.get();  // single whitespace after maxval
    if (h == 0) {
      h = fh;
      w = fw;
    } else if (fh != h || fw != w) {
      throw FormatError("pgm: inconsistent frame sizes in " + dir.string());
    }
    std::vector<unsigned char> raw(static_cast<size_t>(fw * fh));
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw FormatError("pgm: truncated pixel data in " + f.string());
    for (unsigned char p : raw) data.push_back(p / 255.0);
  }
  return Tensor::from_data({static_cast<int64_t>(files.size()), h, w}, std::move(data));
}

}  // namespace

Tensor load_clip(const fs::path& path) {
  if (fs::is_directory(path)) return load_clip_pgm_dir(path);
  return load_clip_tensor(path);
}

// ---------------------------------------------------------------------------
// generation

void generate(const fs::path& dir, const CorpusSpec& spec_in) {
  CorpusSpec spec = spec_in;
  if (spec.lexicon.empty()) spec.lexicon = CorpusSpec::default_lexicon();
  spec.validate();

  std::error_code ec;
  fs::create_directories(dir / "train", ec);
  fs::create_directories(dir / "test", ec);
  fs::create_directories(dir / "noise", ec);
  if (ec) throw IoError("cannot create corpus directories under " + dir.string());

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> n_words_dist(spec.min_words, spec.max_words);
  std::uniform_int_distribution<int> word_dist(0, static_cast<int>(spec.lexicon.size()) - 1);

  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw IoError("cannot write manifest under " + dir.string());

  auto emit = [&](const std::string& split, int index) {
    std::vector<int> ids(static_cast<size_t>(n_words_dist(rng)));
    for (auto& id : ids) id = word_dist(rng);
    // guarantee lexicon coverage early in the training split
    if (split == "train" && index < static_cast<int>(spec.lexicon.size()))
      ids[0] = index % static_cast<int>(spec.lexicon.size());

    std::string transcript;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (i) transcript += ' ';
      transcript += spec.lexicon[static_cast<size_t>(ids[i])];
    }

    char name[32];
    std::snprintf(name, sizeof(name), "%s_%04d", split.c_str(), index);
    const fs::path wav = dir / split / (std::string(name) + ".wav");
    const fs::path clip = dir / split / (std::string(name) + ".clip");
    const fs::path txt = dir / split / (std::string(name) + ".txt");

    signal::save_wav(wav, render_audio(ids, spec));
    save_clip(clip, render_video(ids, spec));
    std::ofstream(txt) << transcript << "\n";

    manifest << split << "\t" << name << "\t" << clip_frames(ids.size(), spec) << "\t"
             << ids.size() << "\t" << transcript << "\n";
  };

  for (int i = 0; i < spec.n_train; ++i) emit("train", i);
  for (int i = 0; i < spec.n_test; ++i) emit("test", i);

  // noise sources: longer word sequences, audio only
  std::uniform_int_distribution<int> noise_len(3, 6);
  for (int s = 0; s < spec.n_noise_sources; ++s) {
    std::vector<int> ids(static_cast<size_t>(noise_len(rng)));
    for (auto& id : ids) id = word_dist(rng);
    char name[32];
    std::snprintf(name, sizeof(name), "src_%03d.wav", s);
    signal::save_wav(dir / "noise" / name, render_audio(ids, spec));
  }
}

std::vector<ClipRecord> load_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.tsv");
  if (!is) throw IoError("cannot read manifest in " + dir.string() +
                         " (generate the corpus first)");
  std::vector<ClipRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ClipRecord rec;
    std::string t_str, n_str;
    if (!std::getline(ls, rec.split, '\t') || !std::getline(ls, rec.id, '\t') ||
        !std::getline(ls, t_str, '\t') || !std::getline(ls, n_str, '\t') ||
        !std::getline(ls, rec.transcript))
      throw FormatError("manifest: malformed line '" + line + "'");
    rec.t_frames = std::stoll(t_str);
    rec.n_words = std::stoi(n_str);
    rec.wav_path = dir / rec.split / (rec.id + ".wav");
    rec.clip_path = dir / rec.split / (rec.id + ".clip");
    rec.txt_path = dir / rec.split / (rec.id + ".txt");
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw FormatError("manifest: no records in " + dir.string());
  return out;
}

std::vector<signal::Waveform> load_noise_sources(const fs::path& dir) {
  std::vector<fs::path> files;
  const fs::path noise_dir = dir / "noise";
  if (!fs::is_directory(noise_dir))
    throw IoError("no noise directory under " + dir.string());
  for (const auto& e : fs::directory_iterator(noise_dir))
    if (e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<signal::Waveform> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(signal::load_wav(f));
  return out;
}

}  // namespace avsr::corpus
