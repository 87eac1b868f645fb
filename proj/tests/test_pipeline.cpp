// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "avsr/checkpoint.hpp"
#include "avsr/config.hpp"
#include "avsr/corpus.hpp"
#include "avsr/error.hpp"
#include "avsr/pipeline.hpp"

using namespace avsr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

corpus::CorpusSpec tiny_spec(uint64_t seed) {
  corpus::CorpusSpec spec;
  spec.n_train = 6;
  spec.n_test = 2;
  spec.min_words = 1;
  spec.max_words = 2;
  spec.word_frames = 4;
  spec.gap_frames = 1;
  spec.n_noise_sources = 30;
  spec.seed = seed;
  spec.lexicon = {"aid", "bold", "care"};
  return spec;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("generation is deterministic and counts match") {
    const fs::path dir1 = fresh_dir("avsr_corpus_a");
    const fs::path dir2 = fresh_dir("avsr_corpus_b");
    corpus::generate(dir1, tiny_spec(11));
    corpus::generate(dir2, tiny_spec(11));

    const auto recs1 = corpus::load_manifest(dir1);
    const auto recs2 = corpus::load_manifest(dir2);
    REQUIRE(recs1.size() == 8);
    int train_count = 0;
    for (const auto& r : recs1) train_count += r.split == "train";
    CHECK(train_count == 6);

    for (size_t i = 0; i < recs1.size(); ++i) {
      CHECK(file_bytes(recs1[i].wav_path) == file_bytes(recs2[i].wav_path));
      CHECK(file_bytes(recs1[i].clip_path) == file_bytes(recs2[i].clip_path));
      CHECK(recs1[i].transcript == recs2[i].transcript);
    }

    const fs::path dir3 = fresh_dir("avsr_corpus_c");
    corpus::generate(dir3, tiny_spec(12));
    const auto recs3 = corpus::load_manifest(dir3);
    bool all_same = true;
    for (size_t i = 0; i < recs1.size(); ++i)
      all_same &= file_bytes(recs1[i].wav_path) == file_bytes(recs3[i].wav_path);
    CHECK(!all_same);

    fs::remove_all(dir1);
    fs::remove_all(dir2);
    fs::remove_all(dir3);
  }

  TEST_CASE("transcripts stay inside the vocabulary") {
    const fs::path dir = fresh_dir("avsr_corpus_vocab");
    corpus::generate(dir, tiny_spec(21));
    for (const auto& rec : corpus::load_manifest(dir))
      CHECK_NOTHROW(Vocab::encode(rec.transcript));
    fs::remove_all(dir);
  }

  TEST_CASE("clip frame counts follow the layout formula") {
    const auto spec = tiny_spec(3);
    CHECK(corpus::clip_frames(1, spec) == 1 + (4 + 1));
    CHECK(corpus::clip_frames(2, spec) == 1 + 2 * (4 + 1));
    const fs::path dir = fresh_dir("avsr_corpus_frames");
    corpus::generate(dir, spec);
    for (const auto& rec : corpus::load_manifest(dir)) {
      Tensor frames = corpus::load_clip(rec.clip_path);
      CHECK(frames.dim(0) == rec.t_frames);
      const signal::Waveform wav = signal::load_wav(rec.wav_path);
      CHECK(static_cast<int64_t>(wav.samples.size()) == rec.t_frames * 640);
    }
    fs::remove_all(dir);
  }

  TEST_CASE("clip tensor round trip and pgm ingestion") {
    const fs::path dir = fresh_dir("avsr_clip_io");
    const auto spec = tiny_spec(5);
    Tensor frames = corpus::render_video({1, 0}, spec);
    corpus::save_clip(dir / "x.clip", frames);
    Tensor back = corpus::load_clip(dir / "x.clip");
    REQUIRE(back.shape() == frames.shape());
    for (int64_t i = 0; i < frames.numel(); ++i)
      CHECK(std::abs(back.data()[i] - frames.data()[i]) < 1e-6);  // f32 payload

    // write the same frames as 8-bit PGM files
    const fs::path pgm_dir = dir / "pgm";
    fs::create_directories(pgm_dir);
    const int64_t t = frames.dim(0), h = frames.dim(1), w = frames.dim(2);
    for (int64_t f = 0; f < t; ++f) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%03d.pgm", static_cast<int>(f));
      std::ofstream os(pgm_dir / name, std::ios::binary);
      os << "P5\n# synthetic frame\n" << w << " " << h << "\n255\n";
      for (int64_t i = 0; i < h * w; ++i) {
        const auto px = static_cast<unsigned char>(
            std::lround(frames.data()[f * h * w + i] * 255.0));
        os.put(static_cast<char>(px));
      }
    }
    Tensor from_pgm = corpus::load_clip(pgm_dir);
    REQUIRE(from_pgm.shape() == frames.shape());
    for (int64_t i = 0; i < frames.numel(); ++i)
      CHECK(std::abs(from_pgm.data()[i] - frames.data()[i]) < 1.0 / 254.0);

    CHECK_THROWS_AS(corpus::load_clip(dir / "missing.clip"), IoError);
    std::ofstream(dir / "bad.clip") << "junk";
    CHECK_THROWS_AS(corpus::load_clip(dir / "bad.clip"), FormatError);
    fs::remove_all(dir);
  }

  TEST_CASE("render_audio puts each word's energy in its own band") {
    const auto spec = tiny_spec(7);
    signal::Waveform w0 = corpus::render_audio({0}, spec);
    auto mel = signal::stft_mel(w0);
    double lo = 0.0, hi = 0.0;
    for (int64_t t = 0; t < mel.frames(); ++t) {
      for (int64_t m = 0; m < 20; ++m) lo += mel.mag.at({t, m});
      for (int64_t m = 40; m < 80; ++m) hi += mel.mag.at({t, m});
    }
    CHECK(lo > 10.0 * hi);  // word 0 is low-frequency
  }
}

TEST_SUITE("config") {
  TEST_CASE("file parsing, overrides and unknown keys") {
    const fs::path dir = fresh_dir("avsr_config");
    const fs::path file = dir / "run.cfg";
    std::ofstream(file) << "# comment\n"
                        << "seed = 9\n"
                        << "msr.units = 24\n"
                        << "noise.snr_levels = 0, 5\n"
                        << "corpus.lexicon = aid, bold\n";
    RunConfig cfg;
    apply_config_file(file, cfg);
    CHECK(cfg.seed == 9);
    CHECK(cfg.msr_units == 24);
    REQUIRE(cfg.noise.snr_levels_db.size() == 2);
    CHECK(cfg.noise.snr_levels_db[1] == 5.0);
    CHECK(cfg.corpus.lexicon == std::vector<std::string>{"aid", "bold"});

    apply_override("msr.units", "48", cfg);
    CHECK(cfg.msr_units == 48);
    CHECK_THROWS_AS(apply_override("bogus.key", "1", cfg), ConfigError);
    std::ofstream(file) << "not a key value line\n";
    CHECK_THROWS_AS(apply_config_file(file, cfg), ConfigError);
    fs::remove_all(dir);
  }

  TEST_CASE("env var fills the data root when unset") {
    RunConfig cfg;
    setenv("AVSR_DATA_ROOT", "/tmp/avsr_env_root", 1);
    apply_env(cfg);
    CHECK(cfg.data_root == fs::path("/tmp/avsr_env_root"));
    cfg.data_root = "/explicit";
    apply_env(cfg);
    CHECK(cfg.data_root == fs::path("/explicit"));
    unsetenv("AVSR_DATA_ROOT");
  }

  TEST_CASE("validation rejects out-of-range settings") {
    RunConfig cfg;
    cfg.corpus.lexicon = {"aid"};
    cfg.msr_dropout = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.msr_dropout = 0.1;
    cfg.noise.p_n = -0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.noise.p_n = 0.25;
    cfg.eval_modes = {"XY"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("stream layer tables come from the config when given") {
    RunConfig cfg;
    cfg.corpus.lexicon = corpus::CorpusSpec::default_lexicon();
    cfg.ae_unit = "tcn";
    cfg.ae_video_stream =
        "tcn|fc:12; tcn:12 k3 n2; up:12 k3 x2; tcn:12 k3 n2; up:12 k3 x2; fc:8";
    cfg.ae_audio_stream = "tcn|fc:12; tcn:12 k3 n2; fc:8";
    const AEConfig ae = pipeline::make_ae_config(cfg);
    CHECK(ae.video_stream.rows.size() == 6);
    CHECK(ae.video_stream.out_channels(1) == 8);
    CHECK(ae.audio_stream.rows.size() == 3);
    // the table echoes filters/K/S/P/Out with fractional strides marked
    const std::string table = ae.video_stream.table(1);
    CHECK(table.find("1/2") != std::string::npos);
    CHECK(table.find("4T") != std::string::npos);
    RunConfig other = cfg;
    other.ae_video_stream.clear();
    CHECK(other.ae_hash() != cfg.ae_hash());
  }

  TEST_CASE("config hashes react to model-shape settings") {
    RunConfig a;
    a.corpus.lexicon = corpus::CorpusSpec::default_lexicon();
    RunConfig b = a;
    CHECK(a.msr_hash() == b.msr_hash());
    b.msr_units = 128;
    CHECK(a.msr_hash() != b.msr_hash());
    b = a;
    b.ae_unit = "1drn";
    CHECK(a.ae_hash() != b.ae_hash());
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("full miniature run: corpus, phases, eval, reports") {
    const fs::path data = fresh_dir("avsr_pipe_data");
    const fs::path run = fresh_dir("avsr_pipe_run");

    RunConfig cfg;
    cfg.seed = 5;
    cfg.data_root = data;
    cfg.run_dir = run;
    cfg.corpus = tiny_spec(5);
    cfg.frontend_width_mult = 0.0625;
    cfg.frontend_steps = 20;
    cfg.frontend_batch = 2;
    cfg.frontend_lr = 3e-3;
    cfg.ae_unit = "tcn";
    cfg.ae_width = 16;
    cfg.ae_out_width = 12;
    cfg.ae_gru_units = 12;
    cfg.ae_fc_width = 16;
    cfg.ae_steps = 20;
    cfg.ae_batch = 2;
    cfg.msr_width = 16;
    cfg.msr_units = 16;
    cfg.msr_embed = 8;
    cfg.msr_steps = 30;
    cfg.msr_batch = 3;
    cfg.joint_steps = 8;
    cfg.noise.snr_levels_db = {0.0};
    cfg.curriculum_steps_per_stage = 10;
    cfg.validate();

    // phases require their prerequisites
    CHECK_THROWS_AS(pipeline::train_ae(cfg), IoError);  // no corpus yet
    pipeline::synth_corpus(cfg);
    CHECK_THROWS_AS(pipeline::train_ae(cfg), ConfigError);     // no features yet
    CHECK_THROWS_AS(pipeline::train_joint(cfg), ConfigError);  // no checkpoints

    pipeline::train_frontend(cfg);
    CHECK(fs::exists(cfg.frontend_ckpt()));
    const auto records = corpus::load_manifest(data);
    for (const auto& rec : records)
      CHECK(fs::exists(cfg.features_dir() / (rec.id + ".feat")));

    // frozen front-end: repeated extraction of the same clip is bit-identical
    {
      auto fe = pipeline::load_frontend(cfg);
      VideoClip clip{corpus::load_clip(records[0].clip_path)};
      NoGradGuard no_grad;
      Tensor f1 = fe->frontend().forward(clip);
      Tensor f2 = fe->frontend().forward(clip);
      for (int64_t i = 0; i < f1.numel(); ++i) CHECK(f1.data()[i] == f2.data()[i]);
    }

    pipeline::train_ae(cfg);
    CHECK(fs::exists(cfg.ae_ckpt()));
    pipeline::train_msr(cfg);
    CHECK(fs::exists(cfg.msr_ckpt()));

    // joint training must not touch the frozen enhancement weights
    auto ae_before = pipeline::load_ae(cfg);
    std::vector<double> norms_before;
    for (nn::Parameter* p : ae_before->parameters()) {
      double s = 0.0;
      for (double v : p->value.data()) s += v * v;
      norms_before.push_back(s);
    }
    pipeline::train_joint(cfg);
    CHECK(fs::exists(cfg.joint_ckpt()));
    auto ae_after = pipeline::load_ae(cfg);
    size_t i = 0;
    for (nn::Parameter* p : ae_after->parameters()) {
      double s = 0.0;
      for (double v : p->value.data()) s += v * v;
      CHECK(s == norms_before[i++]);
    }

    // checkpoint metadata carries phase and config hash
    auto meta = checkpoint::load_archive(cfg.msr_ckpt()).meta;
    CHECK(meta["phase"] == "msr");
    CHECK(meta["config_hash"] == cfg.msr_hash());

    // loading with an incompatible config is a version error
    {
      RunConfig other = cfg;
      other.msr_units = 20;
      CHECK_THROWS_AS(pipeline::load_msr(other, false), VersionError);
    }

    pipeline::EvalOptions opts;
    opts.modes = {"A", "V", "AV", "VA", "VAV"};
    opts.snrs = {"clean", "0"};
    const auto grid = pipeline::evaluate(cfg, opts);
    CHECK(grid.size() == 10);
    for (const auto& [key, cell] : grid) CHECK(cell.count == 2);  // 2 test clips

    // determinism: the same evaluation twice gives identical tables
    const auto grid2 = pipeline::evaluate(cfg, opts);
    CHECK(metrics::report_table(opts.modes, grid) ==
          metrics::report_table(opts.modes, grid2));

    // decode one utterance through the public entry point
    const std::string text = pipeline::decode_utterance(
        cfg, "AV", records[0].wav_path, records[0].clip_path);
    CHECK_NOTHROW(Vocab::encode(text));

    // enhancement dump carries the expected tensors
    const fs::path dump = run / "dump.ckpt";
    pipeline::enhance_dump(cfg, records.back().id, "0", dump);
    auto archive = checkpoint::load_archive(dump);
    CHECK(archive.tensors.count("mask") == 1);
    CHECK(archive.tensors.count("enhanced") == 1);
    CHECK(archive.tensors.count("noisy") == 1);
    const Tensor& mask = archive.tensors.at("mask");
    for (double v : mask.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }

    fs::remove_all(data);
    fs::remove_all(run);
  }
}
