// SPDX-License-Identifier: Apache-2.0

#include "avsr/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "avsr/checkpoint.hpp"
#include "avsr/error.hpp"

namespace avsr::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr int kLrWindow = 50;  // steps per plateau check

uint64_t mix_seed(uint64_t seed, const std::string& salt) {
  uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : salt) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

void require_run_dir(const RunConfig& cfg) {
  if (cfg.run_dir.empty()) throw ConfigError("run_dir is not set");
  std::error_code ec;
  fs::create_directories(cfg.run_dir, ec);
  if (ec) throw IoError("cannot create run dir " + cfg.run_dir.string());
}

nlohmann::json load_checked(const fs::path& path, nn::Module& model,
                            const std::string& want_hash, const std::string& what) {
  if (!fs::exists(path))
    throw ConfigError("missing prerequisite checkpoint for " + what + ": " +
                      path.string());
  nlohmann::json meta = checkpoint::load_model(path, model);
  if (meta.value("config_hash", "") != want_hash)
    throw VersionError(what + " checkpoint " + path.string() +
                       " is incompatible with the current configuration");
  return meta;
}

}  // namespace

P3DConfig make_p3d_config(const RunConfig& cfg) {
  P3DConfig p3d;
  p3d.width_mult = cfg.frontend_width_mult;
  p3d.blocks = cfg.frontend_blocks;
  return p3d;
}

AEConfig make_ae_config(const RunConfig& cfg) {
  AEConfig ae = AEConfig::preset(cfg.ae_unit, cfg.visual_dim(), cfg.ae_width,
                                 cfg.ae_out_width);
  if (!cfg.ae_video_stream.empty())
    ae.video_stream = StreamSpec::parse(cfg.ae_video_stream);
  if (!cfg.ae_audio_stream.empty())
    ae.audio_stream = StreamSpec::parse(cfg.ae_audio_stream);
  ae.gru_units = cfg.ae_gru_units;
  ae.fc_width = cfg.ae_fc_width;
  ae.mel_gain = cfg.ae_mel_gain;
  return ae;
}

MSRConfig make_msr_config(const RunConfig& cfg) {
  MSRConfig msr;
  msr.visual_dim = cfg.visual_dim();
  msr.width = cfg.msr_width;
  msr.units = cfg.msr_units;
  msr.embed_dim = cfg.msr_embed;
  msr.mel_gain = cfg.msr_mel_gain;
  msr.dropout_p = cfg.msr_dropout;
  msr.label_smoothing = cfg.msr_label_smoothing;
  return msr;
}

// ---------------------------------------------------------------------------
// data

DataContext::DataContext(const RunConfig& cfg, bool need_features) : cfg_(cfg) {
  const auto records = corpus::load_manifest(cfg.data_root);
  for (const auto& rec : records) {
    LoadedClip clip;
    clip.rec = rec;
    clip.wav = signal::load_wav(rec.wav_path);
    clip.clean_mel = signal::stft_mel_aligned(clip.wav, rec.t_frames).mag;
    clip.target_ids = Vocab::encode(rec.transcript);
    if (need_features) {
      const fs::path feat = cfg.features_dir() / (rec.id + ".feat");
      if (!fs::exists(feat))
        throw ConfigError("feature cache missing for clip " + rec.id +
                          "; run `train --phase frontend` first");
      clip.feats = checkpoint::load_tensor(feat, "feats");
      if (clip.feats.dim(0) != rec.t_frames)
        throw VersionError("feature cache for " + rec.id + " has " +
                           std::to_string(clip.feats.dim(0)) + " frames, clip has " +
                           std::to_string(rec.t_frames));
    }
    (rec.split == "train" ? train_ : test_).push_back(std::move(clip));
  }
  if (train_.empty()) throw DataError("corpus has no training clips");
  noise_ = corpus::load_noise_sources(cfg.data_root);
}

Tensor DataContext::noisy_mel(const LoadedClip& clip, double snr_db,
                              std::mt19937_64& rng) const {
  signal::Waveform babble = signal::synth_babble(
      noise_, static_cast<int64_t>(clip.wav.samples.size()), rng, cfg_.noise.n_sources);
  signal::Waveform mixed = signal::mix_at_snr(clip.wav, babble, snr_db);
  return signal::stft_mel_aligned(mixed, clip.rec.t_frames).mag;
}

// ---------------------------------------------------------------------------
// phases

void synth_corpus(const RunConfig& cfg) {
  if (cfg.data_root.empty()) throw ConfigError("data_root is not set");
  corpus::CorpusSpec spec = cfg.corpus;
  spec.seed = cfg.seed;
  if (spec.lexicon.empty()) spec.lexicon = corpus::CorpusSpec::default_lexicon();
  corpus::generate(cfg.data_root, spec);
}

void train_frontend(const RunConfig& cfg, StepLog log) {
  require_run_dir(cfg);
  nn::seed_all(mix_seed(cfg.seed, "frontend"));
  const auto records = corpus::load_manifest(cfg.data_root);

  corpus::CorpusSpec spec = cfg.corpus;
  if (spec.lexicon.empty()) spec.lexicon = corpus::CorpusSpec::default_lexicon();
  const int n_classes = static_cast<int>(spec.lexicon.size());

  WordClassifier classifier(make_p3d_config(cfg), n_classes);
  nn::Adam adam(classifier.parameters(), cfg.frontend_lr);
  nn::PlateauLr schedule(cfg.frontend_lr, cfg.lr_floor,
                         std::max(1, cfg.lr_patience / kLrWindow), cfg.lr_factor);

  // one rendered single-word clip per class
  std::vector<VideoClip> word_clips;
  for (int c = 0; c < n_classes; ++c)
    word_clips.push_back({corpus::render_video({c}, spec)});

  std::mt19937_64 rng(mix_seed(cfg.seed, "frontend-data"));
  std::uniform_int_distribution<int> pick(0, n_classes - 1);
  double window_loss = 0.0;
  for (int step = 0; step < cfg.frontend_steps; ++step) {
    adam.zero_grad();
    Tensor total;
    for (int b = 0; b < cfg.frontend_batch; ++b) {
      const int label = pick(rng);
      Tensor logits = classifier.forward(word_clips[static_cast<size_t>(label)]);
      Tensor loss = ops::cross_entropy(logits, {label});
      total = total.defined() ? ops::add(total, loss) : loss;
    }
    total = ops::scale(total, 1.0 / cfg.frontend_batch);
    const double value = total.item();
    if (!std::isfinite(value)) throw DivergenceError("frontend training diverged");
    total.backward();
    adam.step();
    window_loss += value;
    if ((step + 1) % kLrWindow == 0) {
      adam.set_lr(schedule.update(window_loss / kLrWindow));
      window_loss = 0.0;
    }
    if (log) log(step, value, adam.lr());
  }

  // freeze, then cache features for every corpus clip
  classifier.set_training(false);
  classifier.set_frozen(true);
  std::error_code ec;
  fs::create_directories(cfg.features_dir(), ec);
  for (const auto& rec : records) {
    VideoClip clip{corpus::load_clip(rec.clip_path)};
    clip.validate();
    NoGradGuard no_grad;
    Tensor feats = classifier.frontend().forward(clip);
    checkpoint::save_tensor(cfg.features_dir() / (rec.id + ".feat"), "feats", feats);
  }

  checkpoint::save_model(cfg.frontend_ckpt(), classifier,
                         {{"phase", "frontend"},
                          {"step", cfg.frontend_steps},
                          {"config_hash", cfg.frontend_hash()},
                          {"classes", n_classes},
                          {"seed", cfg.seed}});
}

std::unique_ptr<WordClassifier> load_frontend(const RunConfig& cfg) {
  auto model = std::make_unique<WordClassifier>(
      make_p3d_config(cfg), static_cast<int>(cfg.corpus.lexicon.empty()
                                                 ? corpus::CorpusSpec::default_lexicon().size()
                                                 : cfg.corpus.lexicon.size()));
  load_checked(cfg.frontend_ckpt(), *model, cfg.frontend_hash(), "frontend");
  model->set_training(false);
  model->set_frozen(true);
  return model;
}

void train_ae(const RunConfig& cfg, StepLog log) {
  require_run_dir(cfg);
  nn::seed_all(mix_seed(cfg.seed, "ae"));
  DataContext data(cfg, /*need_features=*/true);

  AEModel model(make_ae_config(cfg));
  nn::Adam adam(model.parameters(), cfg.ae_lr);
  nn::PlateauLr schedule(cfg.ae_lr, cfg.lr_floor,
                         std::max(1, cfg.lr_patience / kLrWindow), cfg.lr_factor);

  std::mt19937_64 rng(mix_seed(cfg.seed, "ae-data"));
  std::uniform_int_distribution<size_t> pick(0, data.train().size() - 1);
  std::uniform_int_distribution<size_t> snr_pick(0, cfg.noise.snr_levels_db.size() - 1);

  double window_loss = 0.0;
  double last_loss = 0.0;
  for (int step = 0; step < cfg.ae_steps; ++step) {
    std::vector<AETrainSample> batch;
    for (int b = 0; b < cfg.ae_batch; ++b) {
      const LoadedClip& clip = data.train()[pick(rng)];
      const double snr = cfg.noise.snr_levels_db[snr_pick(rng)];
      batch.push_back({clip.feats, data.noisy_mel(clip, snr, rng), clip.clean_mel});
    }
    last_loss = ae_train_step(batch, model, adam);
    window_loss += last_loss;
    if ((step + 1) % kLrWindow == 0) {
      adam.set_lr(schedule.update(window_loss / kLrWindow));
      window_loss = 0.0;
    }
    if (log) log(step, last_loss, adam.lr());
  }

  checkpoint::save_model(cfg.ae_ckpt(), model,
                         {{"phase", "ae"},
                          {"unit", cfg.ae_unit},
                          {"step", cfg.ae_steps},
                          {"config_hash", cfg.ae_hash()},
                          {"final_loss", last_loss},
                          {"seed", cfg.seed}});
}

std::unique_ptr<AEModel> load_ae(const RunConfig& cfg) {
  auto model = std::make_unique<AEModel>(make_ae_config(cfg));
  load_checked(cfg.ae_ckpt(), *model, cfg.ae_hash(), "ae");
  model->set_training(false);
  model->set_frozen(true);
  return model;
}

namespace {

struct SampleDraw {
  bool use_audio = true;
  bool use_video = true;
  bool add_noise = false;
  double snr_db = 0.0;
};

SampleDraw draw_sample(const RunConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SampleDraw d;
  const double m = u(rng);
  if (m < cfg.p_audio_only) {
    d.use_video = false;
  } else if (m < cfg.p_audio_only + cfg.p_video_only) {
    d.use_audio = false;
  }
  if (d.use_audio && u(rng) < cfg.noise.p_n) {
    d.add_noise = true;
    std::uniform_int_distribution<size_t> snr_pick(0, cfg.noise.snr_levels_db.size() - 1);
    d.snr_db = cfg.noise.snr_levels_db[snr_pick(rng)];
  }
  return d;
}

int curriculum_stage(const RunConfig& cfg, int step) {
  return std::min(cfg.corpus.max_words, 1 + step / cfg.curriculum_steps_per_stage);
}

// AE output is an input feature here, not part of the trained graph.
Tensor enhanced_input(AEModel& ae, const Tensor& feats, const Tensor& mel) {
  NoGradGuard no_grad;
  return ae.forward(feats, mel).enhanced;
}

void run_msr_training(const RunConfig& cfg, DataContext& data, MSRModel& model,
                      AEModel* ae, int steps, double lr, StepLog log) {
  std::vector<nn::Parameter*> params = model.parameters();
  if (ae) {
    // frozen enhancement parameters ride along; the optimizer must skip them
    for (nn::Parameter* p : ae->parameters()) params.push_back(p);
  }
  nn::Adam adam(params, lr);
  nn::PlateauLr schedule(lr, cfg.lr_floor, std::max(1, cfg.lr_patience / kLrWindow),
                         cfg.lr_factor);
  std::mt19937_64 rng(mix_seed(cfg.seed, ae ? "joint-data" : "msr-data"));

  // clip indexes eligible per curriculum stage
  std::vector<std::vector<size_t>> eligible(
      static_cast<size_t>(cfg.corpus.max_words) + 1);
  for (size_t i = 0; i < data.train().size(); ++i)
    for (int stage = data.train()[i].rec.n_words; stage <= cfg.corpus.max_words; ++stage)
      eligible[static_cast<size_t>(stage)].push_back(i);

  double window_loss = 0.0;
  for (int step = 0; step < steps; ++step) {
    const int stage = curriculum_stage(cfg, step);
    const auto& pool = eligible[static_cast<size_t>(stage)];
    if (pool.empty())
      throw SchedulingError("no training clips with at most " + std::to_string(stage) +
                            " words");
    std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);

    std::vector<MSRTrainSample> batch;
    for (int b = 0; b < cfg.msr_batch; ++b) {
      const LoadedClip& clip = data.train()[pool[pick(rng)]];
      const SampleDraw d = draw_sample(cfg, rng);
      MSRTrainSample s;
      s.target_ids = clip.target_ids;
      s.n_words = clip.rec.n_words;
      if (d.use_video) s.v_feats = clip.feats;
      if (d.use_audio) {
        Tensor mel = d.add_noise ? data.noisy_mel(clip, d.snr_db, rng) : clip.clean_mel;
        s.mel = ae ? enhanced_input(*ae, clip.feats, mel) : mel;
      }
      batch.push_back(std::move(s));
    }
    const double loss = msr_train_step(batch, model, adam, stage);
    window_loss += loss;
    if ((step + 1) % kLrWindow == 0) {
      adam.set_lr(schedule.update(window_loss / kLrWindow));
      window_loss = 0.0;
    }
    if (log) log(step, loss, adam.lr());
  }
}

}  // namespace

void train_msr(const RunConfig& cfg, StepLog log) {
  require_run_dir(cfg);
  nn::seed_all(mix_seed(cfg.seed, "msr"));
  DataContext data(cfg, /*need_features=*/true);
  MSRModel model(make_msr_config(cfg));
  run_msr_training(cfg, data, model, nullptr, cfg.msr_steps, cfg.msr_lr, log);
  checkpoint::save_model(cfg.msr_ckpt(), model,
                         {{"phase", "msr"},
                          {"step", cfg.msr_steps},
                          {"config_hash", cfg.msr_hash()},
                          {"seed", cfg.seed}});
}

void train_joint(const RunConfig& cfg, StepLog log) {
  require_run_dir(cfg);
  nn::seed_all(mix_seed(cfg.seed, "joint"));
  DataContext data(cfg, /*need_features=*/true);

  auto ae = load_ae(cfg);  // frozen
  MSRModel model(make_msr_config(cfg));
  load_checked(cfg.msr_ckpt(), model, cfg.msr_hash(), "msr");

  run_msr_training(cfg, data, model, ae.get(), cfg.joint_steps, cfg.joint_lr, log);
  checkpoint::save_model(cfg.joint_ckpt(), model,
                         {{"phase", "joint"},
                          {"ae_unit", cfg.ae_unit},
                          {"step", cfg.joint_steps},
                          {"config_hash", cfg.msr_hash()},
                          {"seed", cfg.seed}});
}

std::unique_ptr<MSRModel> load_msr(const RunConfig& cfg, bool joint) {
  auto model = std::make_unique<MSRModel>(make_msr_config(cfg));
  load_checked(joint ? cfg.joint_ckpt() : cfg.msr_ckpt(), *model, cfg.msr_hash(),
               joint ? "joint" : "msr");
  model->set_training(false);
  return model;
}

void train_phase(const std::string& phase, const RunConfig& cfg, StepLog log) {
  if (phase == "frontend") train_frontend(cfg, log);
  else if (phase == "ae") train_ae(cfg, log);
  else if (phase == "msr") train_msr(cfg, log);
  else if (phase == "joint") train_joint(cfg, log);
  else throw ConfigError("unknown training phase '" + phase + "'");
}

// ---------------------------------------------------------------------------
// evaluation

std::mt19937_64 eval_noise_rng(const RunConfig& cfg, const std::string& clip_id,
                               const std::string& snr) {
  return std::mt19937_64(mix_seed(cfg.seed, "eval/" + clip_id + "/" + snr));
}

metrics::ResultGrid evaluate(const RunConfig& cfg, const EvalOptions& opts,
                             std::ostream* log) {
  DataContext data(cfg, /*need_features=*/true);
  auto msr = load_msr(cfg, false);

  bool any_enhanced = false;
  for (const auto& m : opts.modes) any_enhanced |= mode_uses_enhancement(parse_mode(m));
  std::unique_ptr<AEModel> ae;
  std::unique_ptr<MSRModel> msr_joint;
  if (any_enhanced) {
    ae = load_ae(cfg);
    if (fs::exists(cfg.joint_ckpt())) msr_joint = load_msr(cfg, true);
  }

  const auto& split = opts.use_train_split ? data.train() : data.test();
  if (split.empty()) throw DataError("evaluation split is empty");

  metrics::ResultGrid grid;
  for (const auto& snr : opts.snrs) {
    for (const LoadedClip& clip : split) {
      Tensor mel;
      if (snr == "clean") {
        mel = clip.clean_mel;
      } else {
        std::mt19937_64 rng = eval_noise_rng(cfg, clip.rec.id, snr);
        mel = data.noisy_mel(clip, std::stod(snr), rng);
      }
      const auto ref = metrics::tokenize_words(clip.rec.transcript);
      for (const auto& mode_str : opts.modes) {
        const Mode mode = parse_mode(mode_str);
        MSRModel& decoder =
            (mode_uses_enhancement(mode) && msr_joint) ? *msr_joint : *msr;
        TokenSequence out = run_mode(mode, mel, clip.feats, ae.get(), decoder,
                                     cfg.max_decode_len);
        const auto hyp = metrics::tokenize_words(out.text());
        const double w = metrics::wer(ref, hyp).wer;
        auto& cell = grid[{mode_str, snr}];
        cell.wer_sum += w;
        cell.count += 1;
        if (log)
          *log << "[eval] snr=" << snr << " mode=" << mode_str << " clip=" << clip.rec.id
               << " wer=" << w << " hyp='" << out.text() << "'\n";
      }
    }
  }
  return grid;
}

std::string decode_utterance(const RunConfig& cfg, const std::string& mode_str,
                             const fs::path& wav_path, const fs::path& clip_path,
                             const std::string& snr) {
  const Mode mode = parse_mode(mode_str);
  auto frontend = load_frontend(cfg);
  auto msr = load_msr(cfg, mode_uses_enhancement(mode) && fs::exists(cfg.joint_ckpt()));
  std::unique_ptr<AEModel> ae;
  if (mode_uses_enhancement(mode)) ae = load_ae(cfg);

  VideoClip clip{corpus::load_clip(clip_path)};
  clip.validate();
  Tensor feats;
  {
    NoGradGuard no_grad;
    feats = frontend->frontend().forward(clip);
  }

  Tensor mel;
  if (mode != Mode::kV) {
    signal::Waveform wav = signal::load_wav(wav_path);
    if (!snr.empty()) {
      auto noise_sources = corpus::load_noise_sources(cfg.data_root);
      std::mt19937_64 rng = eval_noise_rng(cfg, wav_path.filename().string(), snr);
      signal::Waveform babble = signal::synth_babble(
          noise_sources, static_cast<int64_t>(wav.samples.size()), rng,
          cfg.noise.n_sources);
      wav = signal::mix_at_snr(wav, babble, std::stod(snr));
    }
    mel = signal::stft_mel_aligned(wav, clip.t()).mag;
  }
  return run_mode(mode, mel, feats, ae.get(), *msr, cfg.max_decode_len).text();
}

void enhance_dump(const RunConfig& cfg, const std::string& clip_id,
                  const std::string& snr, const fs::path& out) {
  DataContext data(cfg, /*need_features=*/true);
  const LoadedClip* found = nullptr;
  for (const auto& c : data.train())
    if (c.rec.id == clip_id) found = &c;
  for (const auto& c : data.test())
    if (c.rec.id == clip_id) found = &c;
  if (!found) throw DataError("no clip with id '" + clip_id + "' in the corpus");

  auto ae = load_ae(cfg);
  Tensor noisy;
  if (snr == "clean") {
    noisy = found->clean_mel;
  } else {
    std::mt19937_64 rng = eval_noise_rng(cfg, clip_id, snr);
    noisy = data.noisy_mel(*found, std::stod(snr), rng);
  }
  NoGradGuard no_grad;
  AEOutput result = ae->forward(found->feats, noisy);

  checkpoint::Archive archive;
  archive.meta = {{"clip", clip_id},
                  {"snr", snr},
                  {"unit", cfg.ae_unit},
                  {"delta_m_noisy", energy_error(noisy, found->clean_mel)},
                  {"delta_m_enhanced", energy_error(result.enhanced, found->clean_mel)}};
  archive.tensors.emplace("clean", found->clean_mel.clone_detached());
  archive.tensors.emplace("noisy", noisy.clone_detached());
  archive.tensors.emplace("mask", result.mask.clone_detached());
  archive.tensors.emplace("enhanced", result.enhanced.clone_detached());
  checkpoint::save_archive(out, archive);
}

}  // namespace avsr::pipeline
