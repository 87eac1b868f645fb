// SPDX-License-Identifier: Apache-2.0
//
// avsr command-line driver.
//
//   avsr synth-corpus --data-root runs/corpus
//   avsr train --phase frontend|ae|msr|joint ...
//   avsr eval --modes A,AV --snrs clean,0 ...
//   avsr enhance --clip test_0001 --snr 0 --out dump.ckpt
//   avsr decode --mode AV --wav x.wav --clip x.clip
//
// Exit codes: 0 ok, 2 configuration error, 3 data/format error.

#include <iostream>

#include "CLI11.hpp"

#include "avsr/config.hpp"
#include "avsr/error.hpp"
#include "avsr/metrics.hpp"
#include "avsr/pipeline.hpp"

namespace {

struct CliOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string data_root;
  std::string run_dir;
  int64_t seed = -1;
};

avsr::RunConfig build_config(const CliOptions& cli) {
  avsr::RunConfig cfg;
  cfg.run_dir = "runs/default";
  if (!cli.config_file.empty()) avsr::apply_config_file(cli.config_file, cfg);
  for (const auto& kv : cli.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw avsr::ConfigError("--set expects key=value, got '" + kv + "'");
    avsr::apply_override(kv.substr(0, eq), kv.substr(eq + 1), cfg);
  }
  if (!cli.data_root.empty()) cfg.data_root = cli.data_root;
  if (!cli.run_dir.empty()) cfg.run_dir = cli.run_dir;
  if (cli.seed >= 0) cfg.seed = static_cast<uint64_t>(cli.seed);
  avsr::apply_env(cfg);
  if (cfg.corpus.lexicon.empty())
    cfg.corpus.lexicon = avsr::corpus::CorpusSpec::default_lexicon();
  cfg.validate();
  if (cfg.data_root.empty())
    throw avsr::ConfigError(
        "data_root is not set (flag --data-root, config key, or AVSR_DATA_ROOT)");
  return cfg;
}

std::vector<std::string> parse_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(csv);
  while (std::getline(is, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-visual speech recognition with visually guided enhancement"};
  app.require_subcommand(1);

  CliOptions cli;
  app.add_option("--config", cli.config_file, "Config file (key = value lines)");
  app.add_option("--set", cli.overrides, "Config override key=value (repeatable)");
  app.add_option("--data-root", cli.data_root, "Corpus directory");
  app.add_option("--run-dir", cli.run_dir, "Checkpoint/report directory");
  app.add_option("--seed", cli.seed, "Run seed");

  auto* synth = app.add_subcommand("synth-corpus", "Generate the synthetic corpus");

  auto* train = app.add_subcommand("train", "Run one training phase");
  std::string phase;
  bool quiet = false;
  train->add_option("--phase", phase, "frontend | ae | msr | joint")->required();
  train->add_flag("--quiet", quiet, "Suppress per-step logging");

  auto* eval = app.add_subcommand("eval", "Evaluate modes across SNR levels");
  std::string modes_csv, snrs_csv;
  bool on_train = false;
  eval->add_option("--modes", modes_csv, "Comma list of A,V,AV,VA,VAV");
  eval->add_option("--snrs", snrs_csv, "Comma list of clean,10,5,0,-5,-10");
  eval->add_flag("--train-split", on_train, "Score the training split");

  auto* enhance = app.add_subcommand("enhance", "Dump mask and magnitudes for a clip");
  std::string clip_id, snr = "0", out_path = "enhance_dump.ckpt";
  enhance->add_option("--clip", clip_id, "Clip id from the manifest")->required();
  enhance->add_option("--snr", snr, "SNR in dB, or 'clean'");
  enhance->add_option("--out", out_path, "Output archive path");

  auto* decode = app.add_subcommand("decode", "Decode a single utterance");
  std::string mode = "AV", wav_path, clip_path, dec_snr;
  decode->add_option("--mode", mode, "A | V | AV | VA | VAV");
  decode->add_option("--wav", wav_path, "16 kHz mono PCM wav");
  decode->add_option("--clip", clip_path, "Clip tensor file or PGM directory")->required();
  decode->add_option("--snr", dec_snr, "Mix babble at this SNR before decoding");

  CLI11_PARSE(app, argc, argv);

  try {
    avsr::RunConfig cfg = build_config(cli);

    if (synth->parsed()) {
      avsr::pipeline::synth_corpus(cfg);
      std::cout << "corpus written to " << cfg.data_root.string() << "\n";
    } else if (train->parsed()) {
      avsr::pipeline::StepLog log = nullptr;
      if (!quiet)
        log = [](int step, double loss, double lr) {
          if ((step + 1) % 25 == 0)
            std::cout << "step " << step + 1 << "  loss " << loss << "  lr " << lr
                      << "\n";
        };
      if (phase == "ae" && !quiet) {
        const avsr::AEConfig ae = avsr::pipeline::make_ae_config(cfg);
        std::cout << "video stream (" << cfg.ae_unit << "):\n"
                  << ae.video_stream.table(1) << "audio stream:\n"
                  << ae.audio_stream.table(4);
      }
      avsr::pipeline::train_phase(phase, cfg, log);
      std::cout << "phase " << phase << " finished; checkpoints in "
                << cfg.run_dir.string() << "\n";
    } else if (eval->parsed()) {
      avsr::pipeline::EvalOptions opts;
      opts.modes = modes_csv.empty() ? cfg.eval_modes : parse_list(modes_csv);
      opts.snrs = snrs_csv.empty() ? cfg.eval_snrs : parse_list(snrs_csv);
      opts.use_train_split = on_train;
      const auto grid = avsr::pipeline::evaluate(cfg, opts);
      const std::string table = avsr::metrics::report_table(opts.modes, grid);
      std::cout << "WER % by mode and SNR\n" << table;
      std::ofstream(cfg.run_dir / "report.txt") << table;
      std::ofstream(cfg.run_dir / "report.csv")
          << avsr::metrics::report_csv(opts.modes, grid);
      std::cout << "reports written to " << (cfg.run_dir / "report.txt").string()
                << " and .csv\n";
    } else if (enhance->parsed()) {
      avsr::pipeline::enhance_dump(cfg, clip_id, snr, out_path);
      std::cout << "magnitude dump written to " << out_path << "\n";
    } else if (decode->parsed()) {
      std::cout << avsr::pipeline::decode_utterance(cfg, mode, wav_path, clip_path,
                                                    dec_snr)
                << "\n";
    }
    return 0;
  } catch (const avsr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const avsr::VersionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const avsr::FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const avsr::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const avsr::IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
