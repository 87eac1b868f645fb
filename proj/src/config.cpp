// SPDX-License-Identifier: Apache-2.0

#include "avsr/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "avsr/error.hpp"
#include "avsr/frontend.hpp"
#include "avsr/msr_net.hpp"

namespace avsr {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
  }
}

int64_t to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
  }
}

// FNV-1a over the canonical field string.
std::string fnv_hash(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  corpus.validate();
  noise.validate();
  if (frontend_width_mult <= 0.0 || frontend_width_mult > 1.0)
    throw ConfigError("config: frontend width multiplier must lie in (0,1]");
  for (int b : frontend_blocks)
    if (b < 1) throw ConfigError("config: frontend stage block counts must be >= 1");
  if (ae_unit != "tcn" && ae_unit != "1drn")
    throw ConfigError("config: ae unit must be tcn or 1drn");
  if (msr_dropout < 0.0 || msr_dropout >= 1.0 || msr_label_smoothing < 0.0 ||
      msr_label_smoothing > 1.0)
    throw ConfigError("config: dropout/label smoothing outside valid range");
  if (p_audio_only < 0.0 || p_video_only < 0.0 || p_audio_only + p_video_only > 1.0)
    throw ConfigError("config: modality dropout probabilities must sum to <= 1");
  if (lr_floor <= 0.0 || lr_factor <= 0.0 || lr_factor >= 1.0 || lr_patience < 1)
    throw ConfigError("config: bad learning-rate schedule");
  if (curriculum_steps_per_stage < 1)
    throw ConfigError("config: curriculum stage length must be >= 1");
  if (max_decode_len < 2) throw ConfigError("config: max decode length too small");
  for (const auto& m : eval_modes) parse_mode(m);
}

int64_t RunConfig::visual_dim() const {
  P3DConfig p3d;
  p3d.width_mult = frontend_width_mult;
  return p3d.feat_dim();
}

std::string RunConfig::frontend_hash() const {
  std::ostringstream os;
  os << "frontend;wm=" << frontend_width_mult << ";blocks=" << frontend_blocks[0] << ","
     << frontend_blocks[1] << "," << frontend_blocks[2] << "," << frontend_blocks[3]
     << ";classes=" << corpus.lexicon.size();
  return fnv_hash(os.str());
}

std::string RunConfig::ae_hash() const {
  std::ostringstream os;
  os << "ae;unit=" << ae_unit << ";w=" << ae_width << ";o=" << ae_out_width
     << ";g=" << ae_gru_units << ";fc=" << ae_fc_width << ";v=" << visual_dim()
     << ";vs=" << ae_video_stream << ";as=" << ae_audio_stream;
  return fnv_hash(os.str());
}

std::string RunConfig::msr_hash() const {
  std::ostringstream os;
  os << "msr;w=" << msr_width << ";u=" << msr_units << ";e=" << msr_embed
     << ";v=" << visual_dim();
  return fnv_hash(os.str());
}

void apply_override(const std::string& key, const std::string& value, RunConfig& cfg) {
  const std::string v = trim(value);
  if (key == "seed") cfg.seed = static_cast<uint64_t>(to_int(key, v));
  else if (key == "data_root") cfg.data_root = v;
  else if (key == "run_dir") cfg.run_dir = v;
  else if (key == "corpus.n_train") cfg.corpus.n_train = static_cast<int>(to_int(key, v));
  else if (key == "corpus.n_test") cfg.corpus.n_test = static_cast<int>(to_int(key, v));
  else if (key == "corpus.min_words") cfg.corpus.min_words = static_cast<int>(to_int(key, v));
  else if (key == "corpus.max_words") cfg.corpus.max_words = static_cast<int>(to_int(key, v));
  else if (key == "corpus.word_frames") cfg.corpus.word_frames = static_cast<int>(to_int(key, v));
  else if (key == "corpus.gap_frames") cfg.corpus.gap_frames = static_cast<int>(to_int(key, v));
  else if (key == "corpus.n_noise_sources") cfg.corpus.n_noise_sources = static_cast<int>(to_int(key, v));
  else if (key == "corpus.lexicon") cfg.corpus.lexicon = split_csv(v);
  else if (key == "noise.p_n") cfg.noise.p_n = to_double(key, v);
  else if (key == "noise.n_sources") cfg.noise.n_sources = static_cast<int>(to_int(key, v));
  else if (key == "noise.snr_levels") {
    cfg.noise.snr_levels_db.clear();
    for (const auto& s : split_csv(v)) cfg.noise.snr_levels_db.push_back(to_double(key, s));
  } else if (key == "frontend.width_mult") cfg.frontend_width_mult = to_double(key, v);
  else if (key == "frontend.blocks") {
    const auto parts = split_csv(v);
    if (parts.size() != 4) throw ConfigError("config: frontend.blocks needs 4 counts");
    for (size_t i = 0; i < 4; ++i)
      cfg.frontend_blocks[i] = static_cast<int>(to_int(key, parts[i]));
  } else if (key == "frontend.steps") cfg.frontend_steps = static_cast<int>(to_int(key, v));
  else if (key == "frontend.batch") cfg.frontend_batch = static_cast<int>(to_int(key, v));
  else if (key == "frontend.lr") cfg.frontend_lr = to_double(key, v);
  else if (key == "ae.unit") cfg.ae_unit = v;
  else if (key == "ae.video_stream") cfg.ae_video_stream = v;
  else if (key == "ae.audio_stream") cfg.ae_audio_stream = v;
  else if (key == "ae.width") cfg.ae_width = to_int(key, v);
  else if (key == "ae.out_width") cfg.ae_out_width = to_int(key, v);
  else if (key == "ae.gru_units") cfg.ae_gru_units = to_int(key, v);
  else if (key == "ae.fc_width") cfg.ae_fc_width = to_int(key, v);
  else if (key == "ae.mel_gain") cfg.ae_mel_gain = to_double(key, v);
  else if (key == "ae.steps") cfg.ae_steps = static_cast<int>(to_int(key, v));
  else if (key == "ae.batch") cfg.ae_batch = static_cast<int>(to_int(key, v));
  else if (key == "ae.lr") cfg.ae_lr = to_double(key, v);
  else if (key == "msr.width") cfg.msr_width = to_int(key, v);
  else if (key == "msr.units") cfg.msr_units = to_int(key, v);
  else if (key == "msr.embed") cfg.msr_embed = to_int(key, v);
  else if (key == "msr.mel_gain") cfg.msr_mel_gain = to_double(key, v);
  else if (key == "msr.dropout") cfg.msr_dropout = to_double(key, v);
  else if (key == "msr.label_smoothing") cfg.msr_label_smoothing = to_double(key, v);
  else if (key == "msr.steps") cfg.msr_steps = static_cast<int>(to_int(key, v));
  else if (key == "msr.batch") cfg.msr_batch = static_cast<int>(to_int(key, v));
  else if (key == "msr.lr") cfg.msr_lr = to_double(key, v);
  else if (key == "msr.p_audio_only") cfg.p_audio_only = to_double(key, v);
  else if (key == "msr.p_video_only") cfg.p_video_only = to_double(key, v);
  else if (key == "joint.steps") cfg.joint_steps = static_cast<int>(to_int(key, v));
  else if (key == "joint.lr") cfg.joint_lr = to_double(key, v);
  else if (key == "lr.floor") cfg.lr_floor = to_double(key, v);
  else if (key == "lr.factor") cfg.lr_factor = to_double(key, v);
  else if (key == "lr.patience") cfg.lr_patience = static_cast<int>(to_int(key, v));
  else if (key == "curriculum.steps_per_stage")
    cfg.curriculum_steps_per_stage = static_cast<int>(to_int(key, v));
  else if (key == "eval.modes") cfg.eval_modes = split_csv(v);
  else if (key == "eval.snrs") cfg.eval_snrs = split_csv(v);
  else if (key == "eval.max_decode_len") cfg.max_decode_len = static_cast<int>(to_int(key, v));
  else throw ConfigError("config: unknown key '" + key + "'");
}

void apply_config_file(const std::filesystem::path& path, RunConfig& cfg) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot read " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not key = value: '" + line + "'");
    apply_override(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), cfg);
  }
}

void apply_env(RunConfig& cfg) {
  if (cfg.data_root.empty()) {
    if (const char* root = std::getenv("AVSR_DATA_ROOT")) cfg.data_root = root;
  }
}

std::string config_summary(const RunConfig& cfg) {
  std::ostringstream os;
  os << "seed = " << cfg.seed << "\n";
  os << "data_root = " << cfg.data_root.string() << "\n";
  os << "run_dir = " << cfg.run_dir.string() << "\n";
  os << "corpus.n_train = " << cfg.corpus.n_train << "\n";
  os << "corpus.n_test = " << cfg.corpus.n_test << "\n";
  os << "frontend.width_mult = " << cfg.frontend_width_mult << "\n";
  os << "ae.unit = " << cfg.ae_unit << "\n";
  os << "msr.units = " << cfg.msr_units << "\n";
  return os.str();
}

}  // namespace avsr
