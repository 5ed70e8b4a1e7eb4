#include "disent/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

namespace disent {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
  throw ConfigError("config: key " + key + " expects " + want + ", got '" + value + "'");
}

}  // namespace

const std::vector<std::string>& Config::known_keys() {
  static const std::vector<std::string> keys = {
      "seed",
      "objective",
      "corpus.speakers",
      "corpus.devices",
      "corpus.utts_per_pair",
      "corpus.feat_dim",
      "corpus.frames",
      "corpus.speaker_scale",
      "corpus.device_scale",
      "corpus.noise_scale",
      "corpus.seed",
      "corpus.utterance_seed",
      "model.emb_dim",
      "model.enc_hidden",
      "model.phi_hidden",
      "train.epochs",
      "train.batches_per_epoch",
      "train.speakers_per_batch",
      "train.m_inner",
      "train.weight_decay",
      "train.phi_lr",
      "train.clip_norm",
      "train.debug_isolation",
      "sched.cycle_epochs",
      "sched.eta_max",
      "sched.eta_min",
      "sched.decay",
      "sched.num_cycles",
      "loss.cls_s",
      "loss.cls_d",
      "loss.mi1",
      "loss.mi2",
      "loss.mi3",
      "margin.scale",
      "margin.margin",
  };
  return keys;
}

bool Config::is_known(const std::string& key) {
  const auto& keys = known_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

void Config::set(const std::string& key, const std::string& value) {
  if (!is_known(key)) throw ConfigError("config: unknown key '" + key + "'");
  values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  char* end = nullptr;
  double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) bad_value(key, v, "a number");
  return d;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  char* end = nullptr;
  unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || v[0] == '-') {
    bad_value(key, v, "a nonnegative integer");
  }
  return static_cast<std::uint64_t>(u);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> Config::echo_lines() const {
  std::vector<std::string> lines;
  lines.reserve(values_.size());
  for (const auto& [k, v] : values_) lines.push_back(k + "=" + v);
  return lines;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  Config cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    }
    cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

void apply_assignment(Config& cfg, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config: override '" + assignment + "' is not key=value");
  }
  cfg.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

CorpusSpec corpus_spec_from(const Config& cfg) {
  CorpusSpec spec;
  spec.num_speakers = cfg.get_size("corpus.speakers", spec.num_speakers);
  spec.num_devices = cfg.get_size("corpus.devices", spec.num_devices);
  spec.utts_per_pair = cfg.get_size("corpus.utts_per_pair", spec.utts_per_pair);
  spec.feat_dim = cfg.get_size("corpus.feat_dim", spec.feat_dim);
  spec.frames = cfg.get_size("corpus.frames", spec.frames);
  spec.speaker_scale = cfg.get_double("corpus.speaker_scale", spec.speaker_scale);
  spec.device_scale = cfg.get_double("corpus.device_scale", spec.device_scale);
  spec.noise_scale = cfg.get_double("corpus.noise_scale", spec.noise_scale);
  spec.seed = cfg.get_u64("corpus.seed", cfg.get_u64("seed", spec.seed));
  spec.utterance_seed = cfg.get_u64("corpus.utterance_seed", spec.utterance_seed);
  return spec;
}

ModelConfig model_config_from(const Config& cfg) {
  ModelConfig m;
  m.feat_dim = cfg.get_size("corpus.feat_dim", m.feat_dim);
  m.frames = cfg.get_size("corpus.frames", m.frames);
  m.emb_dim = cfg.get_size("model.emb_dim", m.emb_dim);
  m.enc_hidden = cfg.get_size("model.enc_hidden", m.enc_hidden);
  m.phi_hidden = cfg.get_size("model.phi_hidden", m.phi_hidden);
  m.num_speakers = cfg.get_size("corpus.speakers", m.num_speakers);
  m.num_devices = cfg.get_size("corpus.devices", m.num_devices);
  return m;
}

TrainConfig train_config_from(const Config& cfg, const TrainConfig& base) {
  TrainConfig t = base;
  t.epochs = cfg.get_size("train.epochs", t.epochs);
  t.batches_per_epoch = cfg.get_size("train.batches_per_epoch", t.batches_per_epoch);
  t.speakers_per_batch = cfg.get_size("train.speakers_per_batch", t.speakers_per_batch);
  t.m_inner = cfg.get_size("train.m_inner", t.m_inner);
  t.weight_decay = cfg.get_double("train.weight_decay", t.weight_decay);
  t.phi_lr = cfg.get_double("train.phi_lr", t.phi_lr);
  t.clip_norm = cfg.get_double("train.clip_norm", t.clip_norm);
  t.debug_isolation = cfg.get_bool("train.debug_isolation", t.debug_isolation);
  t.seed = cfg.get_u64("seed", t.seed);
  t.schedule.cycle_epochs = cfg.get_size("sched.cycle_epochs", t.schedule.cycle_epochs);
  t.schedule.eta_max = cfg.get_double("sched.eta_max", t.schedule.eta_max);
  t.schedule.eta_min = cfg.get_double("sched.eta_min", t.schedule.eta_min);
  t.schedule.decay = cfg.get_double("sched.decay", t.schedule.decay);
  t.schedule.num_cycles = cfg.get_size("sched.num_cycles", t.schedule.num_cycles);
  LossWeights w = t.weights;
  w.cls_s = cfg.get_double("loss.cls_s", w.cls_s);
  w.cls_d = cfg.get_double("loss.cls_d", w.cls_d);
  w.mi1 = cfg.get_double("loss.mi1", w.mi1);
  w.mi2 = cfg.get_double("loss.mi2", w.mi2);
  w.mi3 = cfg.get_double("loss.mi3", w.mi3);
  t.objective = cfg.get_string("objective", t.objective);
  t.weights = apply_objective(w, t.objective);
  t.margin.scale = cfg.get_double("margin.scale", t.margin.scale);
  t.margin.margin = cfg.get_double("margin.margin", t.margin.margin);
  t.config_echo = cfg.echo_lines();
  return t;
}

TrainConfig pretrain_defaults() {
  TrainConfig t;
  t.epochs = 50;
  t.objective = "pretrain";
  t.schedule.cycle_epochs = 25;
  t.schedule.eta_max = 1e-3;
  t.schedule.eta_min = 0.0;
  t.schedule.decay = 0.8;
  t.schedule.num_cycles = 2;
  return t;
}

LossWeights apply_objective(const LossWeights& base, const std::string& objective) {
  LossWeights w = base;
  if (objective == "full" || objective == "pretrain") return w;
  if (objective == "embed_only") return LossWeights{0, 0, 0, 0, 0};
  if (objective == "cls_s") return LossWeights{1, 0, 0, 0, 0};
  if (objective == "cls_sd") {
    w.mi1 = w.mi2 = w.mi3 = 0;
    return w;
  }
  if (objective == "cls_sd_m1") {
    w.mi2 = w.mi3 = 0;
    return w;
  }
  if (objective == "cls_sd_m23") {
    w.mi1 = 0;
    return w;
  }
  throw ConfigError("config: unknown objective '" + objective + "'");
}

}  // namespace disent
