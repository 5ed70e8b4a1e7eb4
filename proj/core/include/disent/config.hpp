#pragma once

#include <map>
#include <string>
#include <vector>

#include "disent/data.hpp"
#include "disent/trainer.hpp"

namespace disent {

// Flat key=value settings with a closed key registry. Files are plain text:
// one assignment per line, `#` comments, blank lines ignored. Unknown keys
// and malformed values are configuration errors.
class Config {
 public:
  static const std::vector<std::string>& known_keys();
  static bool is_known(const std::string& key);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // "key=value" lines in key order; what artifacts echo back
  std::vector<std::string> echo_lines() const;

 private:
  std::map<std::string, std::string> values_;
};

Config load_config(const std::string& path);

// "key=value" command-line override
void apply_assignment(Config& cfg, const std::string& assignment);

CorpusSpec corpus_spec_from(const Config& cfg);
ModelConfig model_config_from(const Config& cfg);

// `base` supplies the fallback for every unset key
TrainConfig train_config_from(const Config& cfg, const TrainConfig& base = {});

// encoder pretraining schedule: two decaying warm-restart cycles at a high
// ceiling rather than the single short finetune cycle
TrainConfig pretrain_defaults();

// preset name -> effective loss weights; the classification-only preset uses
// unit speaker weight, the staged presets zero out the disabled terms
LossWeights apply_objective(const LossWeights& base, const std::string& objective);

}  // namespace disent
