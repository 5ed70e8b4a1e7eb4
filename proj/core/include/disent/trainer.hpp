#pragma once

#include <array>
#include <optional>

#include "disent/checkpoint.hpp"
#include "disent/data.hpp"
#include "disent/losses.hpp"
#include "disent/optim.hpp"

namespace disent {

struct TrainConfig {
  std::size_t epochs = 4;
  std::size_t batches_per_epoch = 200;
  std::size_t speakers_per_batch = 16;  // batch rows = 2x this
  std::size_t m_inner = 1;              // variational rounds per main update
  LossWeights weights;
  MarginConfig margin;
  ScheduleConfig schedule;
  double weight_decay = 2e-5;
  double phi_lr = 1e-4;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  // bitwise theta/phi checksums around every step; violations are counted
  bool debug_isolation = false;
  std::string objective = "full";
  std::string metrics_path;     // empty disables the log
  std::string checkpoint_path;  // empty disables checkpoints
  std::vector<std::string> config_echo;  // lines echoed into artifacts
};

void validate_train_config(const TrainConfig& cfg);

// step, epoch, lr, L_cls_s, L_cls_d, I(xs;xd), I(xd;ys), I(xs;yd), total
using MetricsRow = std::array<double, 9>;

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::size_t isolation_violations = 0;
  std::size_t epochs_run = 0;
};

// Alternating optimization over one batch stream: per batch the embeddings
// are computed once, the variational networks take m_inner negative
// log-likelihood steps on detached embeddings, then the main networks take a
// single step on the weighted total objective with the variational networks
// frozen.
class FinetuneRun {
 public:
  FinetuneRun(Model& model, const Corpus& corpus, const TrainConfig& cfg);

  // load pretrained encoder parameters (groups must contain `encoder`)
  void init_encoder_from(const std::string& checkpoint_path);
  // restore full training state; continues after header.epochs_done
  void resume_from(const std::string& checkpoint_path);

  TrainResult run();

  void save_state(const std::string& path, std::size_t epochs_done);

 private:
  void run_batch(std::size_t step, std::size_t epoch, std::size_t step_in_epoch,
                 Rng& rng, TrainResult& result);

  Model& model_;
  const Corpus& corpus_;
  TrainConfig cfg_;
  Adam theta_opt_, phi1_opt_, phi2_opt_, phi3_opt_;
  std::size_t start_epoch_ = 0;
};

// encoder + temporary speaker classifier trained with the speaker
// classification loss only; the checkpoint carries the encoder group
TrainResult pretrain_encoder(Model& model, const Corpus& corpus, const TrainConfig& cfg);

// bitwise digest of a parameter group (FNV-1a over the raw float bytes)
std::uint64_t param_checksum(const ParamList& params);

}  // namespace disent
