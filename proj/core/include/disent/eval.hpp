#pragma once

#include "disent/data.hpp"
#include "disent/model.hpp"

namespace disent {

struct ScoreSet {
  std::vector<double> scores;
  std::vector<bool> is_target;
};

void validate_scores(const ScoreSet& s);  // finite, both classes present

double cosine_score(const std::vector<double>& a, const std::vector<double>& b);

// Threshold sweep at midpoints of adjacent unique scores plus sentinels below
// and above; accept when score >= threshold. EER is linearly interpolated to
// the FAR = FRR crossing. Both return (rate, threshold).
std::pair<double, double> compute_eer(const ScoreSet& s);

// DCF(t) = c_miss p_target FRR(t) + c_fa (1 - p_target) FAR(t), minimized
// over the sweep; optionally normalized by min(p_target, 1 - p_target)
std::pair<double, double> compute_mindcf(const ScoreSet& s, double c_miss = 1.0,
                                         double c_fa = 1.0, double p_target = 0.05,
                                         bool normalize = false);

struct Trial {
  bool target = false;
  std::size_t enroll = 0;
  std::size_t test = 0;
};

// text rows: `label enroll_id test_id`, label one of target / nontarget
std::vector<Trial> load_trials(const std::string& path, std::size_t corpus_size);
void save_trials(const std::vector<Trial>& trials, const std::string& path);

// balanced protocol: half same-speaker pairs, half cross-speaker pairs
std::vector<Trial> make_trial_protocol(const Corpus& corpus, std::size_t n_trials,
                                       std::uint64_t seed);

enum class EmbeddingKind { initial, speaker, device };

EmbeddingKind embedding_kind_from(const std::string& name);  // x | xs | xd

// eval-mode embeddings for every utterance, each [n x D] row-major
struct EmbeddingSet {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> x, x_s, x_d;

  const std::vector<double>& of(EmbeddingKind kind) const;
  std::vector<double> row(EmbeddingKind kind, std::size_t i) const;
};

EmbeddingSet extract_embeddings(Model& model, const Corpus& corpus);

ScoreSet run_trials(const EmbeddingSet& emb, const std::vector<Trial>& trials,
                    EmbeddingKind kind);

// single linear layer + softmax trained on a deterministic split; returns
// held-out accuracy
double linear_probe(const std::vector<double>& emb, std::size_t n, std::size_t d,
                    const std::vector<std::size_t>& labels, std::size_t classes,
                    double held_out_fraction, std::uint64_t seed);

// rows: utt_id speaker_id device_id, D floats of x_s, D floats of x_d;
// echo lines are written first, `#`-commented
void export_embeddings(const EmbeddingSet& emb, const Corpus& corpus, const std::string& path,
                       const std::vector<std::string>& echo = {});

}  // namespace disent
