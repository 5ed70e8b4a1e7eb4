#include "disent/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "disent/optim.hpp"

namespace disent {

namespace {

// (threshold, FAR, FRR) triples over the standard sweep
struct SweepPoint {
  double threshold, far, frr;
};

std::vector<SweepPoint> threshold_sweep(const ScoreSet& s) {
  validate_scores(s);
  const std::size_t n = s.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&s](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  double n_target = 0, n_nontarget = 0;
  for (bool t : s.is_target) (t ? n_target : n_nontarget) += 1.0;

  std::vector<double> thresholds;
  thresholds.push_back(s.scores[order.front()] - 1.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double lo = s.scores[order[i - 1]], hi = s.scores[order[i]];
    if (hi > lo) thresholds.push_back(lo + 0.5 * (hi - lo));
  }
  thresholds.push_back(s.scores[order.back()] + 1.0);

  // walking the sorted scores once per ascending threshold
  std::vector<SweepPoint> sweep;
  sweep.reserve(thresholds.size());
  std::size_t pos = 0;
  double rejected_targets = 0, rejected_nontargets = 0;
  for (double t : thresholds) {
    while (pos < n && s.scores[order[pos]] < t) {
      (s.is_target[order[pos]] ? rejected_targets : rejected_nontargets) += 1.0;
      ++pos;
    }
    sweep.push_back({t, 1.0 - rejected_nontargets / n_nontarget, rejected_targets / n_target});
  }
  return sweep;
}

}  // namespace

void validate_scores(const ScoreSet& s) {
  if (s.scores.size() != s.is_target.size()) throw ShapeError("scores: label length mismatch");
  if (s.scores.size() < 2) throw ConfigError("scores: need at least 2 trials");
  bool any_target = false, any_nontarget = false;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    if (!std::isfinite(s.scores[i])) throw NumericError("scores: non-finite score");
    (s.is_target[i] ? any_target : any_nontarget) = true;
  }
  if (!any_target || !any_nontarget) {
    throw ConfigError("scores: both target and nontarget trials required");
  }
}

double cosine_score(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("cosine_score: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw NumericError("cosine_score: zero-norm embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::pair<double, double> compute_eer(const ScoreSet& s) {
  const auto sweep = threshold_sweep(s);
  // FRR - FAR is nondecreasing along the ascending sweep: find the crossing
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const double d = sweep[k].frr - sweep[k].far;
    if (d >= 0.0) {
      if (d == 0.0 || k == 0) return {sweep[k].far, sweep[k].threshold};
      const double d_prev = sweep[k - 1].frr - sweep[k - 1].far;
      const double alpha = -d_prev / (d - d_prev);
      const double eer = sweep[k - 1].far + alpha * (sweep[k].far - sweep[k - 1].far);
      const double thr =
          sweep[k - 1].threshold + alpha * (sweep[k].threshold - sweep[k - 1].threshold);
      return {eer, thr};
    }
  }
  return {sweep.back().far, sweep.back().threshold};  // unreachable: d = 1 at the top sentinel
}

std::pair<double, double> compute_mindcf(const ScoreSet& s, double c_miss, double c_fa,
                                         double p_target, bool normalize) {
  if (c_miss <= 0 || c_fa <= 0 || p_target <= 0 || p_target >= 1) {
    throw ConfigError("mindcf: need positive costs and p_target in (0, 1)");
  }
  const auto sweep = threshold_sweep(s);
  double best = std::numeric_limits<double>::infinity(), best_thr = 0;
  for (const auto& p : sweep) {
    const double dcf = c_miss * p_target * p.frr + c_fa * (1.0 - p_target) * p.far;
    if (dcf < best) {
      best = dcf;
      best_thr = p.threshold;
    }
  }
  if (normalize) best /= std::min(p_target, 1.0 - p_target);
  return {best, best_thr};
}

std::vector<Trial> load_trials(const std::string& path, std::size_t corpus_size) {
  std::ifstream is(path);
  if (!is) throw IoError("trials: cannot open: " + path);
  std::vector<Trial> trials;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string label;
    unsigned long long enroll = 0, test = 0;
    if (!(row >> label >> enroll >> test) || (label != "target" && label != "nontarget")) {
      throw IoError("trials: malformed line " + std::to_string(line_no) + " in " + path);
    }
    if (enroll >= corpus_size || test >= corpus_size) {
      throw ConfigError("trials: utterance id out of range at line " + std::to_string(line_no));
    }
    trials.push_back({label == "target", static_cast<std::size_t>(enroll),
                      static_cast<std::size_t>(test)});
  }
  if (trials.empty()) throw ConfigError("trials: empty protocol: " + path);
  return trials;
}

void save_trials(const std::vector<Trial>& trials, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("trials: cannot open for writing: " + path);
  for (const auto& t : trials) {
    os << (t.target ? "target" : "nontarget") << " " << t.enroll << " " << t.test << "\n";
  }
  if (!os) throw IoError("trials: write failed: " + path);
}

std::vector<Trial> make_trial_protocol(const Corpus& corpus, std::size_t n_trials,
                                       std::uint64_t seed) {
  if (n_trials < 2) throw ConfigError("trials: need at least 2");
  if (corpus.spec.num_speakers < 2) throw ConfigError("trials: need at least 2 speakers");
  Rng rng(mix_seed(seed, "trials", 0));
  std::vector<Trial> trials;
  trials.reserve(n_trials);
  const std::size_t s_total = corpus.spec.num_speakers;
  for (std::size_t i = 0; i < n_trials; ++i) {
    Trial t;
    t.target = i % 2 == 0;
    if (t.target) {
      const auto& utts = corpus.by_speaker[rng.below(s_total)];
      if (utts.size() < 2) throw ConfigError("trials: speaker has fewer than 2 utterances");
      const std::size_t a = rng.below(utts.size());
      std::size_t b = rng.below(utts.size() - 1);
      if (b >= a) ++b;
      t.enroll = utts[a];
      t.test = utts[b];
    } else {
      const std::size_t sa = rng.below(s_total);
      std::size_t sb = rng.below(s_total - 1);
      if (sb >= sa) ++sb;
      t.enroll = corpus.by_speaker[sa][rng.below(corpus.by_speaker[sa].size())];
      t.test = corpus.by_speaker[sb][rng.below(corpus.by_speaker[sb].size())];
    }
    trials.push_back(t);
  }
  return trials;
}

EmbeddingKind embedding_kind_from(const std::string& name) {
  if (name == "x") return EmbeddingKind::initial;
  if (name == "xs") return EmbeddingKind::speaker;
  if (name == "xd") return EmbeddingKind::device;
  throw ConfigError("embedding kind must be one of x, xs, xd: " + name);
}

const std::vector<double>& EmbeddingSet::of(EmbeddingKind kind) const {
  switch (kind) {
    case EmbeddingKind::initial: return x;
    case EmbeddingKind::speaker: return x_s;
    default: return x_d;
  }
}

std::vector<double> EmbeddingSet::row(EmbeddingKind kind, std::size_t i) const {
  const auto& src = of(kind);
  if ((i + 1) * dim > src.size()) throw ShapeError("embedding row out of range");
  return {src.begin() + static_cast<std::ptrdiff_t>(i * dim),
          src.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim)};
}

EmbeddingSet extract_embeddings(Model& model, const Corpus& corpus) {
  EmbeddingSet out;
  out.count = corpus.utts.size();
  out.dim = model.cfg.emb_dim;
  Tensor feats = corpus_features(corpus);
  Tensor x = model.encode(feats, /*training=*/false);
  auto [xs, xd] = model.decouple(x, /*training=*/false);
  out.x = x.values();
  out.x_s = xs.values();
  out.x_d = xd.values();
  return out;
}

ScoreSet run_trials(const EmbeddingSet& emb, const std::vector<Trial>& trials,
                    EmbeddingKind kind) {
  ScoreSet scores;
  scores.scores.reserve(trials.size());
  scores.is_target.reserve(trials.size());
  for (const auto& t : trials) {
    scores.scores.push_back(cosine_score(emb.row(kind, t.enroll), emb.row(kind, t.test)));
    scores.is_target.push_back(t.target);
  }
  return scores;
}

double linear_probe(const std::vector<double>& emb, std::size_t n, std::size_t d,
                    const std::vector<std::size_t>& labels, std::size_t classes,
                    double held_out_fraction, std::uint64_t seed) {
  if (emb.size() != n * d || labels.size() != n) throw ShapeError("probe: size mismatch");
  if (classes < 2) throw ConfigError("probe: need at least 2 classes");
  if (held_out_fraction <= 0.0 || held_out_fraction >= 1.0) {
    throw ConfigError("probe: held-out fraction must be in (0, 1)");
  }
  for (std::size_t y : labels)
    if (y >= classes) throw ConfigError("probe: label out of range");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, "probe-split", 0));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  const std::size_t n_held = std::max<std::size_t>(1, static_cast<std::size_t>(
                                 std::floor(held_out_fraction * static_cast<double>(n))));
  const std::size_t n_train = n - n_held;
  if (n_train < classes) throw ConfigError("probe: too few training rows");

  std::vector<double> train_x(n_train * d), held_x(n_held * d);
  std::vector<std::size_t> train_y(n_train), held_y(n_held);
  std::vector<bool> seen(classes, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order[i];
    if (i < n_train) {
      std::copy_n(emb.begin() + static_cast<std::ptrdiff_t>(src * d), d,
                  train_x.begin() + static_cast<std::ptrdiff_t>(i * d));
      train_y[i] = labels[src];
      seen[labels[src]] = true;
    } else {
      const std::size_t j = i - n_train;
      std::copy_n(emb.begin() + static_cast<std::ptrdiff_t>(src * d), d,
                  held_x.begin() + static_cast<std::ptrdiff_t>(j * d));
      held_y[j] = labels[src];
    }
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (!seen[c]) throw ConfigError("probe: class absent from training split");

  Rng init_rng(mix_seed(seed, "probe-init", 0));
  Tensor w = xavier_uniform(classes, d, init_rng);
  Tensor b = Tensor::zeros({classes}, true);
  Tensor tx = Tensor::from({n_train, d}, train_x);
  AdamConfig acfg;
  acfg.lr = 0.05;
  Adam opt({w, b}, acfg);
  for (int step = 0; step < 300; ++step) {
    Tensor logits = add_row(matmul_nt(tx, w), b);
    Tensor loss = pick(logits.log_softmax(), train_y).mean() * -1.0;
    loss.backward();
    opt.step();
  }

  Tensor hx = Tensor::from({n_held, d}, held_x);
  Tensor logits = add_row(matmul_nt(hx, w.detached()), b.detached());
  const auto& lv = logits.values();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n_held; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
      if (lv[i * classes + c] > lv[i * classes + best]) best = c;
    if (best == held_y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n_held);
}

void export_embeddings(const EmbeddingSet& emb, const Corpus& corpus, const std::string& path,
                       const std::vector<std::string>& echo) {
  if (emb.count != corpus.utts.size()) throw ShapeError("export: embedding/corpus size mismatch");
  std::ofstream os(path);
  if (!os) throw IoError("export: cannot open for writing: " + path);
  for (const auto& line : echo) os << "# " << line << "\n";
  os << "# utt_id speaker_id device_id x_s[" << emb.dim << "] x_d[" << emb.dim << "]\n";
  char num[64];
  for (std::size_t i = 0; i < emb.count; ++i) {
    os << i << " " << corpus.utts[i].speaker << " " << corpus.utts[i].device;
    for (std::size_t k = 0; k < emb.dim; ++k) {
      std::snprintf(num, sizeof(num), " %.17g", emb.x_s[i * emb.dim + k]);
      os << num;
    }
    for (std::size_t k = 0; k < emb.dim; ++k) {
      std::snprintf(num, sizeof(num), " %.17g", emb.x_d[i * emb.dim + k]);
      os << num;
    }
    os << "\n";
  }
  if (!os) throw IoError("export: write failed: " + path);
}

}  // namespace disent
