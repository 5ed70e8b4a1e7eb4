#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "disent/checkpoint.hpp"
#include "disent/config.hpp"
#include "disent/eval.hpp"
#include "disent/mireport.hpp"
#include "disent/trainer.hpp"

namespace {

using namespace disent;

bool log_enabled() {
  const char* v = std::getenv("DISENT_LOG");
  return v && *v && std::string(v) != "0";
}

void log_line(const std::string& msg) {
  if (log_enabled()) std::cerr << "[disent] " << msg << "\n";
}

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string seed;       // empty when not given
  std::string objective;  // empty when not given
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config_path, "key=value settings file");
  cmd->add_option("--set", c.overrides, "override a settings key (key=value, repeatable)");
  cmd->add_option("--seed", c.seed, "master seed (settings key `seed`)");
  cmd->add_option("--objective", c.objective,
                  "objective preset: embed_only|cls_s|cls_sd|cls_sd_m1|cls_sd_m23|full");
}

Config merged_config(const CommonOpts& c) {
  Config cfg;
  if (!c.config_path.empty()) cfg = load_config(c.config_path);
  for (const auto& assignment : c.overrides) apply_assignment(cfg, assignment);
  if (!c.seed.empty()) cfg.set("seed", c.seed);
  if (!c.objective.empty()) cfg.set("objective", c.objective);
  for (const auto& line : cfg.echo_lines()) log_line("config " + line);
  return cfg;
}

ModelConfig model_config_for(const Config& cfg, const Corpus& corpus) {
  ModelConfig m = model_config_from(cfg);
  m.feat_dim = corpus.spec.feat_dim;
  m.frames = corpus.spec.frames;
  m.num_speakers = corpus.spec.num_speakers;
  m.num_devices = corpus.spec.num_devices;
  return m;
}

// restore whatever groups the checkpoint carries and rebuild a model around
// its stored dimensions
Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model model(ckpt.header.model, ckpt.header.seed);
  for (const auto& g : ckpt.header.groups) restore_group(model, ckpt, g);
  return model;
}

void require_corpus_match(const Corpus& corpus, const ModelConfig& m) {
  if (corpus.spec.feat_dim != m.feat_dim || corpus.spec.frames != m.frames) {
    throw ConfigError("corpus feature geometry does not match the checkpoint");
  }
  if (corpus.spec.num_speakers > m.num_speakers || corpus.spec.num_devices > m.num_devices) {
    throw ConfigError("corpus labels exceed the checkpoint's classifier heads");
  }
}

int cmd_gen_data(const CommonOpts& common, const std::string& out,
                 const std::string& manifest, const std::string& trials_path,
                 std::size_t n_trials) {
  Config cfg = merged_config(common);
  CorpusSpec spec = corpus_spec_from(cfg);
  Corpus corpus = generate_corpus(spec);
  const std::string manifest_path = manifest.empty() ? out + ".manifest" : manifest;
  save_corpus(corpus, out, manifest_path);
  if (!trials_path.empty()) {
    auto trials = make_trial_protocol(corpus, n_trials, spec.seed);
    save_trials(trials, trials_path);
    log_line("wrote " + std::to_string(trials.size()) + " trials to " + trials_path);
  }
  std::cout << "corpus " << out << " utterances " << corpus.utts.size() << " speakers "
            << spec.num_speakers << " devices " << spec.num_devices << "\n";
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& data, const std::string& mode,
              const std::string& out, const std::string& metrics,
              const std::string& init_encoder, const std::string& resume) {
  Config cfg = merged_config(common);
  Corpus corpus = load_corpus(data);
  ModelConfig mcfg = model_config_for(cfg, corpus);

  TrainConfig tcfg = train_config_from(cfg, mode == "pretrain" ? pretrain_defaults()
                                                               : TrainConfig{});
  tcfg.metrics_path = metrics;
  tcfg.checkpoint_path = out;

  Model model(mcfg, tcfg.seed);
  TrainResult result;
  if (mode == "pretrain") {
    if (!init_encoder.empty() || !resume.empty()) {
      throw ConfigError("train: pretrain resumes from its own state file; "
                        "--init-encoder/--resume do not apply");
    }
    result = pretrain_encoder(model, corpus, tcfg);
  } else if (mode == "finetune") {
    FinetuneRun run(model, corpus, tcfg);
    if (!init_encoder.empty() && !resume.empty()) {
      throw ConfigError("train: --init-encoder and --resume are mutually exclusive");
    }
    if (!init_encoder.empty()) run.init_encoder_from(init_encoder);
    if (!resume.empty()) run.resume_from(resume);
    result = run.run();
  } else {
    throw ConfigError("train: mode must be pretrain or finetune");
  }

  if (!result.metrics.empty()) {
    const MetricsRow& last = result.metrics.back();
    std::printf("trained epochs %zu steps %zu total %.6f cls_s %.6f cls_d %.6f\n",
                result.epochs_run, result.metrics.size(), last[8], last[3], last[4]);
  } else {
    std::printf("trained epochs 0 steps 0 (nothing left to run)\n");
  }
  if (tcfg.debug_isolation) {
    std::printf("isolation_violations %zu\n", result.isolation_violations);
  }
  return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& data, const std::string& ckpt_path,
             const std::string& trials_path, const std::string& embedding,
             const std::string& probe, std::size_t n_trials, const std::string& report) {
  Config cfg = merged_config(common);
  Corpus corpus = load_corpus(data);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  require_corpus_match(corpus, ckpt.header.model);
  const EmbeddingKind kind = embedding_kind_from(embedding);
  if (kind != EmbeddingKind::initial && !has_group(ckpt.header, "decoupler")) {
    throw ConfigError("eval: checkpoint has no decoupler group; only --embedding x works");
  }
  Model model = model_from_checkpoint(ckpt);

  EmbeddingSet emb = extract_embeddings(model, corpus);
  std::vector<Trial> trials = trials_path.empty()
                                  ? make_trial_protocol(corpus, n_trials,
                                                        cfg.get_u64("seed", 1))
                                  : load_trials(trials_path, corpus.utts.size());
  ScoreSet scores = run_trials(emb, trials, kind);
  auto [eer, eer_thr] = compute_eer(scores);
  auto [dcf, dcf_thr] = compute_mindcf(scores);

  std::vector<std::string> lines;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "trials %zu embedding %s", trials.size(), embedding.c_str());
  lines.emplace_back(buf);
  std::snprintf(buf, sizeof(buf), "eer %.6f threshold %.6f", eer, eer_thr);
  lines.emplace_back(buf);
  std::snprintf(buf, sizeof(buf), "mindcf %.6f threshold %.6f", dcf, dcf_thr);
  lines.emplace_back(buf);

  if (!probe.empty() && probe != "none") {
    std::vector<std::size_t> labels(corpus.utts.size());
    std::size_t classes = 0;
    if (probe == "speaker") {
      for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = corpus.utts[i].speaker;
      classes = corpus.spec.num_speakers;
    } else if (probe == "device") {
      for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = corpus.utts[i].device;
      classes = corpus.spec.num_devices;
    } else {
      throw ConfigError("eval: probe must be none, speaker, or device");
    }
    const double acc = linear_probe(emb.of(kind), emb.count, emb.dim, labels, classes, 0.2,
                                    cfg.get_u64("seed", 1));
    std::snprintf(buf, sizeof(buf), "probe %s %s %.6f", probe.c_str(), embedding.c_str(), acc);
    lines.emplace_back(buf);
  }

  for (const auto& line : lines) std::cout << line << "\n";
  if (!report.empty()) {
    std::ofstream os(report, std::ios::trunc);
    if (!os) throw IoError("eval: cannot open report " + report);
    for (const auto& line : cfg.echo_lines()) os << "# " << line << "\n";
    for (const auto& line : lines) os << line << "\n";
  }
  return 0;
}

int cmd_estimate_mi(const CommonOpts& common, MiSweepConfig sweep_cfg, std::size_t trials,
                    const std::string& out) {
  Config cfg = merged_config(common);
  if (cfg.has("seed")) sweep_cfg.seeds = {cfg.get_u64("seed", 1)};
  std::vector<MiSweepRow> rows = gaussian_sweep(sweep_cfg);
  DiscreteSuiteResult suite = discrete_bound_suite(trials, 4, sweep_cfg.seeds.front());
  write_mi_report(rows, suite, cfg.echo_lines(), out);
  for (const auto& r : rows) {
    std::printf("rho %.2f dim %zu seed %llu mi %.6f bound %.6f estimate %.6f se %.6f\n",
                r.rho, r.dim, static_cast<unsigned long long>(r.seed), r.analytic, r.bound,
                r.estimate, r.std_err);
  }
  std::printf("discrete trials %zu violations %zu\n", suite.trials, suite.violations);
  return 0;
}

int cmd_export_emb(const CommonOpts& common, const std::string& data,
                   const std::string& ckpt_path, const std::string& out) {
  Config cfg = merged_config(common);
  Corpus corpus = load_corpus(data);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  require_corpus_match(corpus, ckpt.header.model);
  if (!has_group(ckpt.header, "decoupler")) {
    throw ConfigError("export-emb: checkpoint has no decoupler group");
  }
  Model model = model_from_checkpoint(ckpt);
  EmbeddingSet emb = extract_embeddings(model, corpus);
  export_embeddings(emb, corpus, out, cfg.echo_lines());
  std::cout << "exported " << emb.count << " embeddings to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speaker/device embedding disentanglement toolkit"};
  app.require_subcommand(1);

  CommonOpts common;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  std::string gen_out, gen_manifest, gen_trials;
  std::size_t gen_n_trials = 2000;
  add_common(gen, common);
  gen->add_option("--out", gen_out, "corpus output path")->required();
  gen->add_option("--manifest", gen_manifest, "manifest path (default <out>.manifest)");
  gen->add_option("--trials", gen_trials, "also write a trial protocol here");
  gen->add_option("--num-trials", gen_n_trials, "protocol size for --trials");

  auto* train = app.add_subcommand("train", "pretrain or finetune on a corpus");
  std::string train_data, train_mode = "finetune", train_out, train_metrics;
  std::string train_init, train_resume;
  add_common(train, common);
  train->add_option("--data", train_data, "corpus path")->required();
  train->add_option("--mode", train_mode, "pretrain | finetune (default finetune)");
  train->add_option("--out", train_out, "checkpoint output path");
  train->add_option("--metrics", train_metrics, "metrics log path");
  train->add_option("--init-encoder", train_init, "load encoder weights from this checkpoint");
  train->add_option("--resume", train_resume, "resume a finetune from this checkpoint");

  auto* ev = app.add_subcommand("eval", "verification metrics on a corpus");
  std::string eval_data, eval_ckpt, eval_trials, eval_embedding = "xs", eval_probe = "none";
  std::string eval_report;
  std::size_t eval_n_trials = 2000;
  add_common(ev, common);
  ev->add_option("--data", eval_data, "corpus path")->required();
  ev->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  ev->add_option("--trials", eval_trials, "trial protocol (default: generated)");
  ev->add_option("--num-trials", eval_n_trials, "generated protocol size");
  ev->add_option("--embedding", eval_embedding, "x | xs | xd (default xs)");
  ev->add_option("--probe", eval_probe, "none | speaker | device");
  ev->add_option("--report", eval_report, "also write results to this file");

  auto* mi = app.add_subcommand("estimate-mi", "estimator-vs-oracle report");
  MiSweepConfig sweep_cfg;
  std::size_t mi_trials = 1000;
  std::string mi_out;
  add_common(mi, common);
  mi->add_option("--out", mi_out, "report output path")->required();
  mi->add_option("--rhos", sweep_cfg.rhos, "correlation sweep values");
  mi->add_option("--dims", sweep_cfg.dims, "dimension sweep values");
  mi->add_option("--fit-steps", sweep_cfg.fit_steps, "optimizer steps per fit");
  mi->add_option("--fit-batch", sweep_cfg.fit_batch, "samples per fitting step");
  mi->add_option("--est-samples", sweep_cfg.est_samples, "estimation sample count");
  mi->add_option("--hidden", sweep_cfg.hidden, "variational network width");
  mi->add_option("--lr", sweep_cfg.lr, "fit learning rate");
  mi->add_option("--discrete-trials", mi_trials, "random joints for the bound suite");

  auto* ex = app.add_subcommand("export-emb", "write per-utterance embeddings as text");
  std::string ex_data, ex_ckpt, ex_out;
  add_common(ex, common);
  ex->add_option("--data", ex_data, "corpus path")->required();
  ex->add_option("--ckpt", ex_ckpt, "checkpoint path")->required();
  ex->add_option("--out", ex_out, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_data(common, gen_out, gen_manifest, gen_trials, gen_n_trials);
    }
    if (train->parsed()) {
      return cmd_train(common, train_data, train_mode, train_out, train_metrics, train_init,
                       train_resume);
    }
    if (ev->parsed()) {
      return cmd_eval(common, eval_data, eval_ckpt, eval_trials, eval_embedding, eval_probe,
                      eval_n_trials, eval_report);
    }
    if (mi->parsed()) return cmd_estimate_mi(common, sweep_cfg, mi_trials, mi_out);
    if (ex->parsed()) return cmd_export_emb(common, ex_data, ex_ckpt, ex_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
