#include "disent/trainer.hpp"

#include <cstdio>
#include <fstream>

#include "disent/mi.hpp"

namespace disent {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const unsigned char* data, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, bool append, const std::vector<std::string>& echo) {
    if (path.empty()) return;
    os_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!os_) throw IoError("metrics: cannot open for writing: " + path);
    if (!append) {
      for (const auto& line : echo) os_ << "# " << line << "\n";
      os_ << "# step epoch lr l_cls_s l_cls_d mi_xs_xd mi_xd_ys mi_xs_yd total\n";
    }
  }

  void row(const MetricsRow& r) {
    if (!os_.is_open()) return;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.0f %.0f", r[0], r[1]);
    os_ << buf;
    for (std::size_t i = 2; i < r.size(); ++i) {
      std::snprintf(buf, sizeof(buf), " %.17g", r[i]);
      os_ << buf;
    }
    os_ << "\n";
    if (!os_) throw IoError("metrics: write failed");
  }

  void flush() {
    if (os_.is_open()) os_.flush();
  }

 private:
  std::ofstream os_;
};

void add_optimizer_arrays(Checkpoint& ckpt, const std::string& tag, Adam& opt,
                          const ParamList& params) {
  auto& m = opt.moments1();
  auto& v = opt.moments2();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.add("optim." + tag + ".m." + params[i].name, m[i]);
    ckpt.add("optim." + tag + ".v." + params[i].name, v[i]);
  }
  ckpt.add("optim." + tag + ".step", {static_cast<double>(opt.step_count())});
}

void restore_optimizer_arrays(const Checkpoint& ckpt, const std::string& tag, Adam& opt,
                              const ParamList& params) {
  auto& m = opt.moments1();
  auto& v = opt.moments2();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* ma = ckpt.find("optim." + tag + ".m." + params[i].name);
    const auto* va = ckpt.find("optim." + tag + ".v." + params[i].name);
    if (!ma || !va || ma->size() != m[i].size() || va->size() != v[i].size()) {
      throw IoError("checkpoint: optimizer state mismatch for " + params[i].name);
    }
    m[i] = *ma;
    v[i] = *va;
  }
  const auto* step = ckpt.find("optim." + tag + ".step");
  if (!step || step->size() != 1) throw IoError("checkpoint: missing optimizer step counter");
  opt.set_step_count(static_cast<std::int64_t>((*step)[0]));
}

AdamConfig main_adam(const TrainConfig& cfg) {
  AdamConfig a;
  a.lr = cfg.schedule.eta_max;
  a.weight_decay = cfg.weight_decay;
  return a;
}

AdamConfig phi_adam(const TrainConfig& cfg) {
  AdamConfig a;
  a.lr = cfg.phi_lr;
  a.weight_decay = cfg.weight_decay;
  return a;
}

std::vector<std::size_t> stride2(std::size_t n, std::size_t offset) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = 2 * i + offset;
  return idx;
}

}  // namespace

std::uint64_t param_checksum(const ParamList& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    const auto& v = p.tensor.values();
    h = fnv1a(h, reinterpret_cast<const unsigned char*>(v.data()), v.size() * sizeof(double));
  }
  return h;
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.m_inner < 1) throw ConfigError("train: m_inner must be >= 1");
  if (cfg.speakers_per_batch < 2) throw ConfigError("train: speakers_per_batch must be >= 2");
  if (cfg.batches_per_epoch < 1) throw ConfigError("train: batches_per_epoch must be >= 1");
  if (cfg.clip_norm <= 0) throw ConfigError("train: clip_norm must be positive");
  if (cfg.phi_lr <= 0) throw ConfigError("train: phi_lr must be positive");
  if (cfg.weight_decay < 0) throw ConfigError("train: weight decay must be nonnegative");
  if (cfg.schedule.cycle_epochs < 1) throw ConfigError("train: cycle_epochs must be >= 1");
  if (cfg.schedule.eta_min > cfg.schedule.eta_max) {
    throw ConfigError("train: eta_min must not exceed eta_max");
  }
  if (cfg.weights.cls_s < 0 || cfg.weights.cls_d < 0 || cfg.weights.mi1 < 0 ||
      cfg.weights.mi2 < 0 || cfg.weights.mi3 < 0) {
    throw ConfigError("train: loss weights must be nonnegative");
  }
}

FinetuneRun::FinetuneRun(Model& model, const Corpus& corpus, const TrainConfig& cfg)
    : model_(model),
      corpus_(corpus),
      cfg_(cfg),
      theta_opt_(tensors_of(model.theta_params()), main_adam(cfg)),
      phi1_opt_(tensors_of(model.phi1_params()), phi_adam(cfg)),
      phi2_opt_(tensors_of(model.phi2_params()), phi_adam(cfg)),
      phi3_opt_(tensors_of(model.phi3_params()), phi_adam(cfg)) {
  validate_train_config(cfg_);
  if (corpus.spec.num_speakers != model.cfg.num_speakers ||
      corpus.spec.num_devices != model.cfg.num_devices) {
    throw ConfigError("train: corpus label ranges do not match the model heads");
  }
}

void FinetuneRun::init_encoder_from(const std::string& checkpoint_path) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (!has_group(ckpt.header, "encoder")) {
    throw IoError("checkpoint: no encoder group in " + checkpoint_path);
  }
  const ModelConfig& m = ckpt.header.model;
  if (m.feat_dim != model_.cfg.feat_dim || m.frames != model_.cfg.frames ||
      m.emb_dim != model_.cfg.emb_dim || m.enc_hidden != model_.cfg.enc_hidden) {
    throw IoError("checkpoint: encoder dimensions do not match the model");
  }
  restore_group(model_, ckpt, "encoder");
}

void FinetuneRun::resume_from(const std::string& checkpoint_path) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const ModelConfig& m = ckpt.header.model;
  if (m.feat_dim != model_.cfg.feat_dim || m.frames != model_.cfg.frames ||
      m.emb_dim != model_.cfg.emb_dim || m.enc_hidden != model_.cfg.enc_hidden ||
      m.phi_hidden != model_.cfg.phi_hidden ||
      m.num_speakers != model_.cfg.num_speakers || m.num_devices != model_.cfg.num_devices) {
    throw IoError("checkpoint: dimensions do not match the model");
  }
  for (const char* g : {"encoder", "decoupler", "classifier", "phi1", "phi2", "phi3"}) {
    if (!has_group(ckpt.header, g)) {
      throw IoError(std::string("checkpoint: cannot resume, missing group ") + g);
    }
    restore_group(model_, ckpt, g);
  }
  restore_optimizer_arrays(ckpt, "theta", theta_opt_, model_.theta_params());
  restore_optimizer_arrays(ckpt, "phi1", phi1_opt_, model_.phi1_params());
  restore_optimizer_arrays(ckpt, "phi2", phi2_opt_, model_.phi2_params());
  restore_optimizer_arrays(ckpt, "phi3", phi3_opt_, model_.phi3_params());
  start_epoch_ = ckpt.header.epochs_done;
}

void FinetuneRun::save_state(const std::string& path, std::size_t epochs_done) {
  Checkpoint ckpt;
  ckpt.header.model = model_.cfg;
  ckpt.header.groups = {"encoder", "decoupler", "classifier", "phi1", "phi2", "phi3"};
  ckpt.header.epochs_done = epochs_done;
  ckpt.header.seed = cfg_.seed;
  ckpt.header.objective = cfg_.objective;
  for (const auto& g : ckpt.header.groups) snapshot_group(model_, g, ckpt);
  add_optimizer_arrays(ckpt, "theta", theta_opt_, model_.theta_params());
  add_optimizer_arrays(ckpt, "phi1", phi1_opt_, model_.phi1_params());
  add_optimizer_arrays(ckpt, "phi2", phi2_opt_, model_.phi2_params());
  add_optimizer_arrays(ckpt, "phi3", phi3_opt_, model_.phi3_params());
  save_checkpoint(ckpt, path);
}

TrainResult FinetuneRun::run() {
  TrainResult result;
  MetricsWriter metrics(cfg_.metrics_path, start_epoch_ > 0, cfg_.config_echo);
  for (std::size_t e = start_epoch_; e < cfg_.epochs; ++e) {
    Rng rng(mix_seed(cfg_.seed, "epoch", e));
    for (std::size_t b = 0; b < cfg_.batches_per_epoch; ++b) {
      const std::size_t step = e * cfg_.batches_per_epoch + b;
      run_batch(step, e, b, rng, result);
      metrics.row(result.metrics.back());
    }
    metrics.flush();
    ++result.epochs_run;
    if (!cfg_.checkpoint_path.empty()) save_state(cfg_.checkpoint_path, e + 1);
  }
  return result;
}

void FinetuneRun::run_batch(std::size_t step, std::size_t epoch, std::size_t step_in_epoch,
                            Rng& rng, TrainResult& result) {
  const double lr = sgdr_lr_at(epoch, step_in_epoch, cfg_.batches_per_epoch, cfg_.schedule);
  theta_opt_.set_lr(lr);

  Batch batch = sample_batch(corpus_, cfg_.speakers_per_batch, rng);
  Tensor x = model_.encode(batch.features, /*training=*/true);
  auto [xs, xd] = model_.decouple(x, /*training=*/true);
  Tensor xs_frozen = xs.detached(), xd_frozen = xd.detached();

  const std::uint64_t theta_before =
      cfg_.debug_isolation ? param_checksum(model_.theta_params()) : 0;
  for (std::size_t m = 0; m < cfg_.m_inner; ++m) {
    nll_gaussian(xs_frozen, xd_frozen, model_.phi1).backward();
    clip_grad_norm(tensors_of(model_.phi1_params()), cfg_.clip_norm);
    phi1_opt_.step();
    nll_categorical(xd_frozen, batch.speakers, model_.phi2).backward();
    clip_grad_norm(tensors_of(model_.phi2_params()), cfg_.clip_norm);
    phi2_opt_.step();
    nll_categorical(xs_frozen, batch.devices, model_.phi3).backward();
    clip_grad_norm(tensors_of(model_.phi3_params()), cfg_.clip_norm);
    phi3_opt_.step();
  }
  if (cfg_.debug_isolation && param_checksum(model_.theta_params()) != theta_before) {
    ++result.isolation_violations;
  }

  std::uint64_t phi_before = 0;
  if (cfg_.debug_isolation) {
    phi_before = param_checksum(model_.phi1_params()) ^ param_checksum(model_.phi2_params()) ^
                 param_checksum(model_.phi3_params());
  }
  const std::size_t half = batch.speakers.size() / 2;
  Tensor aam = aam_softmax_loss(xs, batch.speakers, model_.spk_cls.weight, cfg_.margin.scale,
                                cfg_.margin.margin);
  Tensor ap = angular_prototypical_loss(take_rows(xs, stride2(half, 0)),
                                        take_rows(xs, stride2(half, 1)), model_.ap.scale,
                                        model_.ap.bias);
  Tensor l_cls_s = aam + ap;
  Tensor l_cls_d = aam_softmax_loss(xd, batch.devices, model_.dev_cls.weight, cfg_.margin.scale,
                                    cfg_.margin.margin);
  Tensor mi1 = vclub_embedding_graph(xs, xd, model_.phi1);
  Tensor mi2 = vclub_label_graph(xd, batch.speakers, model_.phi2);
  Tensor mi3 = vclub_label_graph(xs, batch.devices, model_.phi3);
  Tensor total = total_loss(l_cls_s, l_cls_d, mi1, mi2, mi3, cfg_.weights);
  if (total.requires_grad()) total.backward();
  clip_grad_norm(tensors_of(model_.theta_params()), cfg_.clip_norm);
  theta_opt_.step();
  if (cfg_.debug_isolation) {
    const std::uint64_t phi_after = param_checksum(model_.phi1_params()) ^
                                    param_checksum(model_.phi2_params()) ^
                                    param_checksum(model_.phi3_params());
    if (phi_after != phi_before) ++result.isolation_violations;
  }

  result.metrics.push_back({static_cast<double>(step), static_cast<double>(epoch), lr,
                            l_cls_s.item(), l_cls_d.item(), mi1.item(), mi2.item(), mi3.item(),
                            total.item()});
}

TrainResult pretrain_encoder(Model& model, const Corpus& corpus, const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (corpus.spec.num_speakers != model.cfg.num_speakers) {
    throw ConfigError("pretrain: corpus speakers do not match the classifier head");
  }
  ParamList params;
  ParamList buffers;
  model.encoder.collect(params, buffers);
  params.push_back({"classifier.spk.weight", model.spk_cls.weight});
  params.push_back({"classifier.ap.scale", model.ap.scale});
  params.push_back({"classifier.ap.bias", model.ap.bias});
  Adam opt(tensors_of(params), main_adam(cfg));

  std::size_t start_epoch = 0;
  const std::string state_path =
      cfg.checkpoint_path.empty() ? std::string{} : cfg.checkpoint_path + ".state";
  auto save_state = [&](std::size_t epochs_done) {
    if (state_path.empty()) return;
    Checkpoint state;
    state.header.model = model.cfg;
    state.header.groups = {"encoder", "classifier"};
    state.header.epochs_done = epochs_done;
    state.header.seed = cfg.seed;
    state.header.objective = "pretrain";
    snapshot_group(model, "encoder", state);
    for (const auto& p : params)
      if (p.name.rfind("classifier.", 0) == 0) state.add(p.name, p.tensor.values());
    add_optimizer_arrays(state, "pretrain", opt, params);
    save_checkpoint(state, state_path);
  };
  if (!state_path.empty()) {
    std::ifstream probe(state_path, std::ios::binary);
    if (probe.good()) {
      Checkpoint state = load_checkpoint(state_path);
      if (state.header.model.feat_dim != model.cfg.feat_dim ||
          state.header.model.emb_dim != model.cfg.emb_dim ||
          state.header.model.num_speakers != model.cfg.num_speakers) {
        throw IoError("pretrain: resume state dimensions do not match");
      }
      restore_group(model, state, "encoder");
      for (auto& p : params) {
        if (p.name.rfind("classifier.", 0) != 0) continue;
        const auto* stored = state.find(p.name);
        if (!stored || stored->size() != p.tensor.numel()) {
          throw IoError("pretrain: resume state missing " + p.name);
        }
        p.tensor.values_mut() = *stored;
      }
      restore_optimizer_arrays(state, "pretrain", opt, params);
      start_epoch = state.header.epochs_done;
    }
  }

  TrainResult result;
  MetricsWriter metrics(cfg.metrics_path, start_epoch > 0, cfg.config_echo);
  for (std::size_t e = start_epoch; e < cfg.epochs; ++e) {
    Rng rng(mix_seed(cfg.seed, "epoch", e));
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
      const double lr = sgdr_lr_at(e, b, cfg.batches_per_epoch, cfg.schedule);
      opt.set_lr(lr);
      Batch batch = sample_batch(corpus, cfg.speakers_per_batch, rng);
      Tensor x = model.encode(batch.features, /*training=*/true);
      const std::size_t half = batch.speakers.size() / 2;
      Tensor aam = aam_softmax_loss(x, batch.speakers, model.spk_cls.weight, cfg.margin.scale,
                                    cfg.margin.margin);
      Tensor ap = angular_prototypical_loss(take_rows(x, stride2(half, 0)),
                                            take_rows(x, stride2(half, 1)), model.ap.scale,
                                            model.ap.bias);
      Tensor loss = aam + ap;
      loss.backward();
      clip_grad_norm(tensors_of(params), cfg.clip_norm);
      opt.step();
      const std::size_t step = e * cfg.batches_per_epoch + b;
      result.metrics.push_back({static_cast<double>(step), static_cast<double>(e), lr,
                                loss.item(), 0.0, 0.0, 0.0, 0.0, loss.item()});
      metrics.row(result.metrics.back());
    }
    metrics.flush();
    ++result.epochs_run;
    save_state(e + 1);
  }

  if (!cfg.checkpoint_path.empty()) {
    Checkpoint ckpt;
    ckpt.header.model = model.cfg;
    ckpt.header.groups = {"encoder"};
    ckpt.header.epochs_done = cfg.epochs;
    ckpt.header.seed = cfg.seed;
    ckpt.header.objective = "pretrain";
    snapshot_group(model, "encoder", ckpt);
    save_checkpoint(ckpt, cfg.checkpoint_path);
  }
  return result;
}

}  // namespace disent
