#pragma once

#include <cstdint>
#include <string>

#include "disent/rng.hpp"
#include "disent/tensor.hpp"

namespace disent {

struct CorpusSpec {
  std::size_t num_speakers = 20;
  std::size_t num_devices = 3;
  std::size_t utts_per_pair = 10;  // utterances per (speaker, device)
  std::size_t feat_dim = 8;        // F
  std::size_t frames = 20;         // T
  double speaker_scale = 1.0;
  double device_scale = 0.5;
  double noise_scale = 0.3;
  std::uint64_t seed = 1;
  // 0 derives utterance noise from `seed`; any other value redraws the noise
  // while keeping the same speaker/device latents (held-out eval corpora)
  std::uint64_t utterance_seed = 0;
};

void validate_spec(const CorpusSpec& spec);

struct Utterance {
  std::vector<double> features;  // [F x T] row-major
  std::size_t speaker = 0;
  std::size_t device = 0;
};

struct Corpus {
  CorpusSpec spec;
  std::vector<Utterance> utts;
  std::vector<std::vector<std::size_t>> by_speaker;  // utterance ids per speaker
};

// Latent-factor generator: speaker latent z_s ~ N(0, speaker_scale^2 I_F),
// device gain g_d = 1 + device_scale * gamma_d and offset b_d = device_scale
// * delta_d (gamma, delta standard normal), utterance frame t:
//   column_t = g_d (*) (z_s + noise_scale * eps_t) + b_d.
Corpus generate_corpus(const CorpusSpec& spec);

struct Batch {
  Tensor features;  // [2n x F*T] leaf; rows 2i and 2i+1 are a speaker pair
  std::vector<std::size_t> speakers;  // per row
  std::vector<std::size_t> devices;   // per row
};

// n_speakers distinct speakers, two distinct utterances each
Batch sample_batch(const Corpus& corpus, std::size_t n_speakers, Rng& rng);

// features of the listed utterances as a [n x F*T] leaf (whole corpus if
// indices is empty)
Tensor corpus_features(const Corpus& corpus, const std::vector<std::size_t>& indices = {});

// per-dimension y = rho x + sqrt(1 - rho^2) eps, x and eps standard normal
void gaussian_pair_stream(const std::vector<double>& rho, std::size_t n, std::uint64_t seed,
                          std::vector<double>& x, std::vector<double>& y);

// binary corpus container + text manifest (`utt_id speaker_id device_id`)
void save_corpus(const Corpus& corpus, const std::string& path, const std::string& manifest_path);
Corpus load_corpus(const std::string& path);

}  // namespace disent
