#include "disent/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "disent/common.hpp"

namespace disent {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'C', 'O', 'R', 'P', '0', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("corpus: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  write_u64(os, v);
}

double read_f64(std::istream& is) {
  std::uint64_t v = read_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void validate_spec(const CorpusSpec& spec) {
  if (spec.num_speakers < 2) throw ConfigError("corpus spec: need at least 2 speakers");
  if (spec.num_devices < 1) throw ConfigError("corpus spec: need at least 1 device");
  if (spec.utts_per_pair < 1) throw ConfigError("corpus spec: need utterances per pair >= 1");
  if (spec.feat_dim < 1 || spec.frames < 1) throw ConfigError("corpus spec: F and T must be >= 1");
  if (spec.speaker_scale < 0 || spec.device_scale < 0 || spec.noise_scale < 0) {
    throw ConfigError("corpus spec: scales must be nonnegative");
  }
  if (spec.num_devices * spec.utts_per_pair < 2) {
    throw ConfigError("corpus spec: each speaker needs at least 2 utterances for pairing");
  }
}

Corpus generate_corpus(const CorpusSpec& spec) {
  validate_spec(spec);
  const std::size_t f = spec.feat_dim, t = spec.frames;

  std::vector<std::vector<double>> z(spec.num_speakers, std::vector<double>(f));
  for (std::size_t s = 0; s < spec.num_speakers; ++s) {
    Rng rng(mix_seed(spec.seed, "speaker", s));
    for (double& v : z[s]) v = spec.speaker_scale * rng.normal();
  }

  std::vector<std::vector<double>> gain(spec.num_devices, std::vector<double>(f));
  std::vector<std::vector<double>> offset(spec.num_devices, std::vector<double>(f));
  for (std::size_t d = 0; d < spec.num_devices; ++d) {
    Rng rng(mix_seed(spec.seed, "device", d));
    for (std::size_t k = 0; k < f; ++k) gain[d][k] = 1.0 + spec.device_scale * rng.normal();
    for (std::size_t k = 0; k < f; ++k) offset[d][k] = spec.device_scale * rng.normal();
  }

  const std::uint64_t noise_seed = spec.utterance_seed ? spec.utterance_seed : spec.seed;
  Corpus corpus;
  corpus.spec = spec;
  corpus.utts.reserve(spec.num_speakers * spec.num_devices * spec.utts_per_pair);
  corpus.by_speaker.assign(spec.num_speakers, {});
  std::size_t utt_id = 0;
  for (std::size_t s = 0; s < spec.num_speakers; ++s) {
    for (std::size_t d = 0; d < spec.num_devices; ++d) {
      for (std::size_t u = 0; u < spec.utts_per_pair; ++u, ++utt_id) {
        Rng rng(mix_seed(noise_seed, "utterance", utt_id));
        Utterance utt;
        utt.speaker = s;
        utt.device = d;
        utt.features.resize(f * t);
        for (std::size_t tt = 0; tt < t; ++tt) {
          for (std::size_t k = 0; k < f; ++k) {
            const double latent = z[s][k] + spec.noise_scale * rng.normal();
            utt.features[k * t + tt] = gain[d][k] * latent + offset[d][k];
          }
        }
        corpus.by_speaker[s].push_back(corpus.utts.size());
        corpus.utts.push_back(std::move(utt));
      }
    }
  }
  return corpus;
}

Batch sample_batch(const Corpus& corpus, std::size_t n_speakers, Rng& rng) {
  const std::size_t s_total = corpus.spec.num_speakers;
  if (n_speakers < 2 || n_speakers > s_total) {
    throw ConfigError("sample_batch: speaker count out of range");
  }
  // partial Fisher-Yates over the speaker ids
  std::vector<std::size_t> pool(s_total);
  for (std::size_t i = 0; i < s_total; ++i) pool[i] = i;
  for (std::size_t i = 0; i < n_speakers; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(s_total - i));
    std::swap(pool[i], pool[j]);
  }

  const std::size_t row_len = corpus.spec.feat_dim * corpus.spec.frames;
  std::vector<double> feats(2 * n_speakers * row_len);
  Batch batch;
  batch.speakers.resize(2 * n_speakers);
  batch.devices.resize(2 * n_speakers);
  for (std::size_t i = 0; i < n_speakers; ++i) {
    const auto& utts = corpus.by_speaker[pool[i]];
    if (utts.size() < 2) throw ConfigError("sample_batch: speaker has fewer than 2 utterances");
    const std::size_t a = static_cast<std::size_t>(rng.below(utts.size()));
    std::size_t b = static_cast<std::size_t>(rng.below(utts.size() - 1));
    if (b >= a) ++b;
    const std::size_t rows[2] = {utts[a], utts[b]};
    for (int r = 0; r < 2; ++r) {
      const Utterance& u = corpus.utts[rows[r]];
      std::copy(u.features.begin(), u.features.end(),
                feats.begin() + static_cast<std::ptrdiff_t>((2 * i + r) * row_len));
      batch.speakers[2 * i + r] = u.speaker;
      batch.devices[2 * i + r] = u.device;
    }
  }
  batch.features = Tensor::from({2 * n_speakers, row_len}, std::move(feats));
  return batch;
}

Tensor corpus_features(const Corpus& corpus, const std::vector<std::size_t>& indices) {
  std::vector<std::size_t> ids = indices;
  if (ids.empty()) {
    ids.resize(corpus.utts.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  }
  const std::size_t row_len = corpus.spec.feat_dim * corpus.spec.frames;
  std::vector<double> feats(ids.size() * row_len);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= corpus.utts.size()) throw ConfigError("corpus_features: utterance id out of range");
    const auto& u = corpus.utts[ids[i]].features;
    std::copy(u.begin(), u.end(), feats.begin() + static_cast<std::ptrdiff_t>(i * row_len));
  }
  return Tensor::from({ids.size(), row_len}, std::move(feats));
}

void gaussian_pair_stream(const std::vector<double>& rho, std::size_t n, std::uint64_t seed,
                          std::vector<double>& x, std::vector<double>& y) {
  const std::size_t d = rho.size();
  for (double r : rho)
    if (std::abs(r) >= 1.0) throw ConfigError("gaussian_pair_stream: |rho| must be < 1");
  x.resize(n * d);
  y.resize(n * d);
  Rng rng(mix_seed(seed, "gaussian-pairs", 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double xv = rng.normal();
      const double eps = rng.normal();
      x[i * d + k] = xv;
      y[i * d + k] = rho[k] * xv + std::sqrt(1.0 - rho[k] * rho[k]) * eps;
    }
  }
}

void save_corpus(const Corpus& corpus, const std::string& path,
                 const std::string& manifest_path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("corpus: cannot open for writing: " + path);
  os.write(kMagic, 8);
  const CorpusSpec& s = corpus.spec;
  write_u64(os, s.num_speakers);
  write_u64(os, s.num_devices);
  write_u64(os, s.utts_per_pair);
  write_u64(os, s.feat_dim);
  write_u64(os, s.frames);
  write_f64(os, s.speaker_scale);
  write_f64(os, s.device_scale);
  write_f64(os, s.noise_scale);
  write_u64(os, s.seed);
  write_u64(os, s.utterance_seed);
  write_u64(os, corpus.utts.size());
  for (const auto& u : corpus.utts) {
    write_u64(os, u.speaker);
    write_u64(os, u.device);
    for (double v : u.features) write_f64(os, v);
  }
  if (!os) throw IoError("corpus: write failed: " + path);

  if (!manifest_path.empty()) {
    std::ofstream mf(manifest_path);
    if (!mf) throw IoError("corpus: cannot open manifest for writing: " + manifest_path);
    char line[256];
    std::snprintf(line, sizeof(line), "# num_speakers=%zu num_devices=%zu utts_per_pair=%zu",
                  s.num_speakers, s.num_devices, s.utts_per_pair);
    mf << line << "\n";
    std::snprintf(line, sizeof(line), "# feat_dim=%zu frames=%zu", s.feat_dim, s.frames);
    mf << line << "\n";
    std::snprintf(line, sizeof(line),
                  "# speaker_scale=%.17g device_scale=%.17g noise_scale=%.17g", s.speaker_scale,
                  s.device_scale, s.noise_scale);
    mf << line << "\n";
    std::snprintf(line, sizeof(line), "# seed=%llu utterance_seed=%llu",
                  static_cast<unsigned long long>(s.seed),
                  static_cast<unsigned long long>(s.utterance_seed));
    mf << line << "\n";
    for (std::size_t i = 0; i < corpus.utts.size(); ++i) {
      mf << i << " " << corpus.utts[i].speaker << " " << corpus.utts[i].device << "\n";
    }
    if (!mf) throw IoError("corpus: manifest write failed: " + manifest_path);
  }
}

Corpus load_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("corpus: cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw IoError("corpus: bad magic: " + path);
  CorpusSpec s;
  s.num_speakers = read_u64(is);
  s.num_devices = read_u64(is);
  s.utts_per_pair = read_u64(is);
  s.feat_dim = read_u64(is);
  s.frames = read_u64(is);
  s.speaker_scale = read_f64(is);
  s.device_scale = read_f64(is);
  s.noise_scale = read_f64(is);
  s.seed = read_u64(is);
  s.utterance_seed = read_u64(is);
  const std::uint64_t count = read_u64(is);
  if (count != s.num_speakers * s.num_devices * s.utts_per_pair) {
    throw IoError("corpus: utterance count inconsistent with spec");
  }
  Corpus corpus;
  corpus.spec = s;
  corpus.utts.resize(count);
  corpus.by_speaker.assign(s.num_speakers, {});
  for (std::uint64_t i = 0; i < count; ++i) {
    Utterance& u = corpus.utts[i];
    u.speaker = read_u64(is);
    u.device = read_u64(is);
    if (u.speaker >= s.num_speakers || u.device >= s.num_devices) {
      throw IoError("corpus: label out of range");
    }
    u.features.resize(s.feat_dim * s.frames);
    for (double& v : u.features) v = read_f64(is);
    corpus.by_speaker[u.speaker].push_back(i);
  }
  return corpus;
}

}  // namespace disent
