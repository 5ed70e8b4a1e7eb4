#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include <doctest.h>

#include "disent/data.hpp"

using namespace disent;

namespace {

CorpusSpec small_spec() {
  CorpusSpec spec;
  spec.num_speakers = 4;
  spec.num_devices = 2;
  spec.utts_per_pair = 3;
  spec.feat_dim = 3;
  spec.frames = 5;
  spec.seed = 42;
  return spec;
}

std::string temp_path(const char* stem) {
  return std::string("/tmp/disent_test_") + stem;
}

}  // namespace

TEST_CASE("corpus spec validation") {
  CorpusSpec spec = small_spec();
  CHECK_NOTHROW(validate_spec(spec));

  CorpusSpec bad = spec;
  bad.num_speakers = 1;
  CHECK_THROWS_AS(validate_spec(bad), ConfigError);

  bad = spec;
  bad.num_devices = 0;
  CHECK_THROWS_AS(validate_spec(bad), ConfigError);

  bad = spec;
  bad.num_devices = 1;
  bad.utts_per_pair = 1;  // one utterance per speaker cannot pair
  CHECK_THROWS_AS(validate_spec(bad), ConfigError);
  bad.utts_per_pair = 2;
  CHECK_NOTHROW(validate_spec(bad));

  bad = spec;
  bad.noise_scale = -0.1;
  CHECK_THROWS_AS(validate_spec(bad), ConfigError);

  bad = spec;
  bad.feat_dim = 0;
  CHECK_THROWS_AS(validate_spec(bad), ConfigError);
}

TEST_CASE("corpus generation is deterministic with exhaustive labels") {
  CorpusSpec spec = small_spec();
  Corpus a = generate_corpus(spec);
  Corpus b = generate_corpus(spec);
  REQUIRE(a.utts.size() == 4 * 2 * 3);
  REQUIRE(a.utts.size() == b.utts.size());
  for (std::size_t i = 0; i < a.utts.size(); ++i) {
    CHECK(a.utts[i].features == b.utts[i].features);
    CHECK(a.utts[i].speaker == b.utts[i].speaker);
    CHECK(a.utts[i].device == b.utts[i].device);
    CHECK(a.utts[i].speaker < spec.num_speakers);
    CHECK(a.utts[i].device < spec.num_devices);
    CHECK(a.utts[i].features.size() == spec.feat_dim * spec.frames);
  }

  // per-(speaker, device) counts are exact
  std::vector<std::size_t> counts(4 * 2, 0);
  for (const auto& u : a.utts) ++counts[u.speaker * 2 + u.device];
  for (std::size_t c : counts) CHECK(c == 3);

  // the speaker index lists every utterance of that speaker
  std::size_t indexed = 0;
  for (std::size_t s = 0; s < a.by_speaker.size(); ++s) {
    for (std::size_t id : a.by_speaker[s]) {
      CHECK(a.utts[id].speaker == s);
      ++indexed;
    }
  }
  CHECK(indexed == a.utts.size());

  CorpusSpec other = spec;
  other.seed = 43;
  Corpus c = generate_corpus(other);
  CHECK(a.utts[0].features != c.utts[0].features);
}

TEST_CASE("utterance seed redraws noise around fixed latents") {
  CorpusSpec spec = small_spec();
  spec.utts_per_pair = 200;
  spec.noise_scale = 0.3;

  CorpusSpec redraw = spec;
  redraw.utterance_seed = 9001;
  Corpus a = generate_corpus(spec);
  Corpus b = generate_corpus(redraw);
  CHECK(a.utts[0].features != b.utts[0].features);

  // same latents: per-(speaker, device) mean frames agree within noise error
  auto pair_mean = [&](const Corpus& c, std::size_t spk, std::size_t dev) {
    std::vector<double> mean(spec.feat_dim, 0.0);
    std::size_t count = 0;
    for (const auto& u : c.utts) {
      if (u.speaker != spk || u.device != dev) continue;
      for (std::size_t f = 0; f < spec.feat_dim; ++f)
        for (std::size_t t = 0; t < spec.frames; ++t) mean[f] += u.features[f * spec.frames + t];
      ++count;
    }
    for (double& v : mean) v /= double(count * spec.frames);
    return mean;
  };
  for (std::size_t spk = 0; spk < 2; ++spk) {
    auto ma = pair_mean(a, spk, 0), mb = pair_mean(b, spk, 0);
    for (std::size_t f = 0; f < spec.feat_dim; ++f)
      CHECK(std::abs(ma[f] - mb[f]) < 0.05);
  }
}

TEST_CASE("zero noise collapses a speaker-device pair to one repeated utterance") {
  CorpusSpec spec = small_spec();
  spec.noise_scale = 0.0;
  Corpus c = generate_corpus(spec);
  const Utterance* first = nullptr;
  for (const auto& u : c.utts) {
    if (u.speaker != 1 || u.device != 1) continue;
    if (!first) {
      first = &u;
      continue;
    }
    CHECK(u.features == first->features);
  }
}

TEST_CASE("batch sampling pairs two distinct utterances per distinct speaker") {
  CorpusSpec spec = small_spec();
  Corpus c = generate_corpus(spec);
  Rng rng(7);
  Batch batch = sample_batch(c, 3, rng);
  REQUIRE(batch.speakers.size() == 6);
  REQUIRE(batch.devices.size() == 6);
  CHECK(batch.features.rows() == 6);
  CHECK(batch.features.cols() == spec.feat_dim * spec.frames);

  std::set<std::size_t> speakers;
  for (std::size_t i = 0; i < 6; i += 2) {
    CHECK(batch.speakers[i] == batch.speakers[i + 1]);
    CHECK(speakers.insert(batch.speakers[i]).second);
    // distinct utterances: rows of a pair differ somewhere
    const auto& v = batch.features.values();
    bool differ = false;
    for (std::size_t k = 0; k < spec.feat_dim * spec.frames; ++k)
      if (v[i * spec.feat_dim * spec.frames + k] != v[(i + 1) * spec.feat_dim * spec.frames + k])
        differ = true;
    CHECK(differ);
  }

  Rng r1(99), r2(99);
  Batch b1 = sample_batch(c, 4, r1);
  Batch b2 = sample_batch(c, 4, r2);
  CHECK(b1.features.values() == b2.features.values());
  CHECK(b1.speakers == b2.speakers);
  CHECK(b1.devices == b2.devices);

  CHECK_THROWS_AS(sample_batch(c, 5, rng), ConfigError);
  CHECK_THROWS_AS(sample_batch(c, 0, rng), ConfigError);
}

TEST_CASE("corpus_features stacks utterances row-major") {
  CorpusSpec spec = small_spec();
  Corpus c = generate_corpus(spec);
  Tensor all = corpus_features(c);
  CHECK(all.rows() == c.utts.size());
  CHECK(all.cols() == spec.feat_dim * spec.frames);

  Tensor some = corpus_features(c, {2, 0});
  const auto& sv = some.values();
  const std::size_t w = spec.feat_dim * spec.frames;
  for (std::size_t k = 0; k < w; ++k) {
    CHECK(sv[k] == c.utts[2].features[k]);
    CHECK(sv[w + k] == c.utts[0].features[k]);
  }
  CHECK_THROWS_AS(corpus_features(c, {999}), ConfigError);
}

TEST_CASE("gaussian pair stream hits the requested correlation") {
  std::vector<double> x, y;
  gaussian_pair_stream({0.0, 0.999}, 16384, 5, x, y);
  REQUIRE(x.size() == 2 * 16384);
  REQUIRE(y.size() == 2 * 16384);

  auto corr = [&](std::size_t k) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < 16384; ++i) {
      double a = x[i * 2 + k], b = y[i * 2 + k];
      sx += a;
      sy += b;
      sxx += a * a;
      syy += b * b;
      sxy += a * b;
    }
    double n = 16384.0;
    double cov = sxy / n - (sx / n) * (sy / n);
    double vx = sxx / n - (sx / n) * (sx / n);
    double vy = syy / n - (sy / n) * (sy / n);
    return cov / std::sqrt(vx * vy);
  };
  CHECK(std::abs(corr(0)) < 0.05);
  CHECK(std::abs(corr(1) - 0.999) < 0.01);

  std::vector<double> x2, y2;
  gaussian_pair_stream({0.0, 0.999}, 16384, 5, x2, y2);
  CHECK(x == x2);
  CHECK(y == y2);

  CHECK_THROWS_AS(gaussian_pair_stream({1.0}, 4, 1, x, y), ConfigError);
}

TEST_CASE("corpus round-trips through the binary container") {
  CorpusSpec spec = small_spec();
  Corpus c = generate_corpus(spec);
  std::string bin = temp_path("corpus.bin"), mf = temp_path("corpus.manifest");
  save_corpus(c, bin, mf);
  Corpus r = load_corpus(bin);
  CHECK(r.spec.num_speakers == spec.num_speakers);
  CHECK(r.spec.num_devices == spec.num_devices);
  CHECK(r.spec.seed == spec.seed);
  REQUIRE(r.utts.size() == c.utts.size());
  for (std::size_t i = 0; i < c.utts.size(); ++i) {
    CHECK(r.utts[i].features == c.utts[i].features);
    CHECK(r.utts[i].speaker == c.utts[i].speaker);
    CHECK(r.utts[i].device == c.utts[i].device);
  }
  CHECK(r.by_speaker == c.by_speaker);

  // manifest lists every utterance with its labels
  std::ifstream in(mf);
  REQUIRE(in.good());
  std::string line;
  std::size_t rows = 0;
  bool saw_comment = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      saw_comment = true;
      continue;
    }
    std::size_t id, spk, dev;
    REQUIRE(std::sscanf(line.c_str(), "%zu %zu %zu", &id, &spk, &dev) == 3);
    CHECK(id == rows);
    CHECK(spk == c.utts[rows].speaker);
    CHECK(dev == c.utts[rows].device);
    ++rows;
  }
  CHECK(saw_comment);
  CHECK(rows == c.utts.size());

  std::remove(bin.c_str());
  std::remove(mf.c_str());
}

TEST_CASE("corrupt corpus containers are rejected") {
  CHECK_THROWS_AS(load_corpus("/tmp/disent_no_such_file.bin"), IoError);

  std::string bad = temp_path("corpus_bad.bin");
  {
    std::ofstream os(bad, std::ios::binary);
    os << "NOTMAGIC plus some trailing bytes";
  }
  CHECK_THROWS_AS(load_corpus(bad), IoError);
  std::remove(bad.c_str());
}

TEST_CASE("device factors shift statistics between devices") {
  CorpusSpec spec = small_spec();
  spec.device_scale = 1.0;
  spec.noise_scale = 0.05;
  Corpus c = generate_corpus(spec);
  // same speaker, different devices: features must differ systematically
  const Utterance *d0 = nullptr, *d1 = nullptr;
  for (const auto& u : c.utts) {
    if (u.speaker != 0) continue;
    if (u.device == 0 && !d0) d0 = &u;
    if (u.device == 1 && !d1) d1 = &u;
  }
  REQUIRE(d0 != nullptr);
  REQUIRE(d1 != nullptr);
  double diff = 0.0;
  for (std::size_t k = 0; k < d0->features.size(); ++k)
    diff += std::abs(d0->features[k] - d1->features[k]);
  CHECK(diff / double(d0->features.size()) > 0.05);
}
