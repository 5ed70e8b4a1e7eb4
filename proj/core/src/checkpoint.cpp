#include "disent/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace disent {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

ParamList group_entries(const Model& model, const std::string& group) {
  ParamList params;
  if (group == "encoder" || group == "decoupler") {
    ParamList all, buffers;
    model.encoder.collect(all, buffers);
    model.decoupler.collect(all, buffers);
    for (auto& list : {all, buffers})
      for (const auto& p : list)
        if (p.name.rfind(group + ".", 0) == 0) params.push_back(p);
  } else if (group == "classifier") {
    for (const auto& p : model.theta_params())
      if (p.name.rfind("classifier.", 0) == 0) params.push_back(p);
  } else if (group == "phi1") {
    params = model.phi1_params();
  } else if (group == "phi2") {
    params = model.phi2_params();
  } else if (group == "phi3") {
    params = model.phi3_params();
  } else {
    throw ConfigError("checkpoint: unknown parameter group: " + group);
  }
  return params;
}

}  // namespace

void Checkpoint::add(const std::string& name, std::vector<double> values) {
  arrays.emplace_back(name, std::move(values));
}

const std::vector<double>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, v] : arrays)
    if (n == name) return &v;
  return nullptr;
}

bool has_group(const CheckpointHeader& header, const std::string& group) {
  return std::find(header.groups.begin(), header.groups.end(), group) != header.groups.end();
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open for writing: " + path);
  os.write(kMagic, 8);

  const CheckpointHeader& h = ckpt.header;
  std::ostringstream hdr;
  char buf[128];
  auto put_u = [&](const char* key, std::uint64_t v) {
    std::snprintf(buf, sizeof(buf), "%s=%llu\n", key, static_cast<unsigned long long>(v));
    hdr << buf;
  };
  put_u("emb_dim", h.model.emb_dim);
  put_u("feat_dim", h.model.feat_dim);
  put_u("frames", h.model.frames);
  put_u("num_speakers", h.model.num_speakers);
  put_u("num_devices", h.model.num_devices);
  put_u("enc_hidden", h.model.enc_hidden);
  put_u("phi_hidden", h.model.phi_hidden);
  hdr << "groups=";
  for (std::size_t i = 0; i < h.groups.size(); ++i) hdr << (i ? "," : "") << h.groups[i];
  hdr << "\n";
  put_u("epochs_done", h.epochs_done);
  put_u("seed", h.seed);
  hdr << "objective=" << h.objective << "\n";
  const std::string header_text = hdr.str();
  write_u64(os, header_text.size());
  os.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  write_u64(os, ckpt.arrays.size());
  for (const auto& [name, values] : ckpt.arrays) {
    write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, values.size());
    for (double d : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, 8);
      write_u64(os, bits);
    }
  }
  if (!os) throw IoError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw IoError("checkpoint: bad magic: " + path);

  const std::uint64_t header_len = read_u64(is);
  std::string header_text(header_len, '\0');
  is.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw IoError("checkpoint: truncated header");

  Checkpoint ckpt;
  std::map<std::string, std::string> kv;
  std::istringstream hdr(header_text);
  std::string line;
  while (std::getline(hdr, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("checkpoint: malformed header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get_u = [&kv, &path](const char* key) -> std::uint64_t {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError(std::string("checkpoint: missing header key ") + key +
                                      " in " + path);
    return std::stoull(it->second);
  };
  CheckpointHeader& h = ckpt.header;
  h.model.emb_dim = get_u("emb_dim");
  h.model.feat_dim = get_u("feat_dim");
  h.model.frames = get_u("frames");
  h.model.num_speakers = get_u("num_speakers");
  h.model.num_devices = get_u("num_devices");
  h.model.enc_hidden = get_u("enc_hidden");
  h.model.phi_hidden = get_u("phi_hidden");
  h.epochs_done = get_u("epochs_done");
  h.seed = get_u("seed");
  h.objective = kv.count("objective") ? kv["objective"] : "full";
  std::istringstream groups(kv["groups"]);
  std::string g;
  while (std::getline(groups, g, ','))
    if (!g.empty()) h.groups.push_back(g);

  const std::uint64_t count = read_u64(is);
  ckpt.arrays.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t name_len = read_u64(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    const std::uint64_t numel = read_u64(is);
    std::vector<double> values(numel);
    for (auto& d : values) {
      const std::uint64_t bits = read_u64(is);
      std::memcpy(&d, &bits, 8);
    }
    if (!is) throw IoError("checkpoint: truncated array data");
    ckpt.arrays.emplace_back(std::move(name), std::move(values));
  }
  return ckpt;
}

void snapshot_group(const Model& model, const std::string& group, Checkpoint& ckpt) {
  for (const auto& p : group_entries(model, group)) ckpt.add(p.name, p.tensor.values());
}

void restore_group(Model& model, const Checkpoint& ckpt, const std::string& group) {
  for (auto& p : group_entries(model, group)) {
    const std::vector<double>* stored = ckpt.find(p.name);
    if (!stored) throw IoError("checkpoint: missing array: " + p.name);
    if (stored->size() != p.tensor.numel()) {
      throw IoError("checkpoint: dimension mismatch for " + p.name);
    }
    p.tensor.values_mut() = *stored;
  }
}

}  // namespace disent
