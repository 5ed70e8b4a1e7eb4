#pragma once

#include <map>
#include <string>
#include <vector>

#include "disent/model.hpp"

namespace disent {

// Flat parameter container: a fixed-order header describing the model
// dimensions and which parameter groups are present, followed by named
// float64 arrays. Serialization order is fixed so identical states produce
// byte-identical files.
struct CheckpointHeader {
  ModelConfig model;
  std::vector<std::string> groups;  // of: encoder, decoupler, classifier, phi1, phi2, phi3
  std::size_t epochs_done = 0;
  std::uint64_t seed = 0;
  std::string objective = "full";
};

struct Checkpoint {
  CheckpointHeader header;
  std::vector<std::pair<std::string, std::vector<double>>> arrays;  // insertion order

  void add(const std::string& name, std::vector<double> values);
  const std::vector<double>* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

bool has_group(const CheckpointHeader& header, const std::string& group);

// copies every array whose name matches a parameter or buffer of the listed
// groups into the model; missing or mis-shaped arrays are load errors
void restore_group(Model& model, const Checkpoint& ckpt, const std::string& group);

// parameters + buffers of a group, checkpoint-ready
void snapshot_group(const Model& model, const std::string& group, Checkpoint& ckpt);

}  // namespace disent
