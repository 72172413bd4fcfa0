// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Binary checkpoint layout (all integers little-endian u64):
//   "MPCRN1\0" (7 bytes)
//   config length, config text (ModelConfig::to_text)
//   record count
//   per record: name length, name bytes, rank, dims..., values as f32 LE

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mpcrn/model.h"

namespace mpcrn {

struct CheckpointRecord {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;

  bool operator==(const CheckpointRecord&) const = default;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<CheckpointRecord> records;
};

template <typename T>
Checkpoint make_checkpoint(const ModelConfig& cfg, const ModelParams<T>& params);

// Copies record values into `params`, matching by name. Throws ParseError when
// a parameter is missing, has a different shape, or a record is unknown.
template <typename T>
void apply_checkpoint(const Checkpoint& ckpt, ModelParams<T>& params);

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

// File helpers. I/O failures and malformed files throw ParseError.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// A model rebuilt from a checkpoint, ready for inference.
struct LoadedModel {
  Mpcrn<float> model;
  ModelParams<float> params;
};
LoadedModel load_model(const std::string& path);
LoadedModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace mpcrn
