// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auglab/tensor.hpp"

namespace auglab {

// One conv block: 3x3 conv (no bias) -> relu -> optional 2x2 maxpool.
struct BlockSpec {
  int channels = 0;
  int stride = 1;
  bool pool = false;

  bool operator==(const BlockSpec&) const = default;
};

struct ModelSpec {
  int in_channels = 0;
  int in_height = 0;
  int in_width = 0;
  std::vector<BlockSpec> blocks;
  int extra_blocks = 0;  // trailing blocks that detach_extra may remove
  int num_classes = 0;

  void validate() const;  // throws ConfigError, traces shapes end to end
  int head_inputs() const;  // classifier input width
  ModelSpec base() const;   // spec with the extra blocks removed

  bool operator==(const ModelSpec&) const = default;
};

struct ParamEntry {
  std::string name;
  Tensor tensor;
};

// Small CNN classifier: conv blocks, global average pool, dense head. With no
// blocks the head runs directly on the flattened input. Parameter names are
// "block<i>.weight", "head.weight", "head.bias" and stay stable across
// save/load and architecture surgery.
class Model {
 public:
  Model() = default;

  static Model build(const ModelSpec& spec, uint64_t seed);

  // input [batch, c, h, w] -> logits [batch, num_classes]
  Tensor forward(const Tensor& input) const;

  const ModelSpec& spec() const { return spec_; }
  const std::vector<ParamEntry>& params() const { return params_; }
  std::vector<ParamEntry>& params() { return params_; }
  Tensor param(const std::string& name) const;
  bool has_param(const std::string& name) const;
  std::vector<Tensor> trainable() const;

  int64_t num_params() const;
  uint64_t checksum() const;  // FNV-1a over raw parameter bytes, name order
  Model clone() const;

  void save(const std::string& path) const;
  void load(const std::string& path);  // names and shapes must match exactly

 private:
  ModelSpec spec_;
  std::vector<ParamEntry> params_;
};

// Returns an enlarged model: the base blocks keep their names and exact
// weights, n_blocks new conv blocks (same channel width, stride 1, no pool)
// are inserted before a freshly initialized classifier head.
Model attach_extra(const Model& base, int n_blocks, uint64_t seed);

// Inverse of attach_extra: copies the shared-name block weights into a
// base_spec model and re-initializes the classifier head from head_seed.
Model detach_extra(const Model& enlarged, const ModelSpec& base_spec, uint64_t head_seed);

struct TransferReport {
  std::vector<std::string> copied;
  std::vector<std::string> skipped;
};

// Copies every parameter whose name and shape match; mismatches are reported,
// not fatal. Applying it twice equals applying it once.
TransferReport transfer_weights(const Model& src, Model& dst);

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace auglab
