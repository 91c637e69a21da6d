// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auglab/dataset.hpp"
#include "auglab/model.hpp"
#include "auglab/trainspec.hpp"

namespace auglab {

// Binary masks over the prunable parameters (conv and dense weights; biases
// are never pruned). Masks only ever grow their zero set.
struct PruneState {
  struct Entry {
    std::string name;
    std::vector<uint8_t> mask;  // 1 = keep, 0 = pruned
  };
  std::vector<Entry> masks;
  double target_ratio = 0.0;

  const std::vector<uint8_t>* find(const std::string& name) const;
  bool empty() const { return masks.empty(); }
};

bool is_prunable(const std::string& name);

// L1-norm unstructured pruning: per prunable tensor, zeroes the
// floor(p * size) smallest-|w| entries. Entries masked by `prior` stay masked
// and count toward the quota; ties break toward the lowest flat index. The
// surviving weights are multiplied by the mask immediately.
PruneState l1_prune(Model& model, double p, const PruneState* prior = nullptr);

// 1 - Card(nonzero mask)/Num(mask) over all prunable tensors jointly.
double pruning_ratio(const PruneState& state);

// Mask views aligned with model.params() order for SgdOptimizer::step.
std::vector<const std::vector<uint8_t>*> aligned_masks(const Model& model,
                                                       const PruneState* state);

void apply_masks(Model& model, const PruneState& state);

// Masks ride in the standard checkpoint container with 0/1 payloads.
void save_masks(const std::string& path, const PruneState& state);
PruneState load_masks(const std::string& path, double target_ratio);

struct PruneStageResult {
  Model snapshot;
  PruneState state;
  RunRecord record;
};

// Alternating prune / fine-tune at strictly ascending ratios. Masks are
// cumulative; per_stage[i] carries stage i's augmentation magnitude. When
// out_dir is non-empty, each stage writes a model snapshot and its mask
// checkpoint beside it.
std::vector<PruneStageResult> iterative_prune(Model& model,
                                              const std::vector<double>& ratios,
                                              const std::vector<TrainSpec>& per_stage,
                                              const SplitDataset& data,
                                              const std::string& out_dir = "");

}  // namespace auglab
