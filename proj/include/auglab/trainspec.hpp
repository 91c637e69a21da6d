// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auglab/losses.hpp"

namespace auglab {

// How each training sample gets augmented. Decay resolves to Fixed per stage
// (the scheduler is looked up against the stage's pruning ratio before the
// stage starts); Selection needs a SelectionConfig plus a frozen teacher.
enum class AugMode { None, Fixed, Random, Decay, Selection };

const char* aug_mode_name(AugMode mode);
AugMode aug_mode_from_name(const std::string& name);

struct AugSpec {
  AugMode mode = AugMode::None;
  int magnitude = 0;  // Fixed only

  bool operator==(const AugSpec&) const = default;
};

enum class LossKind { CrossEntropy, Distill };

const char* loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

// Full configuration of one training stage. Loaded from config with no
// runtime defaults: the loader fills every field or refuses.
struct TrainSpec {
  int epochs = 0;
  int batch_size = 0;
  double lr = 0.0;
  double momentum = 0.0;
  AugSpec aug;
  LossKind loss = LossKind::CrossEntropy;
  KDConfig kd;        // consulted when loss == Distill
  uint64_t seed = 0;  // shuffling, augmentation streams
  uint64_t head_seed = 0;  // head re-init for detach handoffs

  void validate() const;
  bool operator==(const TrainSpec&) const = default;
};

struct EpochRow {
  int stage = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double pruning_ratio = 0.0;
  double magnitude_in_effect = -1.0;  // -1 = no augmentation
  double wall_time = 0.0;             // seconds; never serialized to results.csv
};

struct RunRecord {
  std::string run_id;
  std::string scheme;
  uint64_t seed = 0;
  double cell_ratio = -1.0;   // grid context: pruning ratio of the cell
  int cell_magnitude = -1;    // grid context: magnitude of the cell, -1 = baseline
  std::vector<EpochRow> rows;

  double final_accuracy() const;
};

}  // namespace auglab
