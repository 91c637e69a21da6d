// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auglab/dataset.hpp"
#include "auglab/model.hpp"
#include "auglab/trainspec.hpp"

namespace auglab {

struct ProfileEntry {
  int magnitude = 0;
  double val_accuracy = 0.0;
  double val_loss = 0.0;
  uint64_t seed = 0;
};

// Validation metrics per candidate magnitude plus the no-augmentation
// baseline. optimal/maximal extraction below is a pure function of this.
struct MagnitudeProfile {
  std::vector<ProfileEntry> entries;
  double baseline_accuracy = 0.0;
  double baseline_loss = 0.0;
  uint64_t baseline_seed = 0;
};

// Exhaustive magnitude search: trains one fresh seeded model per candidate
// magnitude (cell seed = train_spec.seed XOR M) plus the unaugmented baseline
// (cell seed = train_spec.seed), all on the train split, and records
// validation accuracy and loss. When prune_ratio > 0 each cell is pruned at
// init and trained under its mask. Per-epoch records for every cell land in
// out_records when given.
MagnitudeProfile grid_search_magnitude(const ModelSpec& spec, const SplitDataset& data,
                                       const std::vector<int>& candidates,
                                       const TrainSpec& train_spec, double prune_ratio = 0.0,
                                       std::vector<RunRecord>* out_records = nullptr);

// argmax of validation accuracy; ties take the smaller magnitude.
int optimal_magnitude(const MagnitudeProfile& profile);

// Largest magnitude whose accuracy does not fall below the baseline; 0 when
// every entry underperforms it.
int maximal_magnitude(const MagnitudeProfile& profile);

// Magnitude-decay schedule over pruning ratios: pivots ascend in ratio and
// never increase in magnitude.
struct DecaySchedule {
  struct Pivot {
    double ratio = 0.0;
    int magnitude = 0;
    bool operator==(const Pivot&) const = default;
  };
  enum class Mode { Step, Linear };

  std::vector<Pivot> pivots;
  Mode mode = Mode::Step;

  void validate() const;
  bool operator==(const DecaySchedule&) const = default;
};

// Step mode: magnitude of the largest pivot ratio <= p (first pivot below the
// range). Linear mode: interpolates between bracketing pivots, rounded.
int decay_lookup(const DecaySchedule& schedule, double p);

// magnitude,val_accuracy,val_loss,seed; the baseline row carries magnitude -1.
void save_profile_csv(const std::string& path, const MagnitudeProfile& profile);
MagnitudeProfile load_profile_csv(const std::string& path);

}  // namespace auglab
