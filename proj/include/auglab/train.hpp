// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "auglab/dataset.hpp"
#include "auglab/model.hpp"
#include "auglab/pruning.hpp"
#include "auglab/selection.hpp"
#include "auglab/trainspec.hpp"

namespace auglab {

struct EvalResult {
  double accuracy = 0.0;
  double mean_ce = 0.0;
};

// Argmax accuracy and mean cross-entropy on a dataset, no augmentation,
// gradient recording off. Ties in the argmax go to the lower class index.
EvalResult evaluate(const Model& model, const Dataset& data, int batch_size);

struct TrainOptions {
  const PruneState* mask = nullptr;          // masked SGD updates
  const Model* teacher = nullptr;            // Distill loss / Selection aug
  const SelectionConfig* selection = nullptr;  // required for AugMode::Selection
  int stage_index = 0;
  std::string trace_path;  // optional augmentation/selection trace CSV
};

// One training stage. Per-sample augmentation streams derive from
// spec.seed XOR the running sample ordinal, so results are independent of
// batch assembly order.
RunRecord train_model(Model& model, const SplitDataset& data, const TrainSpec& spec,
                      const TrainOptions& options = {});

}  // namespace auglab
