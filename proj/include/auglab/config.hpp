// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "auglab/dataset.hpp"
#include "auglab/policy.hpp"
#include "auglab/scheme.hpp"
#include "auglab/selection.hpp"
#include "auglab/trainspec.hpp"

namespace auglab {

// Dataset paths resolve against this env var when they are relative.
inline constexpr const char* kDataRootEnv = "AUGLAB_DATA_ROOT";

struct DatasetConfig {
  DataFormat format = DataFormat::Synthetic;
  std::string path;    // cifar10-bin file or idx images file
  std::string labels;  // idx labels file; derived from path when empty
  SyntheticSpec synthetic;
  double val_fraction = 0.4;
  uint64_t split_seed = 3;
};

struct GridConfig {
  std::string model = "model";
  std::vector<double> ratios;
  std::vector<int> magnitudes;
};

struct SchemeConfig {
  std::string kind;  // a scheme kind name or a family: prune | extra | kd
  std::string model = "model";
  std::string teacher = "teacher";
  int strong_m = 20;
  int weak_m = 5;
  double prune_ratio = 0.5;
  int extra_blocks = 2;
  std::vector<uint64_t> seeds;
};

// One experiment = one JSON file. Every hyperparameter is explicit after
// load; the resolved tree is echoed into the output directory for audit.
struct ExperimentConfig {
  std::string out_dir = "runs/out";
  DatasetConfig dataset;
  std::map<std::string, ModelSpec> models;
  TrainSpec stage1;
  TrainSpec stage2;
  std::optional<GridConfig> grid;
  std::optional<SchemeConfig> scheme;
  std::optional<SelectionConfig> selection;
  std::optional<DecaySchedule> schedule;

  const ModelSpec& model(const std::string& name) const;
};

ExperimentConfig load_config(const std::string& path);

// Builds the dataset named by the config, honoring AUGLAB_DATA_ROOT.
SplitDataset build_dataset(const DatasetConfig& cfg);

// Serializes the fully resolved configuration to out_dir/config_resolved.json.
void write_resolved_config(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace auglab
