// SPDX-License-Identifier: Apache-2.0
#include "auglab/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "auglab/checkpoint.hpp"
#include "auglab/errors.hpp"
#include "auglab/train.hpp"

namespace auglab {

const std::vector<uint8_t>* PruneState::find(const std::string& name) const {
  for (const Entry& e : masks) {
    if (e.name == name) return &e.mask;
  }
  return nullptr;
}

bool is_prunable(const std::string& name) {
  // conv and dense weights; biases stay dense
  return name.size() >= 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
}

PruneState l1_prune(Model& model, double p, const PruneState* prior) {
  if (!(p >= 0.0 && p < 1.0)) throw ContractError("l1_prune: p must be in [0,1)");
  if (prior != nullptr && p < pruning_ratio(*prior)) {
    throw ContractError("l1_prune: pruning ratio must not decrease across iterations");
  }

  PruneState state;
  state.target_ratio = p;
  for (ParamEntry& entry : model.params()) {
    if (!is_prunable(entry.name)) continue;
    std::vector<double>& w = entry.tensor.mutable_data();
    const size_t n = w.size();
    const size_t quota = size_t(std::floor(p * double(n)));

    std::vector<uint8_t> mask(n, 1);
    size_t zeroed = 0;
    if (prior != nullptr) {
      const std::vector<uint8_t>* pm = prior->find(entry.name);
      if (pm != nullptr) {
        if (pm->size() != n) throw ContractError("l1_prune: prior mask shape mismatch for " + entry.name);
        for (size_t i = 0; i < n; ++i) {
          if ((*pm)[i] == 0) {
            mask[i] = 0;
            ++zeroed;
          }
        }
      }
    }
    if (zeroed > quota) {
      throw ContractError("l1_prune: prior mask for " + entry.name + " exceeds the new quota");
    }

    if (zeroed < quota) {
      std::vector<size_t> order;
      order.reserve(n - zeroed);
      for (size_t i = 0; i < n; ++i) {
        if (mask[i] == 1) order.push_back(i);
      }
      // smallest |w| first, ties toward the lowest flat index; order is
      // already index-ascending so a stable sort keeps the tie-break
      std::stable_sort(order.begin(), order.end(), [&w](size_t a, size_t b) {
        return std::abs(w[a]) < std::abs(w[b]);
      });
      for (size_t r = 0; r < quota - zeroed; ++r) mask[order[r]] = 0;
    }

    for (size_t i = 0; i < n; ++i) {
      if (mask[i] == 0) w[i] = 0.0;
    }
    state.masks.push_back({entry.name, std::move(mask)});
  }
  return state;
}

double pruning_ratio(const PruneState& state) {
  int64_t zeros = 0, total = 0;
  for (const PruneState::Entry& e : state.masks) {
    total += int64_t(e.mask.size());
    for (uint8_t m : e.mask) zeros += (m == 0);
  }
  if (total == 0) return 0.0;
  return double(zeros) / double(total);
}

std::vector<const std::vector<uint8_t>*> aligned_masks(const Model& model,
                                                       const PruneState* state) {
  std::vector<const std::vector<uint8_t>*> views;
  views.reserve(model.params().size());
  for (const ParamEntry& p : model.params()) {
    views.push_back(state == nullptr ? nullptr : state->find(p.name));
  }
  return views;
}

void apply_masks(Model& model, const PruneState& state) {
  for (ParamEntry& p : model.params()) {
    const std::vector<uint8_t>* mask = state.find(p.name);
    if (mask == nullptr) continue;
    std::vector<double>& w = p.tensor.mutable_data();
    if (mask->size() != w.size()) throw ContractError("apply_masks: shape mismatch for " + p.name);
    for (size_t i = 0; i < w.size(); ++i) {
      if ((*mask)[i] == 0) w[i] = 0.0;
    }
  }
}

void save_masks(const std::string& path, const PruneState& state) {
  NamedTensors named;
  named.reserve(state.masks.size());
  for (const PruneState::Entry& e : state.masks) {
    std::vector<double> payload(e.mask.size());
    for (size_t i = 0; i < e.mask.size(); ++i) payload[i] = double(e.mask[i]);
    named.emplace_back(e.name, Tensor::from_data({int64_t(e.mask.size())}, std::move(payload)));
  }
  save_checkpoint(path, named);
}

PruneState load_masks(const std::string& path, double target_ratio) {
  PruneState state;
  state.target_ratio = target_ratio;
  for (auto& [name, tensor] : load_checkpoint(path)) {
    std::vector<uint8_t> mask(tensor.data().size());
    for (size_t i = 0; i < mask.size(); ++i) {
      const double v = tensor.data()[i];
      if (v != 0.0 && v != 1.0) throw FormatError(path + ": mask payload is not 0/1 for " + name);
      mask[i] = uint8_t(v);
    }
    state.masks.push_back({name, std::move(mask)});
  }
  return state;
}

std::vector<PruneStageResult> iterative_prune(Model& model, const std::vector<double>& ratios,
                                              const std::vector<TrainSpec>& per_stage,
                                              const SplitDataset& data,
                                              const std::string& out_dir) {
  if (ratios.size() != per_stage.size()) {
    throw ConfigError("iterative_prune: ratios and stage specs differ in length");
  }
  for (size_t i = 1; i < ratios.size(); ++i) {
    if (!(ratios[i] > ratios[i - 1])) {
      throw ConfigError("iterative_prune: ratios must be strictly ascending");
    }
  }

  std::vector<PruneStageResult> results;
  PruneState prior;
  for (size_t i = 0; i < ratios.size(); ++i) {
    PruneState state = l1_prune(model, ratios[i], i == 0 ? nullptr : &prior);
    TrainOptions options;
    options.mask = &state;
    options.stage_index = int(i);
    RunRecord record = train_model(model, data, per_stage[i], options);
    if (!out_dir.empty()) {
      const std::string stem = out_dir + "/stage" + std::to_string(i);
      model.save(stem + "_model.adck");
      save_masks(stem + "_masks.adck", state);
    }
    results.push_back({model.clone(), state, std::move(record)});
    prior = std::move(state);
  }
  return results;
}

}  // namespace auglab
