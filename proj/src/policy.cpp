// SPDX-License-Identifier: Apache-2.0
#include "auglab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "auglab/errors.hpp"
#include "auglab/pruning.hpp"
#include "auglab/rng.hpp"
#include "auglab/train.hpp"

namespace auglab {

namespace {

ProfileEntry run_cell(const ModelSpec& spec, const SplitDataset& data, const TrainSpec& base,
                      int magnitude, uint64_t cell_seed, double prune_ratio,
                      std::vector<RunRecord>* out_records) {
  TrainSpec cell = base;
  cell.seed = cell_seed;
  cell.aug.mode = magnitude < 0 ? AugMode::None : AugMode::Fixed;
  cell.aug.magnitude = std::max(0, magnitude);

  Model model = Model::build(spec, cell_seed);
  PruneState state;
  TrainOptions options;
  if (prune_ratio > 0.0) {
    state = l1_prune(model, prune_ratio);
    options.mask = &state;
  }
  RunRecord record = train_model(model, data, cell, options);
  const EvalResult val = evaluate(model, data.val, cell.batch_size);
  if (out_records != nullptr) {
    char id[96];
    std::snprintf(id, sizeof(id), "grid_p%g_m%d_seed%llu", prune_ratio, magnitude,
                  (unsigned long long)cell_seed);
    record.run_id = id;
    record.scheme = "magnitude_grid";
    record.cell_ratio = prune_ratio;
    record.cell_magnitude = magnitude;
    out_records->push_back(std::move(record));
  }
  return {magnitude, val.accuracy, val.mean_ce, cell_seed};
}

}  // namespace

MagnitudeProfile grid_search_magnitude(const ModelSpec& spec, const SplitDataset& data,
                                       const std::vector<int>& candidates,
                                       const TrainSpec& train_spec, double prune_ratio,
                                       std::vector<RunRecord>* out_records) {
  if (candidates.empty()) throw ConfigError("grid search: empty candidate list");
  std::set<int> seen;
  for (int m : candidates) {
    if (m < 0 || m > kMaxMagnitude) throw ConfigError("grid search: magnitude out of range");
    if (!seen.insert(m).second) throw ConfigError("grid search: duplicate magnitude");
  }
  if (data.train.size() == 0 || data.val.size() == 0) {
    throw ContractError("grid search: train and validation splits must be non-empty");
  }

  // Cells are all independent (cell seed = base seed XOR M; the baseline uses
  // the base seed itself), so execution order does not affect the profile.
  MagnitudeProfile profile;
  const ProfileEntry baseline =
      run_cell(spec, data, train_spec, -1, train_spec.seed, prune_ratio, out_records);
  profile.baseline_accuracy = baseline.val_accuracy;
  profile.baseline_loss = baseline.val_loss;
  profile.baseline_seed = baseline.seed;
  for (int m : candidates) {
    profile.entries.push_back(run_cell(spec, data, train_spec, m,
                                       train_spec.seed ^ uint64_t(m), prune_ratio, out_records));
  }
  return profile;
}

int optimal_magnitude(const MagnitudeProfile& profile) {
  if (profile.entries.empty()) throw ContractError("optimal_magnitude: empty profile");
  const ProfileEntry* best = &profile.entries.front();
  for (const ProfileEntry& e : profile.entries) {
    if (e.val_accuracy > best->val_accuracy ||
        (e.val_accuracy == best->val_accuracy && e.magnitude < best->magnitude)) {
      best = &e;
    }
  }
  return best->magnitude;
}

int maximal_magnitude(const MagnitudeProfile& profile) {
  if (profile.entries.empty()) throw ContractError("maximal_magnitude: empty profile");
  int best = 0;
  bool found = false;
  for (const ProfileEntry& e : profile.entries) {
    if (e.val_accuracy >= profile.baseline_accuracy && (!found || e.magnitude > best)) {
      best = e.magnitude;
      found = true;
    }
  }
  return found ? best : 0;
}

void DecaySchedule::validate() const {
  if (pivots.empty()) throw ConfigError("decay schedule: needs at least one pivot");
  for (size_t i = 0; i < pivots.size(); ++i) {
    if (!(pivots[i].ratio >= 0.0 && pivots[i].ratio < 1.0)) {
      throw ConfigError("decay schedule: pivot ratio out of [0,1)");
    }
    if (pivots[i].magnitude < 0 || pivots[i].magnitude > kMaxMagnitude) {
      throw ConfigError("decay schedule: pivot magnitude out of range");
    }
    if (i > 0) {
      if (!(pivots[i].ratio > pivots[i - 1].ratio)) {
        throw ConfigError("decay schedule: pivot ratios must ascend");
      }
      if (pivots[i].magnitude > pivots[i - 1].magnitude) {
        throw ConfigError("decay schedule: pivot magnitudes must not increase");
      }
    }
  }
}

int decay_lookup(const DecaySchedule& schedule, double p) {
  schedule.validate();
  if (!(p >= 0.0 && p < 1.0)) throw ContractError("decay_lookup: p must be in [0,1)");
  const auto& pv = schedule.pivots;
  if (p <= pv.front().ratio) return pv.front().magnitude;
  size_t i = 0;
  while (i + 1 < pv.size() && pv[i + 1].ratio <= p) ++i;
  if (schedule.mode == DecaySchedule::Mode::Step || i + 1 == pv.size()) {
    return pv[i].magnitude;
  }
  const double t = (p - pv[i].ratio) / (pv[i + 1].ratio - pv[i].ratio);
  return int(std::lround(pv[i].magnitude + t * (pv[i + 1].magnitude - pv[i].magnitude)));
}

void save_profile_csv(const std::string& path, const MagnitudeProfile& profile) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "magnitude,val_accuracy,val_loss,seed\n";
  char buf[128];
  auto row = [&](int m, double acc, double loss, uint64_t seed) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%llu\n", m, acc, loss,
                  (unsigned long long)seed);
    os << buf;
  };
  row(-1, profile.baseline_accuracy, profile.baseline_loss, profile.baseline_seed);
  for (const ProfileEntry& e : profile.entries) {
    row(e.magnitude, e.val_accuracy, e.val_loss, e.seed);
  }
}

MagnitudeProfile load_profile_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != "magnitude,val_accuracy,val_loss,seed") {
    throw FormatError(path + ": bad profile header");
  }
  MagnitudeProfile profile;
  bool have_baseline = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    ProfileEntry e;
    std::getline(ss, field, ',');
    e.magnitude = std::stoi(field);
    std::getline(ss, field, ',');
    e.val_accuracy = std::stod(field);
    std::getline(ss, field, ',');
    e.val_loss = std::stod(field);
    std::getline(ss, field, ',');
    e.seed = std::stoull(field);
    if (e.magnitude < 0) {
      profile.baseline_accuracy = e.val_accuracy;
      profile.baseline_loss = e.val_loss;
      profile.baseline_seed = e.seed;
      have_baseline = true;
    } else {
      profile.entries.push_back(e);
    }
  }
  if (!have_baseline) throw FormatError(path + ": profile has no baseline row");
  return profile;
}

}  // namespace auglab
