// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "auglab/dataset.hpp"
#include "auglab/model.hpp"
#include "auglab/policy.hpp"
#include "auglab/pruning.hpp"
#include "auglab/selection.hpp"
#include "auglab/trainspec.hpp"

namespace auglab {

enum class SchemeKind {
  PruneInherit,      // train full with strong aug -> transfer -> prune -> weak fine-tune
  PruneBaselineA,    // prune at init -> strong aug -> weak fine-tune
  PruneBaselineB,    // train full with weak aug -> transfer -> prune -> weak fine-tune
  ExtraInherit,      // attach blocks -> strong aug -> detach -> weak fine-tune
  ExtraBaselineA,    // base model only: strong aug -> weak fine-tune
  ExtraBaselineB,    // attach blocks -> weak aug -> detach -> weak fine-tune
  KdFiltered,        // teacher CE-pretrain -> student distilled with selection
  KdBaselineA,       // teacher CE-pretrain -> student distilled, random magnitudes
  KdBaselineB,       // teacher CE-pretrain -> student distilled, fixed magnitude
  MagnitudeGrid,     // magnitude profiles across pruning ratios
  DecayVsConsistent  // iterative pruning: decayed vs consistent magnitudes
};

const char* scheme_kind_name(SchemeKind kind);
SchemeKind scheme_kind_from_name(const std::string& name);

struct SchemeSpec {
  SchemeKind kind = SchemeKind::PruneInherit;
  ModelSpec model;          // base / student
  ModelSpec teacher_model;  // kd kinds only
  uint64_t build_seed = 1;
  double prune_ratio = 0.5;  // prune kinds
  int extra_blocks = 2;      // extra kinds
  int strong_m = 20;
  int weak_m = 5;
  std::vector<TrainSpec> stages;  // exactly two stages for every scheme kind
  SelectionConfig selection;      // KdFiltered

  std::vector<double> ratios;   // MagnitudeGrid / DecayVsConsistent
  std::vector<int> magnitudes;  // MagnitudeGrid candidates / consistent set
  DecaySchedule schedule;       // DecayVsConsistent

  void validate() const;
  std::string run_id() const;
};

// Forces the stage augmentation/loss layout the scheme kind defines, from
// strong_m / weak_m. Keeps hand-written configs honest.
void apply_scheme_stages(SchemeSpec& spec);

struct SchemeResult {
  std::vector<RunRecord> records;
  double final_accuracy = 0.0;
  std::vector<std::string> findings;  // handoff checksums, ordering notes
};

// Executes the scheme's stages with the exact weight handoffs the kind
// defines and verifies handoff integrity by checksum (throws on mismatch).
// Final model and mask checkpoints land under out_dir when it is non-empty.
SchemeResult run_scheme(const SchemeSpec& spec, const SplitDataset& data,
                        const std::string& out_dir = "");

// The A/B/Inherit triple of a family ("prune", "extra", "kd") sharing the
// proto's stage configuration.
std::vector<SchemeSpec> build_comparison(const std::string& family, const SchemeSpec& proto);

// Refuses to run unfair comparisons: every spec's stage 2 must be identical
// (for kd triples: identical apart from the augmentation under study).
void verify_controlled_comparison(const std::vector<SchemeSpec>& specs);

// Checksum of the parameters that survive the mask (mask applied first).
uint64_t masked_checksum(const Model& model, const PruneState& state);

}  // namespace auglab
