// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auglab/augment.hpp"
#include "auglab/dataset.hpp"
#include "auglab/losses.hpp"
#include "auglab/model.hpp"
#include "auglab/trainspec.hpp"

namespace auglab {

// Teacher-filtered augmentation selection:
//   score_i = alpha * CE(teacher(x_i), y) - beta * KL(teacher(x_i), student(x_i); tau)
// and the candidate minimizing the score wins.
struct SelectionConfig {
  int n = 4;           // candidates per sample
  double alpha = 1.0;  // weight on teacher cross-entropy
  double beta = 1.0;   // weight on teacher-student divergence
  double tau = 4.0;

  void validate() const;
  bool operator==(const SelectionConfig&) const = default;
};

struct Candidate {
  Image image;
  int magnitude = 0;
};

// n independent random-magnitude RandAugment draws.
std::vector<Candidate> generate_candidates(const Image& img, int n, Rng& rng);

struct SelectionResult {
  int chosen = 0;
  std::vector<double> scores;
};

// Scores all candidates in one batched, gradient-free evaluation pass and
// returns the argmin (ties -> lowest index). Neither model is mutated.
SelectionResult select(const std::vector<Image>& candidates, int label, const Model& teacher,
                       const Model& student, const SelectionConfig& cfg);
SelectionResult select(const std::vector<Candidate>& candidates, int label, const Model& teacher,
                       const Model& student, const SelectionConfig& cfg);

// Distills `student` against the frozen teacher, choosing each sample's
// augmentation by teacher-filtered selection. Chosen magnitudes are logged
// per epoch when trace_path is set. Returns the trained student.
struct DistillResult {
  Model student;
  RunRecord record;
};
DistillResult distill_with_selection(Model student, const Model& teacher,
                                     const SplitDataset& data, const SelectionConfig& sel_cfg,
                                     const KDConfig& kd_cfg, const TrainSpec& train_spec,
                                     const std::string& trace_path = "");

}  // namespace auglab
