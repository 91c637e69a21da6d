// SPDX-License-Identifier: Apache-2.0
#include "auglab/selection.hpp"

#include <cmath>

#include "auglab/errors.hpp"
#include "auglab/train.hpp"

namespace auglab {

namespace {

// Row-wise log-softmax on raw logits, no tape involved.
void row_log_softmax(const double* row, int64_t c, double tau, std::vector<double>& out) {
  out.resize(size_t(c));
  double m = row[0] / tau;
  for (int64_t j = 1; j < c; ++j) m = std::max(m, row[j] / tau);
  double acc = 0.0;
  for (int64_t j = 0; j < c; ++j) acc += std::exp(row[j] / tau - m);
  const double lse = m + std::log(acc);
  for (int64_t j = 0; j < c; ++j) out[size_t(j)] = row[j] / tau - lse;
}

}  // namespace

void SelectionConfig::validate() const {
  if (n < 1) throw ConfigError("selection: n must be >= 1");
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("selection: alpha and beta must be >= 0");
  if (alpha == 0.0 && beta == 0.0) throw ConfigError("selection: alpha and beta cannot both be 0");
  if (!(tau > 0.0)) throw ConfigError("selection: tau must be positive");
}

std::vector<Candidate> generate_candidates(const Image& img, int n, Rng& rng) {
  if (n < 1) throw ContractError("generate_candidates: n must be >= 1");
  std::vector<Candidate> out;
  out.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    MagnitudeDraw draw = random_magnitude_augment(img, rng);
    out.push_back({std::move(draw.image), draw.magnitude});
  }
  return out;
}

SelectionResult select(const std::vector<Image>& candidates, int label, const Model& teacher,
                       const Model& student, const SelectionConfig& cfg) {
  cfg.validate();
  if (candidates.empty()) throw ContractError("select: no candidates");
  NoGradGuard no_grad;

  std::vector<const Image*> ptrs;
  ptrs.reserve(candidates.size());
  for (const Image& c : candidates) ptrs.push_back(&c);
  const Tensor x = images_to_tensor(ptrs);
  const Tensor t_logits = teacher.forward(x);
  const Tensor s_logits = student.forward(x);
  const int64_t c = t_logits.dim(1);
  if (label < 0 || label >= c) throw ContractError("select: label out of range");

  SelectionResult result;
  result.scores.resize(candidates.size());
  std::vector<double> t_lp, s_lp;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const double* t_row = t_logits.data().data() + int64_t(i) * c;
    const double* s_row = s_logits.data().data() + int64_t(i) * c;
    // teacher CE at temperature 1
    row_log_softmax(t_row, c, 1.0, t_lp);
    const double ce = -t_lp[size_t(label)];
    // softened teacher-student KL, tau^2-scaled like the KD loss
    row_log_softmax(t_row, c, cfg.tau, t_lp);
    row_log_softmax(s_row, c, cfg.tau, s_lp);
    double kl = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      kl += std::exp(t_lp[size_t(j)]) * (t_lp[size_t(j)] - s_lp[size_t(j)]);
    }
    kl *= cfg.tau * cfg.tau;
    result.scores[i] = cfg.alpha * ce - cfg.beta * kl;
  }

  result.chosen = 0;
  for (size_t i = 1; i < result.scores.size(); ++i) {
    if (result.scores[i] < result.scores[size_t(result.chosen)]) result.chosen = int(i);
  }
  return result;
}

SelectionResult select(const std::vector<Candidate>& candidates, int label, const Model& teacher,
                       const Model& student, const SelectionConfig& cfg) {
  std::vector<Image> images;
  images.reserve(candidates.size());
  for (const Candidate& c : candidates) images.push_back(c.image);
  return select(images, label, teacher, student, cfg);
}

DistillResult distill_with_selection(Model student, const Model& teacher,
                                     const SplitDataset& data, const SelectionConfig& sel_cfg,
                                     const KDConfig& kd_cfg, const TrainSpec& train_spec,
                                     const std::string& trace_path) {
  TrainSpec spec = train_spec;
  spec.aug.mode = AugMode::Selection;
  spec.loss = LossKind::Distill;
  spec.kd = kd_cfg;

  TrainOptions options;
  options.teacher = &teacher;
  options.selection = &sel_cfg;
  options.trace_path = trace_path;

  RunRecord record = train_model(student, data, spec, options);
  return {std::move(student), std::move(record)};
}

}  // namespace auglab
