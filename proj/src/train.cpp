// SPDX-License-Identifier: Apache-2.0
#include "auglab/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "auglab/errors.hpp"
#include "auglab/rng.hpp"

namespace auglab {

namespace {

constexpr uint64_t kShuffleTag = 0x73687566ULL;

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed, int epoch) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t(0));
  Rng rng(Rng::mix(seed ^ kShuffleTag, uint64_t(epoch)));
  for (size_t i = n; i > 1; --i) {
    const size_t j = size_t(rng.uniform_int(0, int64_t(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace

const char* aug_mode_name(AugMode mode) {
  switch (mode) {
    case AugMode::None: return "none";
    case AugMode::Fixed: return "fixed";
    case AugMode::Random: return "random";
    case AugMode::Decay: return "decay";
    case AugMode::Selection: return "selection";
  }
  throw ContractError("unknown augmentation mode");
}

AugMode aug_mode_from_name(const std::string& name) {
  for (AugMode m : {AugMode::None, AugMode::Fixed, AugMode::Random, AugMode::Decay,
                    AugMode::Selection}) {
    if (name == aug_mode_name(m)) return m;
  }
  throw ConfigError("unknown augmentation mode: " + name);
}

const char* loss_kind_name(LossKind kind) {
  return kind == LossKind::CrossEntropy ? "ce" : "kd";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "ce") return LossKind::CrossEntropy;
  if (name == "kd") return LossKind::Distill;
  throw ConfigError("unknown loss kind: " + name);
}

void TrainSpec::validate() const {
  if (epochs <= 0) throw ConfigError("train: epochs must be positive");
  if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0,1)");
  if (aug.mode == AugMode::Fixed && (aug.magnitude < 0 || aug.magnitude > kMaxMagnitude)) {
    throw ConfigError("train: fixed magnitude out of range");
  }
  if (loss == LossKind::Distill) kd.validate();
}

double RunRecord::final_accuracy() const {
  if (rows.empty()) throw ContractError("final_accuracy on an empty record");
  return rows.back().val_accuracy;
}

EvalResult evaluate(const Model& model, const Dataset& data, int batch_size) {
  if (data.size() == 0) throw ContractError("evaluate: empty dataset");
  NoGradGuard no_grad;
  EvalResult result;
  int64_t correct = 0;
  double ce_sum = 0.0;
  for (size_t start = 0; start < data.size(); start += size_t(batch_size)) {
    const size_t end = std::min(data.size(), start + size_t(batch_size));
    std::vector<const Image*> ptrs;
    ptrs.reserve(end - start);
    for (size_t i = start; i < end; ++i) ptrs.push_back(&data.images[i]);
    const Tensor logits = model.forward(images_to_tensor(ptrs));
    const int64_t c = logits.dim(1);
    const double* row = logits.data().data();
    for (size_t i = start; i < end; ++i, row += c) {
      int64_t best = 0;
      for (int64_t j = 1; j < c; ++j) {
        if (row[j] > row[best]) best = j;
      }
      correct += (best == data.labels[i]);
      double m = row[0];
      for (int64_t j = 1; j < c; ++j) m = std::max(m, row[j]);
      double acc = 0.0;
      for (int64_t j = 0; j < c; ++j) acc += std::exp(row[j] - m);
      ce_sum += (m + std::log(acc)) - row[data.labels[i]];
    }
  }
  result.accuracy = double(correct) / double(data.size());
  result.mean_ce = ce_sum / double(data.size());
  return result;
}

RunRecord train_model(Model& model, const SplitDataset& data, const TrainSpec& spec,
                      const TrainOptions& options) {
  spec.validate();
  if (spec.aug.mode == AugMode::Decay) {
    throw ContractError("train: decay schedules must be resolved to a fixed magnitude per stage");
  }
  if (spec.aug.mode == AugMode::Selection &&
      (options.selection == nullptr || options.teacher == nullptr)) {
    throw ContractError("train: selection augmentation needs a SelectionConfig and a teacher");
  }
  if (spec.loss == LossKind::Distill && options.teacher == nullptr) {
    throw ContractError("train: distillation needs a teacher");
  }
  if (options.selection != nullptr) options.selection->validate();
  if (data.train.size() == 0 || data.val.size() == 0) {
    throw ContractError("train: both splits must be non-empty");
  }

  std::ofstream trace;
  if (!options.trace_path.empty()) {
    trace.open(options.trace_path, std::ios::trunc);
    if (!trace) throw IoError("cannot open trace file " + options.trace_path);
    if (spec.aug.mode == AugMode::Selection) {
      trace << "epoch,sample_index,chosen_magnitude,score_chosen,score_mean\n";
    } else {
      trace << "sample_index,op1,op2,magnitude\n";
    }
  }

  SgdOptimizer optimizer(spec.lr, spec.momentum);
  const std::vector<Tensor> params = model.trainable();
  const auto masks = aligned_masks(model, options.mask);
  const double ratio = options.mask != nullptr ? pruning_ratio(*options.mask) : 0.0;
  const size_t train_size = data.train.size();

  RunRecord record;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<size_t> order = shuffled_indices(train_size, spec.seed, epoch);

    double loss_sum = 0.0;
    double magnitude_sum = 0.0;
    int64_t magnitude_count = 0;

    for (size_t start = 0; start < train_size; start += size_t(spec.batch_size)) {
      const size_t end = std::min(train_size, start + size_t(spec.batch_size));
      std::vector<Image> batch_images;
      std::vector<int> batch_labels;
      batch_images.reserve(end - start);
      batch_labels.reserve(end - start);

      for (size_t pos = start; pos < end; ++pos) {
        const size_t idx = order[pos];
        const Image& original = data.train.images[idx];
        const int label = data.train.labels[idx];
        const uint64_t ordinal = uint64_t(epoch) * train_size + pos;
        Rng stream(spec.seed ^ ordinal);

        switch (spec.aug.mode) {
          case AugMode::None:
            batch_images.push_back(original);
            break;
          case AugMode::Fixed: {
            AugOpKind op1, op2;
            batch_images.push_back(
                randaugment(original, AugPolicy{spec.aug.magnitude}, stream, &op1, &op2));
            magnitude_sum += spec.aug.magnitude;
            ++magnitude_count;
            if (trace.is_open()) {
              trace << ordinal << "," << aug_op_name(op1) << "," << aug_op_name(op2) << ","
                    << spec.aug.magnitude << "\n";
            }
            break;
          }
          case AugMode::Random: {
            MagnitudeDraw draw = random_magnitude_augment(original, stream);
            magnitude_sum += draw.magnitude;
            ++magnitude_count;
            if (trace.is_open()) {
              trace << ordinal << "," << aug_op_name(draw.first) << ","
                    << aug_op_name(draw.second) << "," << draw.magnitude << "\n";
            }
            batch_images.push_back(std::move(draw.image));
            break;
          }
          case AugMode::Selection: {
            const auto candidates = generate_candidates(original, options.selection->n, stream);
            const SelectionResult sel =
                select(candidates, label, *options.teacher, model, *options.selection);
            magnitude_sum += candidates[size_t(sel.chosen)].magnitude;
            ++magnitude_count;
            if (trace.is_open()) {
              const double mean =
                  std::accumulate(sel.scores.begin(), sel.scores.end(), 0.0) /
                  double(sel.scores.size());
              trace << epoch << "," << ordinal << ","
                    << candidates[size_t(sel.chosen)].magnitude << ","
                    << sel.scores[size_t(sel.chosen)] << "," << mean << "\n";
            }
            batch_images.push_back(candidates[size_t(sel.chosen)].image);
            break;
          }
          case AugMode::Decay:
            break;  // rejected above
        }
        batch_labels.push_back(label);
      }

      std::vector<const Image*> ptrs;
      ptrs.reserve(batch_images.size());
      for (const Image& img : batch_images) ptrs.push_back(&img);
      const Tensor x = images_to_tensor(ptrs);

      const Tensor logits = model.forward(x);
      Tensor loss;
      if (spec.loss == LossKind::CrossEntropy) {
        loss = cross_entropy(logits, batch_labels);
      } else {
        Tensor teacher_logits;
        {
          NoGradGuard no_grad;
          teacher_logits = options.teacher->forward(x);
        }
        loss = combined_loss(cross_entropy(logits, batch_labels),
                             kd_kl(teacher_logits, logits, spec.kd.tau), spec.kd.alpha);
      }
      loss_sum += loss.item() * double(end - start);
      backward(loss);
      optimizer.step(params, masks);
    }

    const EvalResult val = evaluate(model, data.val, spec.batch_size);
    EpochRow row;
    row.stage = options.stage_index;
    row.epoch = epoch;
    row.train_loss = loss_sum / double(train_size);
    row.val_accuracy = val.accuracy;
    row.pruning_ratio = ratio;
    row.magnitude_in_effect =
        magnitude_count > 0 ? magnitude_sum / double(magnitude_count) : -1.0;
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    record.rows.push_back(row);
  }
  record.seed = spec.seed;
  return record;
}

}  // namespace auglab
