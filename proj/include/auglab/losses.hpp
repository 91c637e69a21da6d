// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "auglab/tensor.hpp"

namespace auglab {

// Distillation hyperparameters: softmax temperature and the CE/KL mix.
struct KDConfig {
  double tau = 4.0;    // > 0
  double alpha = 0.5;  // in (0, 1]

  void validate() const;
  bool operator==(const KDConfig&) const = default;
};

// Mean over the batch of -log softmax_label(logits). Differentiable; labels
// must lie in [0, classes).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// tau^2 * mean_b KL(softmax(t/tau) || softmax(s/tau)). Non-negative, zero
// exactly when the softened distributions agree row-wise. The teacher side is
// treated as a constant: gradients flow only into student_logits.
Tensor kd_kl(const Tensor& teacher_logits, const Tensor& student_logits, double tau);

// alpha * ce + (1 - alpha) * kl
Tensor combined_loss(const Tensor& ce, const Tensor& kl, double alpha);

}  // namespace auglab
