// SPDX-License-Identifier: Apache-2.0
#include "auglab/losses.hpp"

#include <cmath>
#include <functional>

#include "auglab/errors.hpp"

namespace auglab {

namespace {

// Row-wise softened softmax and log-softmax at temperature tau.
void softened_rows(const Tensor& logits, double tau, std::vector<double>& prob,
                   std::vector<double>& logprob) {
  const int64_t batch = logits.dim(0), c = logits.dim(1);
  prob.resize(size_t(batch * c));
  logprob.resize(size_t(batch * c));
  const double* in = logits.data().data();
  for (int64_t b = 0; b < batch; ++b) {
    const double* row = in + b * c;
    double m = row[0] / tau;
    for (int64_t j = 1; j < c; ++j) m = std::max(m, row[j] / tau);
    double acc = 0.0;
    for (int64_t j = 0; j < c; ++j) acc += std::exp(row[j] / tau - m);
    const double lse = m + std::log(acc);
    for (int64_t j = 0; j < c; ++j) {
      const double lp = row[j] / tau - lse;
      logprob[size_t(b * c + j)] = lp;
      prob[size_t(b * c + j)] = std::exp(lp);
    }
  }
}

void record_kd_node(const Tensor& teacher, const Tensor& student, Tensor& out, double tau,
                    std::vector<double> teacher_prob, std::vector<double> student_prob) {
  Graph& graph = Graph::current();
  if (!graph.recording() || !student.on_grad_path()) return;
  out.mark_grad_path();
  auto pt = std::make_shared<std::vector<double>>(std::move(teacher_prob));
  auto ps = std::make_shared<std::vector<double>>(std::move(student_prob));
  graph.record(GraphNode{
      "kd_kl", {teacher, student}, out, [tau, pt, ps](GraphNode& node) {
        Tensor& student = node.inputs[1];  // the teacher side is a constant
        const int64_t batch = student.dim(0);
        const double g = node.output.grad()[0];
        // d/ds tau^2/n sum p_T (log p_T - log p_S) = tau/n (p_S - p_T)
        const double k = g * tau / double(batch);
        auto& gs = student.ensure_grad();
        for (size_t i = 0; i < gs.size(); ++i) gs[i] += k * ((*ps)[i] - (*pt)[i]);
      }});
}

}  // namespace

void KDConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("kd: tau must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("kd: alpha must be in (0,1]");
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  return nll_loss(log_softmax(logits), labels);
}

Tensor kd_kl(const Tensor& teacher_logits, const Tensor& student_logits, double tau) {
  if (!(tau > 0.0)) throw ContractError("kd_kl: tau must be positive");
  if (teacher_logits.rank() != 2 || student_logits.rank() != 2 ||
      teacher_logits.shape() != student_logits.shape()) {
    throw DimensionError("kd_kl: logit shapes differ: " + shape_str(teacher_logits.shape()) +
                         " vs " + shape_str(student_logits.shape()));
  }
  const int64_t batch = teacher_logits.dim(0), c = teacher_logits.dim(1);

  std::vector<double> pt, lpt, ps, lps;
  softened_rows(teacher_logits, tau, pt, lpt);
  softened_rows(student_logits, tau, ps, lps);

  double acc = 0.0;
  for (int64_t i = 0; i < batch * c; ++i) {
    acc += pt[size_t(i)] * (lpt[size_t(i)] - lps[size_t(i)]);
  }
  Tensor out = Tensor::scalar(tau * tau * acc / double(batch));
  check_finite(out.data(), "kd_kl");

  record_kd_node(teacher_logits, student_logits, out, tau, std::move(pt), std::move(ps));
  return out;
}

Tensor combined_loss(const Tensor& ce, const Tensor& kl, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractError("combined_loss: alpha must be in (0,1]");
  return add(scale(ce, alpha), scale(kl, 1.0 - alpha));
}

}  // namespace auglab
