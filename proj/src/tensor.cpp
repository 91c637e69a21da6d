// SPDX-License-Identifier: Apache-2.0
#include "auglab/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "auglab/errors.hpp"
#include "auglab/rng.hpp"

namespace auglab {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad) {
  for (int64_t d : shape) {
    if (d <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->data.assign(size_t(shape_numel(impl_->shape)), 0.0);
  impl_->requires_grad = requires_grad;
  impl_->grad_path = requires_grad;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  if (int64_t(data.size()) != t.numel()) {
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(t.shape()));
  }
  t.impl_->data = std::move(data);
  return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::kaiming_uniform(Shape shape, int64_t fan_in, Rng& rng, bool requires_grad) {
  if (fan_in <= 0) throw ContractError("kaiming_uniform: fan_in must be positive");
  double bound = std::sqrt(6.0 / double(fan_in));
  return uniform(std::move(shape), -bound, bound, rng, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  for (double& v : t.impl_->data) v = rng.uniform(lo, hi);
  return t;
}

void Tensor::require_defined() const {
  if (!impl_) throw ContractError("operation on an undefined tensor");
}

const Shape& Tensor::shape() const { require_defined(); return impl_->shape; }
int Tensor::rank() const { require_defined(); return int(impl_->shape.size()); }

int64_t Tensor::dim(int i) const {
  require_defined();
  if (i < 0 || i >= rank()) throw ContractError("dim index out of range");
  return impl_->shape[size_t(i)];
}

int64_t Tensor::numel() const { require_defined(); return int64_t(impl_->data.size()); }

const std::vector<double>& Tensor::data() const { require_defined(); return impl_->data; }
std::vector<double>& Tensor::mutable_data() { require_defined(); return impl_->data; }

bool Tensor::requires_grad() const { require_defined(); return impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  require_defined();
  impl_->requires_grad = value;
  if (value) impl_->grad_path = true;
}

bool Tensor::has_grad() const { require_defined(); return !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  require_defined();
  if (impl_->grad.empty()) throw ContractError("tensor has no gradient buffer");
  return impl_->grad;
}

std::vector<double>& Tensor::ensure_grad() {
  require_defined();
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::drop_grad() { require_defined(); impl_->grad.clear(); }

double Tensor::item() const {
  require_defined();
  if (impl_->data.size() != 1) {
    throw ContractError("item() requires a scalar tensor, shape is " + shape_str(impl_->shape));
  }
  return impl_->data[0];
}

Tensor Tensor::clone() const {
  require_defined();
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = impl_->shape;
  t.impl_->data = impl_->data;
  t.impl_->requires_grad = impl_->requires_grad;
  t.impl_->grad_path = impl_->requires_grad;
  return t;
}

bool Tensor::on_grad_path() const { require_defined(); return impl_->grad_path; }
void Tensor::mark_grad_path() { require_defined(); impl_->grad_path = true; }

// ---- Graph -----------------------------------------------------------------

Graph& Graph::current() {
  thread_local Graph graph;
  return graph;
}

void Graph::record(GraphNode node) { nodes_.push_back(std::move(node)); }

void Graph::clear() { nodes_.clear(); }

void Graph::run_backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, shape is " + shape_str(loss.shape()));
  }
  check_finite(loss.data(), "loss");

  // Zero every gradient buffer that this pass may touch, exactly once, before
  // any accumulation happens.
  std::unordered_set<const void*> seen;
  auto reset = [&seen](const Tensor& t) {
    Tensor copy = t;
    if (seen.insert(copy.id()).second) {
      auto& g = copy.ensure_grad();
      std::fill(g.begin(), g.end(), 0.0);
    }
  };
  for (const GraphNode& node : nodes_) {
    for (const Tensor& in : node.inputs) reset(in);
    reset(node.output);
  }
  reset(loss);

  Tensor seed = loss;
  seed.ensure_grad()[0] = 1.0;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->backward) it->backward(*it);
  }

  for (const GraphNode& node : nodes_) {
    for (const Tensor& in : node.inputs) {
      if (in.has_grad()) check_finite(in.grad(), node.op);
    }
  }
  clear();
}

NoGradGuard::NoGradGuard() {
  previous_ = Graph::current().recording_;
  Graph::current().recording_ = false;
}

NoGradGuard::~NoGradGuard() { Graph::current().recording_ = previous_; }

void backward(const Tensor& loss) { Graph::current().run_backward(loss); }

void check_finite(const std::vector<double>& values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value in ") + what);
    }
  }
}

// ---- SGD -------------------------------------------------------------------

SgdOptimizer::SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr > 0.0)) throw ContractError("sgd: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("sgd: momentum must be in [0,1)");
}

void SgdOptimizer::step(const std::vector<Tensor>& params, const std::vector<MaskView>& masks) {
  if (!masks.empty() && masks.size() != params.size()) {
    throw ContractError("sgd: mask list does not align with parameter list");
  }
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor param = params[p];
    if (!param.has_grad()) {
      throw ContractError("sgd: parameter " + std::to_string(p) + " has no gradient");
    }
    const std::vector<double>& g = param.grad();
    std::vector<double>& w = param.mutable_data();
    std::vector<double>& v = velocity_[param.id()];
    if (v.size() != w.size()) v.assign(w.size(), 0.0);

    for (size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      w[i] -= lr_ * v[i];
    }
    if (!masks.empty() && masks[p] != nullptr) {
      const std::vector<uint8_t>& mask = *masks[p];
      if (mask.size() != w.size()) throw ContractError("sgd: mask shape mismatch");
      for (size_t i = 0; i < w.size(); ++i) {
        if (mask[i] == 0) {
          w[i] = 0.0;
          v[i] = 0.0;
        }
      }
    }
    check_finite(w, "sgd update");
  }
}

}  // namespace auglab
