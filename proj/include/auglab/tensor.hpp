// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace auglab {

class Rng;

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense 64-bit float tensor. Copying a Tensor copies the handle, not the
// buffer; op outputs are treated as immutable once written, so sharing a
// buffer inside a training step is safe. Mutation is reserved for explicit
// parameter updates (optimizer, pruning, weight transfer).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);

  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  // Kaiming-uniform fan-in init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
  static Tensor kaiming_uniform(Shape shape, int64_t fan_in, Rng& rng,
                                bool requires_grad = true);
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng,
                        bool requires_grad = true);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int64_t dim(int i) const;
  int64_t numel() const;

  const std::vector<double>& data() const;
  std::vector<double>& mutable_data();

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  const std::vector<double>& grad() const;
  std::vector<double>& ensure_grad();  // allocates a zeroed buffer if absent
  void drop_grad();

  double item() const;  // scalar tensors only

  Tensor clone() const;  // deep copy of data (grad not copied)

  // Stable identity of the underlying buffer; used as optimizer-state key.
  const void* id() const { return impl_.get(); }
  bool same_buffer(const Tensor& other) const { return impl_ == other.impl_; }

  // True when this tensor is a parameter or was produced by a recorded op.
  bool on_grad_path() const;
  void mark_grad_path();

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until needed
    bool requires_grad = false;
    bool grad_path = false;
  };
  std::shared_ptr<Impl> impl_;
  void require_defined() const;
};

// One recorded operation on the tape. The backward callback receives the
// node itself and accumulates d(loss)/d(input) from the output gradient.
struct GraphNode {
  const char* op = "";
  std::vector<Tensor> inputs;
  Tensor output;
  std::function<void(GraphNode&)> backward;
};

// Per-thread tape. Ops append nodes while recording is on; since an op's
// inputs always exist before its output, creation order is a topological
// order. backward() replays the tape once in reverse and then clears it.
class Graph {
 public:
  static Graph& current();

  bool recording() const { return recording_; }
  void record(GraphNode node);
  size_t size() const { return nodes_.size(); }
  void clear();

  void run_backward(const Tensor& loss);

 private:
  friend class NoGradGuard;
  std::vector<GraphNode> nodes_;
  bool recording_ = true;
};

// Disables tape recording for the current thread while alive (evaluation
// passes, teacher forwards).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Seeds d(loss)/d(loss) = 1 and replays the current thread's tape. After the
// call every tensor with requires_grad that contributed to the loss holds its
// gradient, and the tape is cleared.
void backward(const Tensor& loss);

// ---- Differentiable operations -------------------------------------------

// out[b,o] = sum_i input[b,i] * weight[i,o] + bias[o]
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Cross-correlation, NCHW input, OIHW kernel. Output extents must divide
// exactly: h_out = (h + 2*pad - kh) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);

Tensor relu(const Tensor& x);
Tensor maxpool2x2(const Tensor& x);         // NCHW, stride 2, floor extents
Tensor global_avg_pool(const Tensor& x);    // [b,c,h,w] -> [b,c]
Tensor log_softmax(const Tensor& x);        // rank-2, row-wise, max-subtracted
Tensor flatten(const Tensor& x);            // [b,...] -> [b, rest]
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);                // -> scalar
// -mean_b logp[b, labels[b]]; labels must lie in [0, classes)
Tensor nll_loss(const Tensor& logp, const std::vector<int>& labels);

// Throws NumericError if any value is non-finite.
void check_finite(const std::vector<double>& values, const char* what);

// ---- Optimizer -------------------------------------------------------------

// SGD with classical momentum: v <- momentum*v + grad; w <- w - lr*v.
// When a mask entry is 0 the weight and its velocity are forced to exactly
// 0.0 after the update, so pruned coordinates can never drift.
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum);

  using MaskView = const std::vector<uint8_t>*;  // nullptr => unmasked
  void step(const std::vector<Tensor>& params,
            const std::vector<MaskView>& masks = {});

  double lr() const { return lr_; }
  double momentum() const { return momentum_; }

 private:
  double lr_;
  double momentum_;
  std::unordered_map<const void*, std::vector<double>> velocity_;
};

}  // namespace auglab
