// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "auglab/errors.hpp"
#include "auglab/tensor.hpp"

namespace auglab {

namespace {

// Records a node when recording is on and at least one input can carry a
// gradient. Outputs of recorded nodes are themselves grad-path tensors.
void record_node(const char* op, std::vector<Tensor> inputs, Tensor& out,
                 std::function<void(GraphNode&)> backward) {
  Graph& graph = Graph::current();
  if (!graph.recording()) return;
  bool needed = false;
  for (const Tensor& t : inputs) {
    if (t.on_grad_path()) {
      needed = true;
      break;
    }
  }
  if (!needed) return;
  out.mark_grad_path();
  graph.record(GraphNode{op, std::move(inputs), out, std::move(backward)});
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

}  // namespace

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "dense");
  require_rank(weight, 2, "dense");
  require_rank(bias, 1, "dense");
  const int64_t batch = input.dim(0), in = input.dim(1);
  const int64_t out_f = weight.dim(1);
  if (weight.dim(0) != in || bias.dim(0) != out_f) {
    throw DimensionError("dense: shapes do not conform: input " + shape_str(input.shape()) +
                         " weight " + shape_str(weight.shape()) + " bias " +
                         shape_str(bias.shape()));
  }

  Tensor out(Shape{batch, out_f});
  {
    const double* x = input.data().data();
    const double* w = weight.data().data();
    const double* b = bias.data().data();
    double* y = out.mutable_data().data();
    for (int64_t r = 0; r < batch; ++r) {
      double* yr = y + r * out_f;
      for (int64_t o = 0; o < out_f; ++o) yr[o] = b[o];
      const double* xr = x + r * in;
      for (int64_t i = 0; i < in; ++i) {
        const double a = xr[i];
        const double* wr = w + i * out_f;
        for (int64_t o = 0; o < out_f; ++o) yr[o] += a * wr[o];
      }
    }
  }
  check_finite(out.data(), "dense");

  record_node("dense", {input, weight, bias}, out, [](GraphNode& node) {
    Tensor& input = node.inputs[0];
    Tensor& weight = node.inputs[1];
    Tensor& bias = node.inputs[2];
    const int64_t batch = input.dim(0), in = input.dim(1), out_f = weight.dim(1);
    const double* g = node.output.grad().data();
    if (input.on_grad_path()) {
      double* gx = input.ensure_grad().data();
      const double* w = weight.data().data();
      for (int64_t r = 0; r < batch; ++r) {
        const double* gr = g + r * out_f;
        double* gxr = gx + r * in;
        for (int64_t i = 0; i < in; ++i) {
          const double* wr = w + i * out_f;
          double acc = 0.0;
          for (int64_t o = 0; o < out_f; ++o) acc += gr[o] * wr[o];
          gxr[i] += acc;
        }
      }
    }
    if (weight.on_grad_path()) {
      double* gw = weight.ensure_grad().data();
      const double* x = input.data().data();
      for (int64_t r = 0; r < batch; ++r) {
        const double* xr = x + r * in;
        const double* gr = g + r * out_f;
        for (int64_t i = 0; i < in; ++i) {
          const double a = xr[i];
          double* gwr = gw + i * out_f;
          for (int64_t o = 0; o < out_f; ++o) gwr[o] += a * gr[o];
        }
      }
    }
    if (bias.on_grad_path()) {
      double* gb = bias.ensure_grad().data();
      for (int64_t r = 0; r < batch; ++r) {
        const double* gr = g + r * out_f;
        for (int64_t o = 0; o < out_f; ++o) gb[o] += gr[o];
      }
    }
  });
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  require_rank(input, 4, "conv2d");
  require_rank(kernel, 4, "conv2d");
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  if (pad < 0) throw ContractError("conv2d: pad must be >= 0");
  const int64_t batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int64_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw DimensionError("conv2d: kernel channels " + std::to_string(kernel.dim(1)) +
                         " do not match input channels " + std::to_string(cin));
  }
  if (kh > h + 2 * pad || kw > w + 2 * pad) {
    throw DimensionError("conv2d: kernel larger than padded input");
  }
  if ((h + 2 * pad - kh) % stride != 0 || (w + 2 * pad - kw) % stride != 0) {
    throw DimensionError("conv2d: output extent is not integral for stride " +
                         std::to_string(stride));
  }
  const int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const int64_t ow = (w + 2 * pad - kw) / stride + 1;

  // valid output column range for kernel column kx:
  //   ix = ox*stride + kx - pad must land in [0, w)
  auto col_range = [&](int64_t kx, int64_t& lo, int64_t& hi) {
    const int64_t num = pad - kx;
    lo = num <= 0 ? 0 : (num + stride - 1) / stride;
    hi = std::min(ow - 1, (w - 1 + pad - kx) / stride);
  };

  Tensor out(Shape{batch, cout, oh, ow});
  {
    const double* x = input.data().data();
    const double* k = kernel.data().data();
    double* y = out.mutable_data().data();
    for (int64_t b = 0; b < batch; ++b) {
      const double* xb = x + b * cin * h * w;
      double* yb = y + b * cout * oh * ow;
      for (int64_t co = 0; co < cout; ++co) {
        double* yp = yb + co * oh * ow;
        const double* kc = k + co * cin * kh * kw;
        for (int64_t ci = 0; ci < cin; ++ci) {
          const double* xp = xb + ci * h * w;
          const double* kp = kc + ci * kh * kw;
          for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t oy = 0; oy < oh; ++oy) {
              const int64_t iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= h) continue;
              const double* xrow = xp + iy * w;
              double* yrow = yp + oy * ow;
              for (int64_t kx = 0; kx < kw; ++kx) {
                const double kv = kp[ky * kw + kx];
                int64_t lo, hi;
                col_range(kx, lo, hi);
                const int64_t off = kx - pad;
                for (int64_t ox = lo; ox <= hi; ++ox) {
                  yrow[ox] += kv * xrow[ox * stride + off];
                }
              }
            }
          }
        }
      }
    }
  }
  check_finite(out.data(), "conv2d");

  record_node("conv2d", {input, kernel}, out, [stride, pad](GraphNode& node) {
    Tensor& input = node.inputs[0];
    Tensor& kernel = node.inputs[1];
    const int64_t batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    const int64_t oh = node.output.dim(2), ow = node.output.dim(3);
    const double* g = node.output.grad().data();
    const bool want_dx = input.on_grad_path();
    const bool want_dk = kernel.on_grad_path();
    double* gx = want_dx ? input.ensure_grad().data() : nullptr;
    double* gk = want_dk ? kernel.ensure_grad().data() : nullptr;
    const double* x = input.data().data();
    const double* k = kernel.data().data();

    auto col_range = [&](int64_t kx, int64_t& lo, int64_t& hi) {
      const int64_t num = pad - kx;
      lo = num <= 0 ? 0 : (num + stride - 1) / stride;
      hi = std::min(ow - 1, (w - 1 + pad - kx) / stride);
    };

    for (int64_t b = 0; b < batch; ++b) {
      const double* xb = x + b * cin * h * w;
      double* gxb = want_dx ? gx + b * cin * h * w : nullptr;
      const double* gb = g + b * cout * oh * ow;
      for (int64_t co = 0; co < cout; ++co) {
        const double* gp = gb + co * oh * ow;
        const double* kc = k + co * cin * kh * kw;
        double* gkc = want_dk ? gk + co * cin * kh * kw : nullptr;
        for (int64_t ci = 0; ci < cin; ++ci) {
          const double* xp = xb + ci * h * w;
          double* gxp = want_dx ? gxb + ci * h * w : nullptr;
          const double* kp = kc + ci * kh * kw;
          double* gkp = want_dk ? gkc + ci * kh * kw : nullptr;
          for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t oy = 0; oy < oh; ++oy) {
              const int64_t iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= h) continue;
              const double* xrow = xp + iy * w;
              double* gxrow = want_dx ? gxp + iy * w : nullptr;
              const double* grow = gp + oy * ow;
              for (int64_t kx = 0; kx < kw; ++kx) {
                int64_t lo, hi;
                col_range(kx, lo, hi);
                const int64_t off = kx - pad;
                if (want_dk) {
                  double acc = 0.0;
                  for (int64_t ox = lo; ox <= hi; ++ox) {
                    acc += grow[ox] * xrow[ox * stride + off];
                  }
                  gkp[ky * kw + kx] += acc;
                }
                if (want_dx) {
                  const double kv = kp[ky * kw + kx];
                  for (int64_t ox = lo; ox <= hi; ++ox) {
                    gxrow[ox * stride + off] += kv * grow[ox];
                  }
                }
              }
            }
          }
        }
      }
    }
  });
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const auto& in = x.data();
  auto& y = out.mutable_data();
  for (size_t i = 0; i < in.size(); ++i) y[i] = in[i] > 0.0 ? in[i] : 0.0;
  check_finite(out.data(), "relu");

  record_node("relu", {x}, out, [](GraphNode& node) {
    Tensor& x = node.inputs[0];
    if (!x.on_grad_path()) return;
    const auto& g = node.output.grad();
    const auto& in = x.data();
    auto& gx = x.ensure_grad();
    for (size_t i = 0; i < in.size(); ++i) {
      if (in[i] > 0.0) gx[i] += g[i];
    }
  });
  return out;
}

Tensor maxpool2x2(const Tensor& x) {
  require_rank(x, 4, "maxpool2x2");
  const int64_t batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1) throw DimensionError("maxpool2x2: input too small " + shape_str(x.shape()));

  Tensor out(Shape{batch, c, oh, ow});
  auto argmax = std::make_shared<std::vector<int64_t>>(size_t(batch * c * oh * ow));
  {
    const double* in = x.data().data();
    double* y = out.mutable_data().data();
    int64_t* am = argmax->data();
    int64_t o = 0;
    for (int64_t bc = 0; bc < batch * c; ++bc) {
      const double* plane = in + bc * h * w;
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ox = 0; ox < ow; ++ox, ++o) {
          const int64_t iy = oy * 2, ix = ox * 2;
          int64_t best = iy * w + ix;
          double bv = plane[best];
          const int64_t cand[3] = {iy * w + ix + 1, (iy + 1) * w + ix, (iy + 1) * w + ix + 1};
          for (int64_t idx : cand) {
            if (plane[idx] > bv) {
              bv = plane[idx];
              best = idx;
            }
          }
          y[o] = bv;
          am[o] = bc * h * w + best;
        }
      }
    }
  }
  check_finite(out.data(), "maxpool2x2");

  record_node("maxpool2x2", {x}, out, [argmax](GraphNode& node) {
    Tensor& x = node.inputs[0];
    if (!x.on_grad_path()) return;
    const auto& g = node.output.grad();
    auto& gx = x.ensure_grad();
    const int64_t* am = argmax->data();
    for (size_t i = 0; i < g.size(); ++i) gx[size_t(am[i])] += g[i];
  });
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool");
  const int64_t batch = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out(Shape{batch, c});
  {
    const double* in = x.data().data();
    double* y = out.mutable_data().data();
    for (int64_t bc = 0; bc < batch * c; ++bc) {
      double acc = 0.0;
      const double* plane = in + bc * hw;
      for (int64_t i = 0; i < hw; ++i) acc += plane[i];
      y[bc] = acc / double(hw);
    }
  }
  check_finite(out.data(), "global_avg_pool");

  record_node("global_avg_pool", {x}, out, [](GraphNode& node) {
    Tensor& x = node.inputs[0];
    if (!x.on_grad_path()) return;
    const int64_t hw = x.dim(2) * x.dim(3);
    const auto& g = node.output.grad();
    auto& gx = x.ensure_grad();
    const double inv = 1.0 / double(hw);
    for (size_t bc = 0; bc < g.size(); ++bc) {
      const double gv = g[bc] * inv;
      double* plane = gx.data() + bc * size_t(hw);
      for (int64_t i = 0; i < hw; ++i) plane[i] += gv;
    }
  });
  return out;
}

Tensor log_softmax(const Tensor& x) {
  require_rank(x, 2, "log_softmax");
  const int64_t batch = x.dim(0), c = x.dim(1);
  Tensor out(Shape{batch, c});
  {
    const double* in = x.data().data();
    double* y = out.mutable_data().data();
    for (int64_t b = 0; b < batch; ++b) {
      const double* row = in + b * c;
      double m = row[0];
      for (int64_t j = 1; j < c; ++j) m = std::max(m, row[j]);
      double acc = 0.0;
      for (int64_t j = 0; j < c; ++j) acc += std::exp(row[j] - m);
      const double lse = m + std::log(acc);
      double* yr = y + b * c;
      for (int64_t j = 0; j < c; ++j) yr[j] = row[j] - lse;
    }
  }
  check_finite(out.data(), "log_softmax");

  record_node("log_softmax", {x}, out, [](GraphNode& node) {
    Tensor& x = node.inputs[0];
    if (!x.on_grad_path()) return;
    const int64_t batch = node.output.dim(0), c = node.output.dim(1);
    const auto& g = node.output.grad();
    const auto& y = node.output.data();
    auto& gx = x.ensure_grad();
    for (int64_t b = 0; b < batch; ++b) {
      const double* gr = g.data() + b * c;
      const double* yr = y.data() + b * c;
      double gsum = 0.0;
      for (int64_t j = 0; j < c; ++j) gsum += gr[j];
      double* gxr = gx.data() + b * c;
      for (int64_t j = 0; j < c; ++j) gxr[j] += gr[j] - std::exp(yr[j]) * gsum;
    }
  });
  return out;
}

Tensor flatten(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("flatten: expected rank >= 2");
  int64_t rest = 1;
  for (int i = 1; i < x.rank(); ++i) rest *= x.dim(i);
  Tensor out = Tensor::from_data({x.dim(0), rest}, x.data());

  record_node("flatten", {x}, out, [](GraphNode& node) {
    Tensor& x = node.inputs[0];
    if (!x.on_grad_path()) return;
    const auto& g = node.output.grad();
    auto& gx = x.ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out(a.shape());
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& y = out.mutable_data();
  for (size_t i = 0; i < av.size(); ++i) y[i] = av[i] + bv[i];
  check_finite(out.data(), "add");

  record_node("add", {a, b}, out, [](GraphNode& node) {
    const auto& g = node.output.grad();
    for (Tensor& t : node.inputs) {
      if (!t.on_grad_path()) continue;
      auto& gt = t.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out(a.shape());
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& y = out.mutable_data();
  for (size_t i = 0; i < av.size(); ++i) y[i] = av[i] * bv[i];
  check_finite(out.data(), "mul");

  record_node("mul", {a, b}, out, [](GraphNode& node) {
    Tensor& a = node.inputs[0];
    Tensor& b = node.inputs[1];
    const auto& g = node.output.grad();
    if (a.on_grad_path()) {
      auto& ga = a.ensure_grad();
      const auto& bv = b.data();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b.on_grad_path()) {
      auto& gb = b.ensure_grad();
      const auto& av = a.data();
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out(x.shape());
  const auto& in = x.data();
  auto& y = out.mutable_data();
  for (size_t i = 0; i < in.size(); ++i) y[i] = in[i] * factor;
  check_finite(out.data(), "scale");

  record_node("scale", {x}, out, [factor](GraphNode& node) {
    Tensor& x = node.inputs[0];
    if (!x.on_grad_path()) return;
    const auto& g = node.output.grad();
    auto& gx = x.ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  check_finite(out.data(), "sum");

  record_node("sum", {x}, out, [](GraphNode& node) {
    Tensor& x = node.inputs[0];
    if (!x.on_grad_path()) return;
    const double g = node.output.grad()[0];
    auto& gx = x.ensure_grad();
    for (double& v : gx) v += g;
  });
  return out;
}

Tensor nll_loss(const Tensor& logp, const std::vector<int>& labels) {
  require_rank(logp, 2, "nll_loss");
  const int64_t batch = logp.dim(0), c = logp.dim(1);
  if (int64_t(labels.size()) != batch) {
    throw DimensionError("nll_loss: label count " + std::to_string(labels.size()) +
                         " does not match batch " + std::to_string(batch));
  }
  for (int y : labels) {
    if (y < 0 || y >= c) {
      throw ContractError("nll_loss: label " + std::to_string(y) + " out of range [0," +
                          std::to_string(c) + ")");
    }
  }
  double acc = 0.0;
  const double* lp = logp.data().data();
  for (int64_t b = 0; b < batch; ++b) acc -= lp[b * c + labels[size_t(b)]];
  Tensor out = Tensor::scalar(acc / double(batch));
  check_finite(out.data(), "nll_loss");

  auto labels_copy = std::make_shared<std::vector<int>>(labels);
  record_node("nll_loss", {logp}, out, [labels_copy](GraphNode& node) {
    Tensor& logp = node.inputs[0];
    if (!logp.on_grad_path()) return;
    const int64_t batch = logp.dim(0), c = logp.dim(1);
    const double g = node.output.grad()[0] / double(batch);
    auto& gx = logp.ensure_grad();
    for (int64_t b = 0; b < batch; ++b) gx[size_t(b * c + (*labels_copy)[size_t(b)])] -= g;
  });
  return out;
}

}  // namespace auglab
