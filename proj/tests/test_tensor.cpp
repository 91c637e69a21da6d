// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "auglab/checkpoint.hpp"
#include "auglab/errors.hpp"
#include "auglab/model.hpp"
#include "auglab/rng.hpp"
#include "auglab/tensor.hpp"
#include "test_util.hpp"

using namespace auglab;
using namespace auglab::testing;

namespace {

// independent triple-loop matmul used as the dense oracle
std::vector<double> naive_dense(const std::vector<double>& x, const std::vector<double>& w,
                                const std::vector<double>& b, int64_t n, int64_t in, int64_t out) {
  std::vector<double> y(size_t(n * out), 0.0);
  for (int64_t r = 0; r < n; ++r) {
    for (int64_t o = 0; o < out; ++o) {
      long double acc = b[size_t(o)];
      for (int64_t i = 0; i < in; ++i) {
        acc += (long double)x[size_t(r * in + i)] * w[size_t(i * out + o)];
      }
      y[size_t(r * out + o)] = double(acc);
    }
  }
  return y;
}

// six-nested-loop direct convolution oracle
std::vector<double> naive_conv(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  const int64_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int64_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const int64_t ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> y(size_t(n * cout * oh * ow), 0.0);
  for (int64_t b = 0; b < n; ++b)
    for (int64_t co = 0; co < cout; ++co)
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          long double acc = 0.0;
          for (int64_t ci = 0; ci < cin; ++ci)
            for (int64_t ky = 0; ky < kh; ++ky)
              for (int64_t kx = 0; kx < kw; ++kx) {
                const int64_t iy = oy * stride + ky - pad;
                const int64_t ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += (long double)input.data()[size_t(((b * cin + ci) * h + iy) * w + ix)] *
                       kernel.data()[size_t(((co * cin + ci) * kh + ky) * kw + kx)];
              }
          y[size_t(((b * cout + co) * oh + oy) * ow + ox)] = double(acc);
        }
  return y;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("dense identity weight passes input through") {
  Tensor x = Tensor::from_data({1, 2}, {1, 2});
  Tensor w = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor b = Tensor::from_data({2}, {0, 0});
  const Tensor y = dense(x, w, b);
  CHECK(y.data() == std::vector<double>{1, 2});
}

TEST_CASE("dense zero input passes bias through") {
  Tensor x = Tensor::from_data({1, 2}, {0, 0});
  Rng rng(1);
  Tensor w = random_tensor({2, 2}, rng);
  Tensor b = Tensor::from_data({2}, {3, 4});
  const Tensor y = dense(x, w, b);
  CHECK(y.data() == std::vector<double>{3, 4});
}

TEST_CASE("dense matches the naive matmul oracle") {
  Rng rng(42);
  Tensor x = random_tensor({2, 3}, rng);
  Tensor w = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4}, rng);
  const Tensor y = dense(x, w, b);
  const auto expect = naive_dense(x.data(), w.data(), b.data(), 2, 3, 4);
  for (size_t i = 0; i < expect.size(); ++i) CHECK(y.data()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("dense rejects non-conforming shapes") {
  Rng rng(7);
  Tensor x = random_tensor({2, 3}, rng);
  Tensor w = random_tensor({4, 4}, rng);
  Tensor b = random_tensor({4}, rng);
  CHECK_THROWS_AS(dense(x, w, b), DimensionError);
}

TEST_CASE("conv2d all-ones 3x3 sums to 9") {
  Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor y = conv2d(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.data()[0] == 9.0);
}

TEST_CASE("conv2d delta kernel with pad 1 is the identity") {
  Rng rng(3);
  Tensor x = random_tensor({2, 1, 4, 4}, rng);
  Tensor k(Shape{1, 1, 3, 3});
  k.mutable_data()[4] = 1.0;  // center tap
  const Tensor y = conv2d(x, k, 1, 1);
  CHECK(y.shape() == x.shape());
  for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d matches the six-nested-loop oracle") {
  Rng rng(11);
  for (int pad : {0, 1}) {
    for (int stride : {1, 2}) {  // (5 + 2*pad - 3) divides both strides
      Tensor x = random_tensor({2, 2, 5, 5}, rng);
      Tensor kern = random_tensor({3, 2, 3, 3}, rng);
      const Tensor y = conv2d(x, kern, stride, pad);
      const auto expect = naive_conv(x, kern, stride, pad);
      REQUIRE(y.data().size() == expect.size());
      for (size_t i = 0; i < expect.size(); ++i) {
        CHECK(y.data()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("conv2d rejects non-integral output extents") {
  Rng rng(5);
  Tensor x = random_tensor({1, 1, 6, 6}, rng);
  Tensor k = random_tensor({1, 1, 3, 3}, rng);
  CHECK_THROWS_AS(conv2d(x, k, 2, 1), DimensionError);  // (6+2-3)=5 not divisible by 2
}

TEST_CASE("relu clamps negatives") {
  const Tensor y = relu(Tensor::from_data({3}, {-1, 0, 2}));
  CHECK(y.data() == std::vector<double>{0, 0, 2});
}

TEST_CASE("log_softmax is symmetric and stable") {
  const Tensor y = log_softmax(Tensor::from_data({1, 2}, {0, 0}));
  CHECK(y.data()[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(y.data()[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

  const Tensor big = log_softmax(Tensor::from_data({1, 2}, {1000, 0}));
  for (double v : big.data()) CHECK(std::isfinite(v));
  CHECK(big.data()[0] == doctest::Approx(0.0).epsilon(1e-9));

  Rng rng(9);
  const Tensor r = log_softmax(random_tensor({4, 7}, rng, false, -30.0, 30.0));
  for (int64_t b = 0; b < 4; ++b) {
    long double acc = 0.0;
    for (int64_t j = 0; j < 7; ++j) acc += std::exp((long double)r.data()[size_t(b * 7 + j)]);
    CHECK(std::abs(double(acc) - 1.0) < 1e-9);
  }
}

TEST_CASE("backward of sum gives all-ones") {
  Rng rng(2);
  Tensor w = random_tensor({3, 2}, rng, true);
  backward(sum(w));
  for (double g : w.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of sum(w*w)/2 gives w") {
  Rng rng(6);
  Tensor w = random_tensor({5}, rng, true);
  backward(scale(sum(mul(w, w)), 0.5));
  for (size_t i = 0; i < w.grad().size(); ++i) {
    CHECK(w.grad()[i] == doctest::Approx(w.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward rejects non-scalar losses") {
  Rng rng(8);
  Tensor w = random_tensor({3}, rng, true);
  const Tensor y = relu(w);
  CHECK_THROWS_AS(backward(y), ContractError);
  Graph::current().clear();
}

TEST_CASE("per-op gradients match central finite differences") {
  // five random shapes per op, relative error <= 1e-4
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const int64_t b = rng.uniform_int(1, 3), n = rng.uniform_int(2, 5);

    {  // dense
      Tensor x = random_tensor({b, n}, rng, true);
      Tensor w = random_tensor({n, 4}, rng, true);
      Tensor bias = random_tensor({4}, rng, true);
      auto loss = [&]() { return sum(mul(dense(x, w, bias), dense(x, w, bias))).item(); };
      backward(sum(mul(dense(x, w, bias), dense(x, w, bias))));
      for (Tensor t : {x, w, bias}) {
        CHECK(max_rel_err(t.grad(), fd_gradient(t, loss)) <= 1e-4);
      }
    }
    {  // conv + relu + maxpool + gap + log_softmax stack
      Tensor x = random_tensor({b, 2, 6, 6}, rng, true);
      Tensor k = random_tensor({3, 2, 3, 3}, rng, true);
      auto forward = [&]() {
        return sum(mul(log_softmax(global_avg_pool(maxpool2x2(relu(conv2d(x, k, 1, 1))))),
                       log_softmax(global_avg_pool(maxpool2x2(relu(conv2d(x, k, 1, 1)))))));
      };
      backward(forward());
      auto loss = [&]() { return forward().item(); };
      CHECK(max_rel_err(x.grad(), fd_gradient(x, loss)) <= 1e-4);
      CHECK(max_rel_err(k.grad(), fd_gradient(k, loss)) <= 1e-4);
    }
    {  // flatten + add + scale
      Tensor x = random_tensor({b, 2, 3, 2}, rng, true);
      Tensor y = random_tensor({b, 12}, rng, true);
      auto forward = [&]() { return sum(mul(add(flatten(x), scale(y, 1.7)), y)); };
      backward(forward());
      auto loss = [&]() { return forward().item(); };
      CHECK(max_rel_err(x.grad(), fd_gradient(x, loss)) <= 1e-4);
      CHECK(max_rel_err(y.grad(), fd_gradient(y, loss)) <= 1e-4);
    }
  }
}

TEST_CASE("sgd basic step") {
  Tensor w = Tensor::from_data({1}, {1.0}, true);
  w.ensure_grad()[0] = 0.5;
  SgdOptimizer opt(1.0, 0.0);
  opt.step({w});
  CHECK(w.data()[0] == 0.5);
}

TEST_CASE("sgd keeps masked entries at exactly zero") {
  Tensor w = Tensor::from_data({3}, {0.0, 2.0, 3.0}, true);
  auto& g = w.ensure_grad();
  g = {5.0, 1.0, 1.0};
  const std::vector<uint8_t> mask = {0, 1, 1};
  SgdOptimizer opt(0.1, 0.9);
  for (int i = 0; i < 3; ++i) {
    g.assign({5.0, 1.0, 1.0});
    opt.step({w}, {&mask});
  }
  CHECK(w.data()[0] == 0.0);
  CHECK(w.data()[1] != 2.0);
}

TEST_CASE("sgd momentum matches the hand-unrolled recurrence") {
  Tensor w = Tensor::from_data({1}, {1.0}, true);
  SgdOptimizer opt(0.1, 0.9);
  // v1 = g1; w1 = w0 - lr*v1; v2 = 0.9*v1 + g2; w2 = w1 - lr*v2
  w.ensure_grad()[0] = 0.5;
  opt.step({w});
  const double w1 = 1.0 - 0.1 * 0.5;
  CHECK(w.data()[0] == doctest::Approx(w1).epsilon(1e-15));
  w.ensure_grad()[0] = -0.25;
  opt.step({w});
  const double v2 = 0.9 * 0.5 - 0.25;
  CHECK(w.data()[0] == doctest::Approx(w1 - 0.1 * v2).epsilon(1e-15));
}

TEST_CASE("sgd requires gradients and sane hyperparameters") {
  Tensor w = Tensor::from_data({1}, {1.0}, true);
  SgdOptimizer opt(0.1, 0.0);
  CHECK_THROWS_AS(opt.step({w}), ContractError);
  CHECK_THROWS_AS(SgdOptimizer(0.0, 0.0), ContractError);
  CHECK_THROWS_AS(SgdOptimizer(0.1, 1.0), ContractError);
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
  auto run = [](uint64_t seed) {
    Model m = Model::build(tiny_model_spec(), seed);
    Rng rng(99);
    Tensor x = random_tensor({4, 3, 8, 8}, rng);
    SgdOptimizer opt(0.05, 0.9);
    for (int step = 0; step < 5; ++step) {
      backward(sum(mul(m.forward(x), m.forward(x))));
      opt.step(m.trainable());
    }
    return m.checksum();
  };
  CHECK(run(123) == run(123));
  CHECK(run(123) != run(124));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Rng rng(17);
  NamedTensors named;
  named.emplace_back("a.weight", random_tensor({3, 4}, rng));
  named.emplace_back("b", Tensor::from_data({2}, {0.1 + 0.2, -0.0}));
  const std::string path = (std::filesystem::temp_directory_path() / "auglab_ckpt_test.adck").string();
  save_checkpoint(path, named);
  const NamedTensors loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == named.size());
  for (size_t i = 0; i < named.size(); ++i) {
    CHECK(loaded[i].first == named[i].first);
    CHECK(loaded[i].second.shape() == named[i].second.shape());
    REQUIRE(loaded[i].second.data().size() == named[i].second.data().size());
    for (size_t j = 0; j < named[i].second.data().size(); ++j) {
      // bitwise equality, not approximate
      CHECK(std::memcmp(&loaded[i].second.data()[j], &named[i].second.data()[j], 8) == 0);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader reports bad magic and truncation") {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string bad = (dir / "auglab_bad_magic.adck").string();
  {
    std::ofstream os(bad, std::ios::binary);
    os << "NOPE1234";
  }
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);

  const std::string trunc = (dir / "auglab_trunc.adck").string();
  {
    NamedTensors named;
    named.emplace_back("w", Tensor::full({4}, 1.5));
    save_checkpoint(trunc, named);
    std::filesystem::resize_file(trunc, std::filesystem::file_size(trunc) - 5);
  }
  CHECK_THROWS_AS(load_checkpoint(trunc), FormatError);
  std::filesystem::remove(bad);
  std::filesystem::remove(trunc);
}

TEST_CASE("non-finite forward values raise NumericError") {
  Tensor x = Tensor::from_data({2}, {1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(relu(x), NumericError);
}

}  // TEST_SUITE
