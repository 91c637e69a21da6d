// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "auglab/errors.hpp"
#include "auglab/losses.hpp"
#include "auglab/rng.hpp"
#include "test_util.hpp"

using namespace auglab;
using namespace auglab::testing;

namespace {

// independent long-double oracle for the tau^2-scaled softened KL
long double kl_oracle(const std::vector<double>& t, const std::vector<double>& s, int64_t batch,
                      int64_t c, long double tau) {
  auto logsoft = [c, tau](const std::vector<double>& v, int64_t row, int64_t j) {
    long double m = v[size_t(row * c)] / tau;
    for (int64_t k = 1; k < c; ++k) m = std::max(m, (long double)v[size_t(row * c + k)] / tau);
    long double acc = 0.0;
    for (int64_t k = 0; k < c; ++k) acc += std::exp((long double)v[size_t(row * c + k)] / tau - m);
    return (long double)v[size_t(row * c + j)] / tau - (m + std::log(acc));
  };
  long double total = 0.0;
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t j = 0; j < c; ++j) {
      const long double lpt = logsoft(t, b, j);
      total += std::exp(lpt) * (lpt - logsoft(s, b, j));
    }
  }
  return tau * tau * total / (long double)batch;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("cross entropy of a uniform row is ln 2") {
  const Tensor loss = cross_entropy(Tensor::from_data({1, 2}, {0, 0}), {0});
  CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  Graph::current().clear();
}

TEST_CASE("confident correct prediction costs almost nothing") {
  const Tensor loss = cross_entropy(Tensor::from_data({1, 2}, {20, -20}), {0});
  CHECK(loss.item() < 1e-8);
  Graph::current().clear();
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  CHECK_THROWS_AS(cross_entropy(Tensor::from_data({1, 2}, {0, 0}), {2}), ContractError);
  CHECK_THROWS_AS(cross_entropy(Tensor::from_data({1, 2}, {0, 0}), {-1}), ContractError);
}

TEST_CASE("cross entropy gradient is softmax minus onehot") {
  Rng rng(21);
  Tensor logits = random_tensor({3, 4}, rng, true, -2.0, 2.0);
  const std::vector<int> labels = {1, 3, 0};
  backward(cross_entropy(logits, labels));

  // closed form
  for (int64_t b = 0; b < 3; ++b) {
    double m = logits.data()[size_t(b * 4)];
    for (int64_t j = 1; j < 4; ++j) m = std::max(m, logits.data()[size_t(b * 4 + j)]);
    double z = 0.0;
    for (int64_t j = 0; j < 4; ++j) z += std::exp(logits.data()[size_t(b * 4 + j)] - m);
    for (int64_t j = 0; j < 4; ++j) {
      const double p = std::exp(logits.data()[size_t(b * 4 + j)] - m) / z;
      const double expect = (p - (labels[size_t(b)] == j ? 1.0 : 0.0)) / 3.0;
      CHECK(logits.grad()[size_t(b * 4 + j)] == doctest::Approx(expect).epsilon(1e-10));
    }
  }

  // numeric check
  auto loss = [&]() { return cross_entropy(logits, labels).item(); };
  backward(cross_entropy(logits, labels));
  CHECK(max_rel_err(logits.grad(), fd_gradient(logits, loss)) <= 1e-4);
}

TEST_CASE("kd_kl is zero when the distributions agree") {
  Rng rng(31);
  Tensor t = random_tensor({4, 5}, rng);
  CHECK(kd_kl(t, t, 3.0).item() <= 1e-12);

  // shift invariance: a per-row constant on either side changes nothing
  Tensor shifted(t.shape());
  for (int64_t b = 0; b < 4; ++b) {
    for (int64_t j = 0; j < 5; ++j) {
      shifted.mutable_data()[size_t(b * 5 + j)] = t.data()[size_t(b * 5 + j)] + double(b) * 2.5;
    }
  }
  CHECK(kd_kl(t, shifted, 2.0).item() <= 1e-9);
  CHECK(kd_kl(shifted, t, 2.0).item() <= 1e-9);
}

TEST_CASE("kd_kl matches the two-class direct-summation oracle") {
  Tensor t = Tensor::from_data({1, 2}, {1, 0});
  Tensor s = Tensor::from_data({1, 2}, {0, 1});
  const double got = kd_kl(t, s, 1.0).item();
  CHECK(got == doctest::Approx(double(kl_oracle(t.data(), s.data(), 1, 2, 1.0))).epsilon(1e-12));

  // doubling tau keeps the tau^2 factor in play
  const double got2 = kd_kl(t, s, 2.0).item();
  CHECK(got2 == doctest::Approx(double(kl_oracle(t.data(), s.data(), 1, 2, 2.0))).epsilon(1e-12));
  CHECK(got != got2);
}

TEST_CASE("kd_kl stays non-negative on random logits") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor t = random_tensor({3, 6}, rng, false, -4.0, 4.0);
    Tensor s = random_tensor({3, 6}, rng, false, -4.0, 4.0);
    const double tau = rng.uniform(0.5, 8.0);
    const double v = kd_kl(t, s, tau).item();
    CHECK(v >= 0.0);
    const auto oracle = double(kl_oracle(t.data(), s.data(), 3, 6, (long double)tau));
    CHECK(v == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("kd_kl gradients flow into the student only") {
  Rng rng(51);
  Tensor t = random_tensor({2, 4}, rng, true);
  Tensor s = random_tensor({2, 4}, rng, true);
  backward(kd_kl(t, s, 2.5));
  auto loss = [&]() { return kd_kl(t, s, 2.5).item(); };
  CHECK(max_rel_err(s.grad(), fd_gradient(s, loss)) <= 1e-4);
  // teacher side is constant
  for (double g : t.grad()) CHECK(g == 0.0);
}

TEST_CASE("kd_kl rejects shape mismatches") {
  Rng rng(61);
  CHECK_THROWS_AS(kd_kl(random_tensor({1, 3}, rng), random_tensor({1, 4}, rng), 1.0),
                  DimensionError);
}

TEST_CASE("combined loss mixes by alpha") {
  const Tensor ce = Tensor::scalar(2.0);
  const Tensor kl = Tensor::scalar(4.0);
  CHECK(combined_loss(ce, kl, 1.0).item() == 2.0);
  CHECK(combined_loss(ce, kl, 0.5).item() == 3.0);
  CHECK_THROWS_AS(combined_loss(ce, kl, 0.0), ContractError);
}

TEST_CASE("combined loss gradient decomposes linearly") {
  Rng rng(71);
  Tensor teacher = random_tensor({2, 3}, rng);
  Tensor logits = random_tensor({2, 3}, rng, true);
  const std::vector<int> labels = {2, 0};
  const double alpha = 0.3, tau = 2.0;

  auto forward = [&]() {
    return combined_loss(cross_entropy(logits, labels), kd_kl(teacher, logits, tau), alpha);
  };
  backward(forward());
  const std::vector<double> combined_grad = logits.grad();

  auto loss = [&]() { return forward().item(); };
  CHECK(max_rel_err(combined_grad, fd_gradient(logits, loss)) <= 1e-4);

  backward(cross_entropy(logits, labels));
  const std::vector<double> g_ce = logits.grad();
  backward(kd_kl(teacher, logits, tau));
  const std::vector<double> g_kl = logits.grad();
  for (size_t i = 0; i < combined_grad.size(); ++i) {
    CHECK(combined_grad[i] ==
          doctest::Approx(alpha * g_ce[i] + (1 - alpha) * g_kl[i]).epsilon(1e-10));
  }
}

TEST_CASE("kd config validation") {
  KDConfig bad_tau{0.0, 0.5};
  CHECK_THROWS_AS(bad_tau.validate(), ConfigError);
  KDConfig bad_alpha{1.0, 0.0};
  CHECK_THROWS_AS(bad_alpha.validate(), ConfigError);
  KDConfig ok{4.0, 1.0};
  CHECK_NOTHROW(ok.validate());
}

}  // TEST_SUITE
