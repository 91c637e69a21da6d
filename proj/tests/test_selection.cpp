// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "auglab/errors.hpp"
#include "auglab/selection.hpp"
#include "auglab/train.hpp"
#include "test_util.hpp"

using namespace auglab;
using namespace auglab::testing;

namespace {

// independent brute-force scorer, long double softmax written from scratch
int oracle_argmin(const std::vector<Image>& candidates, int label, const Model& teacher,
                  const Model& student, const SelectionConfig& cfg,
                  std::vector<double>* out_scores = nullptr) {
  NoGradGuard no_grad;
  auto soft = [](const Tensor& logits, int64_t row, long double tau) {
    const int64_t c = logits.dim(1);
    std::vector<long double> p(static_cast<size_t>(c));
    long double m = -1e300L;
    for (int64_t j = 0; j < c; ++j) {
      m = std::max(m, (long double)logits.data()[size_t(row * c + j)] / tau);
    }
    long double z = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      p[size_t(j)] = std::exp((long double)logits.data()[size_t(row * c + j)] / tau - m);
      z += p[size_t(j)];
    }
    for (auto& v : p) v /= z;
    return p;
  };

  long double best = 1e300L;
  int best_idx = 0;
  std::vector<double> scores;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const Tensor x = image_to_tensor(candidates[i]);
    const Tensor tl = teacher.forward(x);
    const Tensor sl = student.forward(x);
    const auto pt1 = soft(tl, 0, 1.0L);
    const auto ptt = soft(tl, 0, (long double)cfg.tau);
    const auto pst = soft(sl, 0, (long double)cfg.tau);
    const long double ce = -std::log(pt1[size_t(label)]);
    long double kl = 0.0;
    for (size_t j = 0; j < ptt.size(); ++j) kl += ptt[j] * (std::log(ptt[j]) - std::log(pst[j]));
    kl *= (long double)(cfg.tau * cfg.tau);
    const long double score = (long double)cfg.alpha * ce - (long double)cfg.beta * kl;
    scores.push_back(double(score));
    if (score < best) {
      best = score;
      best_idx = int(i);
    }
  }
  if (out_scores) *out_scores = std::move(scores);
  return best_idx;
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("generate_candidates is sized and reproducible") {
  Rng data_rng(1);
  const Image img = random_image(8, 8, 3, data_rng);
  Rng a(5);
  CHECK(generate_candidates(img, 1, a).size() == 1);

  Rng b(6), c(6);
  const auto first = generate_candidates(img, 8, b);
  const auto second = generate_candidates(img, 8, c);
  REQUIRE(first.size() == second.size());
  for (size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].image == second[i].image);
    CHECK(first[i].magnitude == second[i].magnitude);
  }
}

TEST_CASE("candidate magnitudes cover [0,30] uniformly in aggregate") {
  Rng data_rng(2);
  const Image img = random_image(4, 4, 1, data_rng);
  std::vector<int64_t> counts(kMaxMagnitude + 1, 0);
  Rng rng(7);
  constexpr int kDraws = 20000;
  for (int i = 0; i < kDraws / 4; ++i) {
    for (const Candidate& c : generate_candidates(img, 4, rng)) {
      counts[size_t(c.magnitude)]++;
    }
  }
  const double p = 1.0 / double(kMaxMagnitude + 1);
  const double sigma = std::sqrt(kDraws * p * (1.0 - p));
  for (int64_t c : counts) CHECK(std::abs(double(c) - kDraws * p) <= 4.0 * sigma);
}

TEST_CASE("select matches the brute-force oracle on 100 random instances") {
  Rng rng(11);
  const ModelSpec spec = tiny_model_spec(4, 8);
  for (int instance = 0; instance < 100; ++instance) {
    const Model teacher = Model::build(spec, rng.next_u64());
    const Model student = Model::build(spec, rng.next_u64());
    const int n = int(rng.uniform_int(1, 16));
    std::vector<Image> candidates;
    for (int i = 0; i < n; ++i) candidates.push_back(random_image(8, 8, 3, rng));
    if (instance % 3 == 0 && n >= 2) candidates[size_t(n - 1)] = candidates[0];  // force a tie
    const int label = int(rng.uniform_int(0, 3));

    SelectionConfig cfg;
    cfg.n = n;
    cfg.alpha = rng.uniform(0.0, 2.0);
    cfg.beta = rng.uniform(0.0, 2.0);
    if (cfg.alpha == 0.0 && cfg.beta == 0.0) cfg.alpha = 1.0;
    cfg.tau = rng.uniform(0.5, 6.0);

    std::vector<double> oracle_scores;
    const int expect = oracle_argmin(candidates, label, teacher, student, cfg, &oracle_scores);
    const SelectionResult got = select(candidates, label, teacher, student, cfg);
    CHECK(got.chosen == expect);
    REQUIRE(got.scores.size() == oracle_scores.size());
    for (size_t i = 0; i < oracle_scores.size(); ++i) {
      CHECK(got.scores[i] == doctest::Approx(oracle_scores[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("identical candidates reduce to the tie-break rule") {
  Rng rng(13);
  const ModelSpec spec = tiny_model_spec(3, 8);
  const Model teacher = Model::build(spec, 100);
  const Model student = Model::build(spec, 101);
  const Image img = random_image(8, 8, 3, rng);
  const std::vector<Image> candidates(5, img);
  SelectionConfig cfg;
  cfg.beta = 0.0;
  const SelectionResult r = select(candidates, 0, teacher, student, cfg);
  CHECK(r.chosen == 0);
  for (double s : r.scores) CHECK(s == doctest::Approx(r.scores[0]).epsilon(1e-15));
}

TEST_CASE("jointly rescaling alpha and beta never changes the argmin") {
  Rng rng(17);
  const ModelSpec spec = tiny_model_spec(4, 8);
  const Model teacher = Model::build(spec, 200);
  const Model student = Model::build(spec, 201);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Image> candidates;
    const int n = int(rng.uniform_int(2, 12));
    for (int i = 0; i < n; ++i) candidates.push_back(random_image(8, 8, 3, rng));
    const int label = int(rng.uniform_int(0, 3));
    SelectionConfig cfg;
    cfg.alpha = rng.uniform(0.1, 2.0);
    cfg.beta = rng.uniform(0.1, 2.0);
    const int before = select(candidates, label, teacher, student, cfg).chosen;
    const double c = rng.uniform(0.01, 50.0);
    cfg.alpha *= c;
    cfg.beta *= c;
    CHECK(select(candidates, label, teacher, student, cfg).chosen == before);
  }
}

TEST_CASE("select never mutates the models") {
  Rng rng(19);
  const ModelSpec spec = tiny_model_spec(3, 8);
  const Model teacher = Model::build(spec, 300);
  const Model student = Model::build(spec, 301);
  const uint64_t t_sum = teacher.checksum(), s_sum = student.checksum();
  std::vector<Image> candidates;
  for (int i = 0; i < 6; ++i) candidates.push_back(random_image(8, 8, 3, rng));
  select(candidates, 1, teacher, student, SelectionConfig{});
  CHECK(teacher.checksum() == t_sum);
  CHECK(student.checksum() == s_sum);
}

TEST_CASE("selection config validation") {
  SelectionConfig zero;
  zero.alpha = 0.0;
  zero.beta = 0.0;
  CHECK_THROWS_AS(zero.validate(), ConfigError);
  SelectionConfig bad_n;
  bad_n.n = 0;
  CHECK_THROWS_AS(bad_n.validate(), ConfigError);
}

TEST_CASE("distill_with_selection trains the student and logs magnitudes") {
  const SplitDataset data = tiny_split(40, 3, 8);
  const ModelSpec spec = tiny_model_spec(3, 8);
  Model teacher = Model::build(spec, 400);
  Model student = Model::build(spec, 401);

  TrainSpec train;
  train.epochs = 2;
  train.batch_size = 10;
  train.lr = 0.05;
  train.momentum = 0.9;
  train.seed = 23;

  SelectionConfig sel;
  sel.n = 3;
  const std::string trace =
      (std::filesystem::temp_directory_path() / "auglab_sel_trace.csv").string();
  const DistillResult result =
      distill_with_selection(std::move(student), teacher, data, sel, KDConfig{}, train, trace);
  REQUIRE(result.record.rows.size() == 2);
  for (const EpochRow& row : result.record.rows) {
    CHECK(row.magnitude_in_effect >= 0.0);
    CHECK(row.magnitude_in_effect <= 30.0);
  }
  // the trace holds one line per sample per epoch plus the header
  std::ifstream is(trace);
  REQUIRE(is.good());
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,sample_index,chosen_magnitude,score_chosen,score_mean");
  size_t rows = 0;
  while (std::getline(is, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == data.train.size() * 2);
  std::filesystem::remove(trace);
}

}  // TEST_SUITE
