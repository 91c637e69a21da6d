// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "auglab/errors.hpp"
#include "auglab/model.hpp"
#include "auglab/rng.hpp"
#include "test_util.hpp"

using namespace auglab;
using namespace auglab::testing;

TEST_SUITE("models") {

TEST_CASE("zero-block spec is a linear classifier on the flattened input") {
  ModelSpec spec;
  spec.in_channels = 1;
  spec.in_height = 2;
  spec.in_width = 2;
  spec.num_classes = 3;
  Model m = Model::build(spec, 7);
  REQUIRE(m.params().size() == 2);
  CHECK(m.param("head.weight").shape() == Shape{4, 3});

  Rng rng(1);
  Tensor x = random_tensor({2, 1, 2, 2}, rng);
  const Tensor y = m.forward(x);
  const Tensor expect = dense(flatten(x), m.param("head.weight"), m.param("head.bias"));
  CHECK(y.data() == expect.data());
}

TEST_CASE("same build seed gives bit-identical parameters") {
  const ModelSpec spec = tiny_model_spec();
  CHECK(Model::build(spec, 5).checksum() == Model::build(spec, 5).checksum());
  CHECK(Model::build(spec, 5).checksum() != Model::build(spec, 6).checksum());
}

TEST_CASE("zero input reaches the classifier bias only") {
  Model m = Model::build(tiny_model_spec(4), 11);
  Tensor zeros(Shape{2, 3, 8, 8});
  const Tensor y = m.forward(zeros);
  const auto& bias = m.param("head.bias").data();
  for (int64_t b = 0; b < 2; ++b) {
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(y.data()[size_t(b * 4 + j)] == bias[size_t(j)]);
    }
  }
}

TEST_CASE("forward is a pure function of parameters and input") {
  Model m = Model::build(tiny_model_spec(), 3);
  Rng rng(2);
  Tensor x = random_tensor({3, 3, 8, 8}, rng);
  NoGradGuard no_grad;
  CHECK(m.forward(x).data() == m.forward(x).data());
}

TEST_CASE("attach_extra keeps base weights verbatim and grows capacity") {
  Model base = Model::build(tiny_model_spec(), 21);
  Model big1 = attach_extra(base, 1, 77);
  Model big2 = attach_extra(base, 2, 77);
  CHECK(big1.num_params() > base.num_params());
  CHECK(big2.num_params() > big1.num_params());
  CHECK(big2.spec().extra_blocks == 2);

  for (size_t i = 0; i < base.spec().blocks.size(); ++i) {
    const std::string name = "block" + std::to_string(i) + ".weight";
    CHECK(big2.param(name).data() == base.param(name).data());
  }

  // fresh blocks are not the identity: the enlarged forward differs
  Rng rng(4);
  Tensor x = random_tensor({2, 3, 8, 8}, rng);
  NoGradGuard no_grad;
  CHECK(big2.forward(x).data() != base.forward(x).data());

  CHECK_THROWS_AS(attach_extra(base, 0, 1), ContractError);
}

TEST_CASE("detach_extra restores the base architecture bit-exactly") {
  const ModelSpec base_spec = tiny_model_spec();
  Model base = Model::build(base_spec, 31);
  Model big = attach_extra(base, 2, 99);
  Model small = detach_extra(big, base_spec, 12345);

  CHECK(small.spec() == base_spec);
  for (size_t i = 0; i < base_spec.blocks.size(); ++i) {
    const std::string name = "block" + std::to_string(i) + ".weight";
    CHECK(small.param(name).data() == base.param(name).data());
  }
  // the head is re-initialized from the stated seed
  CHECK(small.param("head.weight").data() ==
        Model::build(base_spec, 12345).param("head.weight").data());
}

TEST_CASE("detach_extra on a never-attached model is a transfer error") {
  Model base = Model::build(tiny_model_spec(), 41);
  CHECK_THROWS_AS(detach_extra(base, base.spec(), 1), TransferError);
}

TEST_CASE("transfer_weights copies matches and reports the rest") {
  const ModelSpec spec = tiny_model_spec();
  Model src = Model::build(spec, 51);
  Model dst = Model::build(spec, 52);
  const TransferReport report = transfer_weights(src, dst);
  CHECK(report.copied.size() == src.params().size());
  CHECK(report.skipped.empty());
  CHECK(dst.checksum() == src.checksum());

  // idempotent
  transfer_weights(src, dst);
  CHECK(dst.checksum() == src.checksum());
}

TEST_CASE("transfer_weights with incompatible shapes copies nothing fatal") {
  ModelSpec flat;
  flat.in_channels = 1;
  flat.in_height = 4;
  flat.in_width = 4;
  flat.num_classes = 2;
  Model a = Model::build(flat, 1);

  ModelSpec other = flat;
  other.num_classes = 5;
  Model b = Model::build(other, 2);

  const uint64_t before = b.checksum();
  const TransferReport report = transfer_weights(a, b);
  CHECK(report.copied.empty());
  CHECK(!report.skipped.empty());
  CHECK(b.checksum() == before);
}

TEST_CASE("spec validation refuses malformed architectures") {
  ModelSpec bad = tiny_model_spec();
  bad.num_classes = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  ModelSpec stride = tiny_model_spec();
  stride.blocks[0].stride = 2;  // (8+2-3)=7 is not divisible by 2
  CHECK_THROWS_AS(stride.validate(), ConfigError);

  ModelSpec extras = tiny_model_spec();
  extras.extra_blocks = 5;
  CHECK_THROWS_AS(extras.validate(), ConfigError);
}

TEST_CASE("model save/load round trips through the checkpoint container") {
  Model m = Model::build(tiny_model_spec(), 61);
  const std::string path =
      (std::filesystem::temp_directory_path() / "auglab_model_ckpt.adck").string();
  m.save(path);
  Model fresh = Model::build(tiny_model_spec(), 62);
  CHECK(fresh.checksum() != m.checksum());
  fresh.load(path);
  CHECK(fresh.checksum() == m.checksum());
  std::filesystem::remove(path);
}

}  // TEST_SUITE
