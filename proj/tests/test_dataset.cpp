// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "auglab/dataset.hpp"
#include "auglab/errors.hpp"
#include "auglab/rng.hpp"
#include "test_util.hpp"

using namespace auglab;
using namespace auglab::testing;

namespace {

const std::filesystem::path kTmp = std::filesystem::temp_directory_path();

// fixture writer independent of the loader: raw byte pushes only
void write_cifar_fixture(const std::string& path, const std::vector<int>& labels,
                         uint8_t pixel_base) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  uint8_t v = pixel_base;
  for (int label : labels) {
    os.put(char(label));
    for (int i = 0; i < 3072; ++i) os.put(char(v++));
  }
}

void put_be(std::ofstream& os, uint32_t v) {
  os.put(char((v >> 24) & 0xff));
  os.put(char((v >> 16) & 0xff));
  os.put(char((v >> 8) & 0xff));
  os.put(char(v & 0xff));
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("synthetic generation is seed-deterministic") {
  SyntheticSpec spec;
  spec.samples = 24;
  spec.classes = 4;
  spec.height = spec.width = 8;
  spec.seed = 77;
  const Dataset a = make_synthetic(spec);
  const Dataset b = make_synthetic(spec);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a.images[i] == b.images[i]);
    CHECK(a.labels[i] == b.labels[i]);
  }
  spec.seed = 78;
  const Dataset c = make_synthetic(spec);
  bool any_diff = false;
  for (size_t i = 0; i < a.size() && !any_diff; ++i) any_diff = !(a.images[i] == c.images[i]);
  CHECK(any_diff);
}

TEST_CASE("split is a seeded permutation with disjoint parts") {
  SyntheticSpec spec;
  spec.samples = 40;
  spec.classes = 4;
  spec.height = spec.width = 6;
  const Dataset all = make_synthetic(spec);
  const SplitDataset s1 = split_dataset(all, 0.25, 9);
  const SplitDataset s2 = split_dataset(all, 0.25, 9);
  CHECK(s1.train.size() == 30);
  CHECK(s1.val.size() == 10);
  for (size_t i = 0; i < s1.train.size(); ++i) CHECK(s1.train.images[i] == s2.train.images[i]);

  const SplitDataset s3 = split_dataset(all, 0.25, 10);
  bool differs = false;
  for (size_t i = 0; i < s1.val.size() && !differs; ++i) {
    differs = !(s1.val.images[i] == s3.val.images[i]);
  }
  CHECK(differs);

  CHECK_THROWS_AS(split_dataset(all, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset(all, 1.0, 1), ConfigError);
}

TEST_CASE("cifar10-bin records parse bit-exactly") {
  const std::string path = (kTmp / "auglab_cifar_fixture.bin").string();
  write_cifar_fixture(path, {3, 7}, 10);
  const Dataset ds = load_cifar10_bin(path);
  REQUIRE(ds.size() == 2);
  CHECK(ds.labels == std::vector<int>{3, 7});
  CHECK(ds.height == 32);
  CHECK(ds.width == 32);
  CHECK(ds.channels == 3);
  // record 0: R plane starts at byte 1 with value 10, wrapping u8 arithmetic
  uint8_t v = 10;
  bool all_match = true;
  for (int c = 0; c < 3 && all_match; ++c) {
    for (int y = 0; y < 32 && all_match; ++y) {
      for (int x = 0; x < 32; ++x, ++v) {
        if (ds.images[0].at(y, x, c) != v) {
          all_match = false;
          break;
        }
      }
    }
  }
  CHECK(all_match);
  std::filesystem::remove(path);
}

TEST_CASE("cifar10-bin rejects truncated files with a byte offset") {
  const std::string path = (kTmp / "auglab_cifar_trunc.bin").string();
  write_cifar_fixture(path, {1}, 0);
  std::filesystem::resize_file(path, 3000);
  try {
    load_cifar10_bin(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("idx files parse and validate their magic") {
  const std::string images = (kTmp / "auglab-images-idx3-ubyte").string();
  const std::string labels = (kTmp / "auglab-labels-idx1-ubyte").string();
  {
    std::ofstream os(images, std::ios::binary | std::ios::trunc);
    put_be(os, 0x00000803);
    put_be(os, 2);  // count
    put_be(os, 4);  // h
    put_be(os, 4);  // w
    for (int i = 0; i < 32; ++i) os.put(char(i));
  }
  {
    std::ofstream os(labels, std::ios::binary | std::ios::trunc);
    put_be(os, 0x00000801);
    put_be(os, 2);
    os.put(char(5));
    os.put(char(2));
  }
  const Dataset ds = load_idx(images, labels);
  REQUIRE(ds.size() == 2);
  CHECK(ds.channels == 1);
  CHECK(ds.height == 4);
  CHECK(ds.labels == std::vector<int>{5, 2});
  CHECK(ds.num_classes == 6);
  CHECK(ds.images[1].at(0, 0, 0) == 16);

  // the convenience loader derives the labels path
  const Dataset ds2 = load_dataset(images, DataFormat::Idx);
  CHECK(ds2.labels == ds.labels);

  // wrong magic
  {
    std::ofstream os(images, std::ios::binary | std::ios::trunc);
    put_be(os, 0xdeadbeef);
    put_be(os, 1);
    put_be(os, 4);
    put_be(os, 4);
  }
  CHECK_THROWS_AS(load_idx(images, labels), FormatError);
  std::filesystem::remove(images);
  std::filesystem::remove(labels);
}

TEST_CASE("images_to_tensor normalizes into [-0.5, 0.5]") {
  Image img(1, 2, 1);
  img.pixels = {0, 255};
  const Tensor t = image_to_tensor(img);
  CHECK(t.shape() == Shape{1, 1, 1, 2});
  CHECK(t.data()[0] == -0.5);
  CHECK(t.data()[1] == 0.5);
}

}  // TEST_SUITE
