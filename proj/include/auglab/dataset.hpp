// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auglab/augment.hpp"
#include "auglab/tensor.hpp"

namespace auglab {

struct Dataset {
  int channels = 0;
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<Image> images;
  std::vector<int> labels;

  size_t size() const { return images.size(); }
};

struct SplitDataset {
  Dataset train;
  Dataset val;
};

enum class DataFormat { Cifar10Bin, Idx, Synthetic };

DataFormat data_format_from_name(const std::string& name);

// Seeded separable toy set: each class is a fixed smooth color pattern;
// samples are jittered copies (shift, rotation, brightness, pixel noise).
struct SyntheticSpec {
  int samples = 5000;
  int classes = 8;
  int channels = 3;
  int height = 12;
  int width = 12;
  uint64_t seed = 7;
  double noise = 14.0;             // gaussian pixel noise sigma
  int jitter = 2;                  // max |shift| in pixels per axis
  double rotation_jitter = 20.0;   // max |rotation| in degrees
  double brightness_jitter = 0.2;  // multiplicative +-
};

Dataset make_synthetic(const SyntheticSpec& spec);

// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes
// (R plane, then G, then B; 32x32).
Dataset load_cifar10_bin(const std::string& path);

// MNIST-style idx files, big-endian magic + dims, u8 payload.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Convenience entry point used by the CLI: for Idx, `path` names the images
// file and the labels file is derived by replacing "images" -> "labels" and
// "idx3" -> "idx1".
Dataset load_dataset(const std::string& path, DataFormat format);

// Deterministic split by a seeded permutation.
SplitDataset split_dataset(const Dataset& all, double val_fraction, uint64_t seed);

// Normalizes selected u8 images into a [batch, c, h, w] tensor in [-0.5, 0.5].
Tensor images_to_tensor(const std::vector<const Image*>& images);
Tensor image_to_tensor(const Image& image);

}  // namespace auglab
