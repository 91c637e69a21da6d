// SPDX-License-Identifier: Apache-2.0
#include "auglab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "auglab/errors.hpp"
#include "auglab/rng.hpp"

namespace auglab {

namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

uint32_t read_be_u32(std::istream& is, size_t& offset, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4) {
    throw FormatError(path + ": truncated header at byte offset " + std::to_string(offset));
  }
  offset += 4;
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

uint8_t jitter_pixel(double base, Rng& rng, double noise) {
  const double v = base + rng.normal() * noise;
  return uint8_t(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

DataFormat data_format_from_name(const std::string& name) {
  if (name == "cifar10-bin") return DataFormat::Cifar10Bin;
  if (name == "idx") return DataFormat::Idx;
  if (name == "synthetic") return DataFormat::Synthetic;
  throw ConfigError("unknown dataset format: " + name);
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.samples <= 0 || spec.classes <= 1) {
    throw ConfigError("synthetic: need samples > 0 and classes > 1");
  }
  if (spec.channels != 1 && spec.channels != 3) {
    throw ConfigError("synthetic: channels must be 1 or 3");
  }

  // Class prototypes: a pair of oriented sinusoid gratings per channel with
  // class-specific frequency and phase. Distinct classes get distinct
  // patterns with overwhelming probability.
  std::vector<Image> prototypes;
  prototypes.reserve(size_t(spec.classes));
  for (int k = 0; k < spec.classes; ++k) {
    Rng rng(Rng::mix(spec.seed, 0x70726f746fULL + uint64_t(k)));
    Image proto(spec.height, spec.width, spec.channels);
    for (int c = 0; c < spec.channels; ++c) {
      const double fx1 = rng.uniform(0.5, 2.5), fy1 = rng.uniform(0.5, 2.5);
      const double fx2 = rng.uniform(0.5, 2.5), fy2 = rng.uniform(0.5, 2.5);
      const double p1 = rng.uniform(0.0, 2.0 * M_PI), p2 = rng.uniform(0.0, 2.0 * M_PI);
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          const double u = double(x) / spec.width, v = double(y) / spec.height;
          const double s1 = std::sin(2.0 * M_PI * (fx1 * u + fy1 * v) + p1);
          const double s2 = std::sin(2.0 * M_PI * (fx2 * u - fy2 * v) + p2);
          proto.at(y, x, c) = uint8_t(std::clamp(std::lround(127.5 + 55.0 * s1 + 45.0 * s2), 0L, 255L));
        }
      }
    }
    prototypes.push_back(std::move(proto));
  }

  Dataset ds;
  ds.channels = spec.channels;
  ds.height = spec.height;
  ds.width = spec.width;
  ds.num_classes = spec.classes;
  ds.images.reserve(size_t(spec.samples));
  ds.labels.reserve(size_t(spec.samples));
  for (int i = 0; i < spec.samples; ++i) {
    const int label = i % spec.classes;
    Rng rng(Rng::mix(spec.seed, uint64_t(i)));
    Image img = prototypes[size_t(label)];
    if (spec.rotation_jitter > 0.0) {
      img = rotate(img, rng.uniform(-spec.rotation_jitter, spec.rotation_jitter));
    }
    if (spec.jitter > 0) {
      img = translate_x(img, int(rng.uniform_int(-spec.jitter, spec.jitter)));
      img = translate_y(img, int(rng.uniform_int(-spec.jitter, spec.jitter)));
    }
    const double bright =
        1.0 + rng.uniform(-spec.brightness_jitter, spec.brightness_jitter);
    for (size_t p = 0; p < img.pixels.size(); ++p) {
      img.pixels[p] = jitter_pixel(double(img.pixels[p]) * bright, rng, spec.noise);
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

Dataset load_cifar10_bin(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  is.seekg(0, std::ios::end);
  const std::streamoff size = is.tellg();
  is.seekg(0);
  constexpr std::streamoff kRecord = 3073;  // label + 3*1024 pixels
  if (size == 0 || size % kRecord != 0) {
    throw FormatError(path + ": size " + std::to_string(size) +
                      " is not a multiple of 3073; first bad byte offset " +
                      std::to_string((size / kRecord) * kRecord));
  }
  Dataset ds;
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  ds.num_classes = 10;
  const size_t n = size_t(size / kRecord);
  std::vector<unsigned char> rec(static_cast<size_t>(kRecord));
  for (size_t i = 0; i < n; ++i) {
    is.read(reinterpret_cast<char*>(rec.data()), kRecord);
    if (is.gcount() != kRecord) {
      throw FormatError(path + ": truncated record at byte offset " +
                        std::to_string(int64_t(i) * kRecord));
    }
    const int label = rec[0];
    if (label > 9) {
      throw FormatError(path + ": label byte " + std::to_string(label) +
                        " out of range at byte offset " + std::to_string(int64_t(i) * kRecord));
    }
    Image img(32, 32, 3);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
          img.at(y, x, c) = rec[size_t(1 + c * 1024 + y * 32 + x)];
        }
      }
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("cannot open " + images_path);
  size_t off = 0;
  const uint32_t magic = read_be_u32(imgs, off, images_path);
  if (magic != kIdxImagesMagic) {
    throw FormatError(images_path + ": bad idx magic at byte offset 0 (got " +
                      std::to_string(magic) + ")");
  }
  const uint32_t count = read_be_u32(imgs, off, images_path);
  const uint32_t h = read_be_u32(imgs, off, images_path);
  const uint32_t w = read_be_u32(imgs, off, images_path);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("cannot open " + labels_path);
  size_t loff = 0;
  const uint32_t lmagic = read_be_u32(labs, loff, labels_path);
  if (lmagic != kIdxLabelsMagic) {
    throw FormatError(labels_path + ": bad idx magic at byte offset 0 (got " +
                      std::to_string(lmagic) + ")");
  }
  const uint32_t lcount = read_be_u32(labs, loff, labels_path);
  if (lcount != count) {
    throw FormatError(labels_path + ": label count " + std::to_string(lcount) +
                      " does not match image count " + std::to_string(count));
  }

  Dataset ds;
  ds.channels = 1;
  ds.height = int(h);
  ds.width = int(w);
  int max_label = 0;
  for (uint32_t i = 0; i < count; ++i) {
    Image img(int(h), int(w), 1);
    imgs.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
    if (size_t(imgs.gcount()) != img.pixels.size()) {
      throw FormatError(images_path + ": truncated image data at byte offset " +
                        std::to_string(off + size_t(i) * img.pixels.size()));
    }
    unsigned char lb;
    labs.read(reinterpret_cast<char*>(&lb), 1);
    if (labs.gcount() != 1) {
      throw FormatError(labels_path + ": truncated label data at byte offset " +
                        std::to_string(loff + i));
    }
    max_label = std::max(max_label, int(lb));
    ds.images.push_back(std::move(img));
    ds.labels.push_back(int(lb));
  }
  ds.num_classes = max_label + 1;
  return ds;
}

Dataset load_dataset(const std::string& path, DataFormat format) {
  switch (format) {
    case DataFormat::Cifar10Bin:
      return load_cifar10_bin(path);
    case DataFormat::Idx: {
      std::string labels = path;
      auto replace = [&labels](const std::string& from, const std::string& to) {
        const size_t pos = labels.find(from);
        if (pos != std::string::npos) labels.replace(pos, from.size(), to);
      };
      replace("images", "labels");
      replace("idx3", "idx1");
      if (labels == path) {
        throw ConfigError("idx: cannot derive a labels path from " + path +
                          " (expected 'images'/'idx3' in the name)");
      }
      return load_idx(path, labels);
    }
    case DataFormat::Synthetic:
      return make_synthetic(SyntheticSpec{});
  }
  throw ConfigError("unknown dataset format");
}

SplitDataset split_dataset(const Dataset& all, double val_fraction, uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must be in (0,1)");
  }
  std::vector<size_t> perm(all.size());
  std::iota(perm.begin(), perm.end(), size_t(0));
  Rng rng(Rng::mix(seed, 0x73706c6974ULL));
  for (size_t i = perm.size(); i > 1; --i) {
    const size_t j = size_t(rng.uniform_int(0, int64_t(i) - 1));
    std::swap(perm[i - 1], perm[j]);
  }
  const size_t val_count = size_t(std::llround(val_fraction * double(all.size())));
  if (val_count == 0 || val_count >= all.size()) {
    throw ConfigError("val_fraction leaves an empty split");
  }

  SplitDataset out;
  for (Dataset* part : {&out.train, &out.val}) {
    part->channels = all.channels;
    part->height = all.height;
    part->width = all.width;
    part->num_classes = all.num_classes;
  }
  for (size_t i = 0; i < perm.size(); ++i) {
    Dataset& part = i < all.size() - val_count ? out.train : out.val;
    part.images.push_back(all.images[perm[i]]);
    part.labels.push_back(all.labels[perm[i]]);
  }
  return out;
}

Tensor images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw ContractError("images_to_tensor: empty batch");
  const Image& first = *images.front();
  const int64_t c = first.channels, h = first.height, w = first.width;
  Tensor out(Shape{int64_t(images.size()), c, h, w});
  double* dst = out.mutable_data().data();
  for (size_t i = 0; i < images.size(); ++i) {
    const Image& img = *images[i];
    if (!img.same_shape(first)) throw DimensionError("images_to_tensor: ragged batch");
    double* base = dst + int64_t(i) * c * h * w;
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          base[(ch * h + y) * w + x] = double(img.at(y, x, ch)) / 255.0 - 0.5;
        }
      }
    }
  }
  return out;
}

Tensor image_to_tensor(const Image& image) { return images_to_tensor({&image}); }

}  // namespace auglab
