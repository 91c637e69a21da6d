// SPDX-License-Identifier: Apache-2.0
#include "auglab/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "auglab/errors.hpp"

namespace auglab {

namespace {

constexpr double kPi = 3.14159265358979323846;

uint8_t clamp_u8(double v) {
  const long r = std::lround(v);
  return uint8_t(std::clamp(r, 0L, 255L));
}

int clamp_int(int v, int lo, int hi) { return std::clamp(v, lo, hi); }

// Inverse-mapped affine resample with nearest-neighbor rounding; source
// coordinates are clamped to the image, which replicates edge values.
Image affine_nn(const Image& img, double m00, double m01, double m02, double m10, double m11,
                double m12) {
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double sx = m00 * x + m01 * y + m02;
      const double sy = m10 * x + m11 * y + m12;
      const int ix = clamp_int(int(std::lround(sx)), 0, img.width - 1);
      const int iy = clamp_int(int(std::lround(sy)), 0, img.height - 1);
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(iy, ix, c);
    }
  }
  return out;
}

// out = other + factor * (orig - other), per pixel. factor == 1 is exact.
Image blend(const Image& orig, const Image& other, double factor) {
  Image out(orig.height, orig.width, orig.channels);
  for (size_t i = 0; i < orig.pixels.size(); ++i) {
    const double o = double(orig.pixels[i]);
    const double t = double(other.pixels[i]);
    out.pixels[i] = clamp_u8(t + factor * (o - t));
  }
  return out;
}

// ITU-R 601-2 luma, one channel out.
Image to_grayscale(const Image& img) {
  Image gray(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double l;
      if (img.channels == 3) {
        l = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
      } else {
        l = img.at(y, x, 0);
      }
      const uint8_t v = clamp_u8(l);
      for (int c = 0; c < img.channels; ++c) gray.at(y, x, c) = v;
    }
  }
  return gray;
}

}  // namespace

Image::Image(int h, int w, int c) : height(h), width(w), channels(c) {
  if (h <= 0 || w <= 0 || (c != 1 && c != 3)) {
    throw ContractError("image shape must be positive with 1 or 3 channels");
  }
  pixels.assign(size_t(h) * size_t(w) * size_t(c), 0);
}

const char* aug_op_name(AugOpKind kind) {
  switch (kind) {
    case AugOpKind::Identity: return "Identity";
    case AugOpKind::AutoContrast: return "AutoContrast";
    case AugOpKind::Equalize: return "Equalize";
    case AugOpKind::Rotate: return "Rotate";
    case AugOpKind::Solarize: return "Solarize";
    case AugOpKind::Color: return "Color";
    case AugOpKind::Posterize: return "Posterize";
    case AugOpKind::Contrast: return "Contrast";
    case AugOpKind::Brightness: return "Brightness";
    case AugOpKind::Sharpness: return "Sharpness";
    case AugOpKind::ShearX: return "ShearX";
    case AugOpKind::ShearY: return "ShearY";
    case AugOpKind::TranslateX: return "TranslateX";
    case AugOpKind::TranslateY: return "TranslateY";
  }
  throw ContractError("unknown augmentation op");
}

AugOpKind aug_op_from_name(const std::string& name) {
  for (int i = 0; i < kNumAugOps; ++i) {
    const auto kind = AugOpKind(i);
    if (name == aug_op_name(kind)) return kind;
  }
  throw ConfigError("unknown augmentation op name: " + name);
}

Image rotate(const Image& img, double degrees) {
  if (degrees == 0.0) return img;
  const double rad = degrees * kPi / 180.0;
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  const double c = std::cos(rad), s = std::sin(rad);
  // inverse rotation about the image center
  return affine_nn(img, c, s, cx - c * cx - s * cy, -s, c, cy + s * cx - c * cy);
}

Image shear_x(const Image& img, double factor) {
  if (factor == 0.0) return img;
  const double cy = (img.height - 1) / 2.0;
  return affine_nn(img, 1.0, factor, -factor * cy, 0.0, 1.0, 0.0);
}

Image shear_y(const Image& img, double factor) {
  if (factor == 0.0) return img;
  const double cx = (img.width - 1) / 2.0;
  return affine_nn(img, 1.0, 0.0, 0.0, factor, 1.0, -factor * cx);
}

Image translate_x(const Image& img, int pixels) {
  if (pixels == 0) return img;
  return affine_nn(img, 1.0, 0.0, double(-pixels), 0.0, 1.0, 0.0);
}

Image translate_y(const Image& img, int pixels) {
  if (pixels == 0) return img;
  return affine_nn(img, 1.0, 0.0, 0.0, 0.0, 1.0, double(-pixels));
}

Image solarize(const Image& img, int threshold) {
  Image out = img;
  for (uint8_t& p : out.pixels) {
    if (int(p) >= threshold) p = uint8_t(255 - p);
  }
  return out;
}

Image posterize(const Image& img, int bits) {
  if (bits < 1 || bits > 8) throw ContractError("posterize: bits must be in [1,8]");
  const uint8_t mask = uint8_t(0xff << (8 - bits));
  Image out = img;
  for (uint8_t& p : out.pixels) p = uint8_t(p & mask);
  return out;
}

Image autocontrast(const Image& img) {
  Image out = img;
  for (int c = 0; c < img.channels; ++c) {
    int lo = 255, hi = 0;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        const int v = img.at(y, x, c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (hi <= lo) continue;
    const double scl = 255.0 / double(hi - lo);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        out.at(y, x, c) = clamp_u8((img.at(y, x, c) - lo) * scl);
      }
    }
  }
  return out;
}

Image equalize(const Image& img) {
  Image out = img;
  for (int c = 0; c < img.channels; ++c) {
    std::array<int64_t, 256> hist{};
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) hist[img.at(y, x, c)]++;
    }
    // classic PIL equalize: cumulative LUT with half-step bias
    int nonzero = 0;
    int64_t total = 0, last = 0;
    for (int v = 0; v < 256; ++v) {
      if (hist[v] != 0) {
        ++nonzero;
        total += hist[v];
        last = hist[v];
      }
    }
    if (nonzero <= 1) continue;
    const int64_t step = (total - last) / 255;
    if (step == 0) continue;
    std::array<uint8_t, 256> lut{};
    int64_t n = step / 2;
    for (int v = 0; v < 256; ++v) {
      lut[v] = uint8_t(std::clamp<int64_t>(n / step, 0, 255));
      n += hist[v];
    }
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) out.at(y, x, c) = lut[img.at(y, x, c)];
    }
  }
  return out;
}

Image adjust_color(const Image& img, double factor) {
  return blend(img, to_grayscale(img), factor);
}

Image adjust_contrast(const Image& img, double factor) {
  // blend against the mean luma
  double acc = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (img.channels == 3) {
        acc += 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
      } else {
        acc += img.at(y, x, 0);
      }
    }
  }
  const uint8_t mean = clamp_u8(acc / double(img.height * img.width));
  Image flat(img.height, img.width, img.channels);
  std::fill(flat.pixels.begin(), flat.pixels.end(), mean);
  return blend(img, flat, factor);
}

Image adjust_brightness(const Image& img, double factor) {
  Image black(img.height, img.width, img.channels);
  return blend(img, black, factor);
}

Image adjust_sharpness(const Image& img, double factor) {
  // 3x3 smoothing kernel [[1,1,1],[1,5,1],[1,1,1]]/13; border pixels stay as
  // in the input, matching the usual enhancement behavior.
  Image smooth = img;
  for (int y = 1; y < img.height - 1; ++y) {
    for (int x = 1; x < img.width - 1; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        int acc = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int wgt = (dy == 0 && dx == 0) ? 5 : 1;
            acc += wgt * img.at(y + dy, x + dx, c);
          }
        }
        smooth.at(y, x, c) = clamp_u8(double(acc) / 13.0);
      }
    }
  }
  return blend(img, smooth, factor);
}

Image apply_op(const Image& img, AugOpKind op, int magnitude, Rng& rng) {
  if (magnitude < 0 || magnitude > kMaxMagnitude) {
    throw ConfigError("augmentation magnitude " + std::to_string(magnitude) +
                      " out of range [0," + std::to_string(kMaxMagnitude) + "]");
  }
  const double level = double(magnitude) / double(kMaxMagnitude);
  // The sign draw happens for every signed op, independent of magnitude, so
  // the rng stream advances identically for all M.
  switch (op) {
    case AugOpKind::Identity:
      return img;
    case AugOpKind::AutoContrast:
      return autocontrast(img);
    case AugOpKind::Equalize:
      return equalize(img);
    case AugOpKind::Rotate: {
      const double sign = rng.coin() ? 1.0 : -1.0;
      return rotate(img, sign * level * 30.0);
    }
    case AugOpKind::Solarize:
      return solarize(img, int(std::lround(255.0 - level * 255.0)));
    case AugOpKind::Color: {
      const double sign = rng.coin() ? 1.0 : -1.0;
      return adjust_color(img, 1.0 + sign * level * 0.9);
    }
    case AugOpKind::Posterize:
      return posterize(img, std::max(4, 8 - int(std::lround(level * 4.0))));
    case AugOpKind::Contrast: {
      const double sign = rng.coin() ? 1.0 : -1.0;
      return adjust_contrast(img, 1.0 + sign * level * 0.9);
    }
    case AugOpKind::Brightness: {
      const double sign = rng.coin() ? 1.0 : -1.0;
      return adjust_brightness(img, 1.0 + sign * level * 0.9);
    }
    case AugOpKind::Sharpness: {
      const double sign = rng.coin() ? 1.0 : -1.0;
      return adjust_sharpness(img, 1.0 + sign * level * 0.9);
    }
    case AugOpKind::ShearX: {
      const double sign = rng.coin() ? 1.0 : -1.0;
      return shear_x(img, sign * level * 0.3);
    }
    case AugOpKind::ShearY: {
      const double sign = rng.coin() ? 1.0 : -1.0;
      return shear_y(img, sign * level * 0.3);
    }
    case AugOpKind::TranslateX: {
      const double sign = rng.coin() ? 1.0 : -1.0;
      return translate_x(img, int(std::lround(sign * level * 0.45 * img.width)));
    }
    case AugOpKind::TranslateY: {
      const double sign = rng.coin() ? 1.0 : -1.0;
      return translate_y(img, int(std::lround(sign * level * 0.45 * img.height)));
    }
  }
  throw ContractError("unknown augmentation op");
}

Image randaugment(const Image& img, const AugPolicy& policy, Rng& rng, AugOpKind* out_first,
                  AugOpKind* out_second) {
  static_assert(AugPolicy::kOpsPerApplication == 2);
  const auto first = AugOpKind(rng.uniform_int(0, kNumAugOps - 1));
  const auto second = AugOpKind(rng.uniform_int(0, kNumAugOps - 1));
  if (out_first) *out_first = first;
  if (out_second) *out_second = second;
  Image tmp = apply_op(img, first, policy.magnitude, rng);
  return apply_op(tmp, second, policy.magnitude, rng);
}

MagnitudeDraw random_magnitude_augment(const Image& img, Rng& rng) {
  MagnitudeDraw draw;
  draw.magnitude = int(rng.uniform_int(0, kMaxMagnitude));
  draw.image = randaugment(img, AugPolicy{draw.magnitude}, rng, &draw.first, &draw.second);
  return draw;
}

}  // namespace auglab
