// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auglab/rng.hpp"

namespace auglab {

// 8-bit image, row-major, channel-interleaved. Every augmentation op returns
// an image of identical shape with pixels in [0, 255].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 or 3
  std::vector<uint8_t> pixels;

  Image() = default;
  Image(int h, int w, int c);

  uint8_t at(int y, int x, int c) const {
    return pixels[size_t((y * width + x) * channels + c)];
  }
  uint8_t& at(int y, int x, int c) {
    return pixels[size_t((y * width + x) * channels + c)];
  }
  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
  bool operator==(const Image& other) const {
    return same_shape(other) && pixels == other.pixels;
  }
};

enum class AugOpKind : int {
  Identity = 0,
  AutoContrast,
  Equalize,
  Rotate,
  Solarize,
  Color,
  Posterize,
  Contrast,
  Brightness,
  Sharpness,
  ShearX,
  ShearY,
  TranslateX,
  TranslateY,
};

inline constexpr int kNumAugOps = 14;

const char* aug_op_name(AugOpKind kind);
AugOpKind aug_op_from_name(const std::string& name);

// The global magnitude knob. Exactly two ops are composed per application.
struct AugPolicy {
  int magnitude = 0;  // in [0, 30]
  static constexpr int kOpsPerApplication = 2;
};

inline constexpr int kMaxMagnitude = 30;

// ---- Direct-parameter transforms (also the test hooks) ---------------------
// Geometric ops use nearest-neighbor resampling; source coordinates outside
// the image take the nearest edge pixel.
Image rotate(const Image& img, double degrees);
Image shear_x(const Image& img, double factor);
Image shear_y(const Image& img, double factor);
Image translate_x(const Image& img, int pixels);
Image translate_y(const Image& img, int pixels);
Image solarize(const Image& img, int threshold);   // invert pixels >= threshold
Image posterize(const Image& img, int bits);       // keep top `bits` bits
Image autocontrast(const Image& img);
Image equalize(const Image& img);
// Blend ops: factor 1 reproduces the input bit-for-bit.
Image adjust_color(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_brightness(const Image& img, double factor);
Image adjust_sharpness(const Image& img, double factor);

// Applies one op at the given magnitude. The magnitude maps linearly onto
// each op's physical range (level = M/30): Rotate +-30deg, ShearX/Y +-0.3,
// TranslateX/Y +-0.45*extent, Solarize threshold 255-(level*255), Posterize
// 8-round(level*4) bits (floor 4), Color/Contrast/Brightness/Sharpness factor
// 1+-(level*0.9). Signed ops draw their sign from `rng`.
Image apply_op(const Image& img, AugOpKind op, int magnitude, Rng& rng);

// RandAugment composition: draws o_j then o_i uniformly with replacement from
// the 14 ops and returns o_i(o_j(img; M); M). Optional out-params report the
// drawn ops for trace logs.
Image randaugment(const Image& img, const AugPolicy& policy, Rng& rng,
                  AugOpKind* out_first = nullptr, AugOpKind* out_second = nullptr);

// Draws M uniformly from [0, 30], applies randaugment at that magnitude, and
// returns the drawn magnitude and ops alongside the image.
struct MagnitudeDraw {
  Image image;
  int magnitude = 0;
  AugOpKind first = AugOpKind::Identity;
  AugOpKind second = AugOpKind::Identity;
};
MagnitudeDraw random_magnitude_augment(const Image& img, Rng& rng);

}  // namespace auglab
