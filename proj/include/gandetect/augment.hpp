#pragma once

#include "gandetect/image.hpp"
#include "gandetect/rng.hpp"

#include <string>
#include <utility>

namespace gandetect {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Training-time augmentation chain settings. Each transform fires
/// independently with its probability; parameters are drawn uniformly from
/// the ranges.
struct AugmentConfig {
  double p_color_jitter = 0.5;
  double p_grayscale = 0.1;
  double p_blur = 0.5;
  double p_jpeg = 0.5;
  double p_noise = 0.5;
  double p_cutout = 0.5;

  int jpeg_quality_min = 30;
  int jpeg_quality_max = 100;
  Range blur_sigma{0.0, 3.0};
  Range brightness{0.7, 1.3};
  Range contrast{0.7, 1.3};
  Range saturation{0.7, 1.3};
  Range hue_degrees{-18.0, 18.0};
  Range noise_sigma{0.0, 0.06};
  /// Cutout side length as a fraction of crop_size.
  Range cutout_fraction{0.1, 0.4};
  double cutout_fill = 0.5;
  int crop_size = 96;

  /// Throws ContractViolation naming the first invalid field.
  void validate() const;
  /// Same ranges, every probability set to zero.
  AugmentConfig disabled() const;
};

/// Deterministic test-time impairment used by robustness sweeps.
struct Perturbation {
  enum class Kind { kNone, kJpeg, kRescale };

  Kind kind = Kind::kNone;
  int quality = 100;
  double scale = 1.0;

  static Perturbation none() { return {}; }
  static Perturbation jpeg(int q);
  static Perturbation rescale(double s);

  /// Stable label such as "none", "jpeg_q50", "rescale_0.7".
  std::string label() const;
  bool operator==(const Perturbation&) const = default;
};

struct Rect {
  Index x = 0;
  Index y = 0;
  Index width = 0;
  Index height = 0;
};

struct CropOffset {
  Index y = 0;
  Index x = 0;
};

/// Baseline-JPEG lossy round trip: 8-bit RGB -> YCbCr (4:4:4), level-shifted
/// 8x8 DCT, quantization with the IJG-scaled standard tables, inverse path,
/// 8-bit output. No entropy coding.
Image jpeg_roundtrip(const Image& img, int quality);

/// Separable normalized Gaussian, radius ceil(3 sigma), reflect-101 borders.
Image gaussian_blur(const Image& img, double sigma);

/// Applied in order, each skipped when at its identity value:
///   brightness  x <- b * x
///   contrast    x <- c * x + (1 - c) * mean_luma
///   saturation  x <- s * x + (1 - s) * luma(pixel)
///   hue         rotate H by hue_degrees in HSV space
/// with a clamp to [0, 1] after each step.
Image color_jitter(const Image& img, double brightness, double contrast, double saturation,
                   double hue_degrees);

/// BT.601 luma 0.299 R + 0.587 G + 0.114 B replicated on all channels.
Image to_grayscale(const Image& img);

Image add_gaussian_noise(const Image& img, double sigma, RngStream& rng);

/// Sets pixels inside the (border-clipped) rectangle to `fill`.
Image cutout(const Image& img, const Rect& rect, double fill = 0.5);

/// Offset of a size x size window, uniform over the valid positions of an
/// h x w image (h, w >= size).
CropOffset random_crop_offset(Index height, Index width, int size, RngStream& rng);
Image crop(const Image& img, CropOffset offset, int size);
Image center_crop(const Image& img, int size);
/// Reflect-pads undersized inputs up to `size` before drawing the offset.
Image random_crop(const Image& img, int size, RngStream& rng);
Image reflect_pad_to(const Image& img, int min_size);

/// Half-pixel-centre bilinear resampling: output size round(H * scale) x
/// round(W * scale); source coordinate (d + 0.5) * in / out - 0.5, clamped to
/// the image.
Image resize_bilinear(const Image& img, double scale);

/// Two independent augmentation chains, each ending in a random crop.
std::pair<Image, Image> make_views(const Image& img, const AugmentConfig& cfg, RngStream& rng);
/// One augmentation chain ending in a random crop. The noise field and the
/// crop position come from children of `rng`, so they do not shift when a
/// probability changes; use a fresh stream per view.
Image augment_view(const Image& img, const AugmentConfig& cfg, RngStream& rng);

Image apply_perturbation(const Image& img, const Perturbation& p);

}  // namespace gandetect
