#pragma once

#include "gandetect/tensor.hpp"

#include <array>

namespace gandetect {

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// RGB raster with values in [0, 1]. Grayscale images carry three equal planes.
class Image {
 public:
  Image() = default;
  Image(Index height, Index width, double fill = 0.0);
  static Image from_planes(Plane red, Plane green, Plane blue);
  static Image from_gray(const Plane& gray) { return from_planes(gray, gray, gray); }

  Index height() const { return planes_[0].rows(); }
  Index width() const { return planes_[0].cols(); }
  bool empty() const { return planes_[0].size() == 0; }

  Plane& channel(int c) { return planes_[c]; }
  const Plane& channel(int c) const { return planes_[c]; }

  double& operator()(int c, Index y, Index x) { return planes_[c](y, x); }
  double operator()(int c, Index y, Index x) const { return planes_[c](y, x); }

  /// 3 x H x W network input.
  Tensor to_tensor() const;
  bool is_grayscale() const;
  bool in_unit_range() const;
  /// Clamp every value into [0, 1] in place.
  void clamp();

  bool operator==(const Image& other) const;

 private:
  std::array<Plane, 3> planes_;
};

/// Peak signal-to-noise ratio in dB for unit-range images.
double psnr(const Image& reference, const Image& test);

}  // namespace gandetect
