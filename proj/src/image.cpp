#include "gandetect/image.hpp"

#include "gandetect/errors.hpp"

#include <cmath>
#include <limits>

namespace gandetect {

Image::Image(Index height, Index width, double fill) {
  if (height < 1 || width < 1) throw ContractViolation("image dimensions must be at least 1x1");
  if (!(fill >= 0.0 && fill <= 1.0)) throw ContractViolation("image fill must lie in [0, 1]");
  for (Plane& p : planes_) p = Plane::Constant(height, width, fill);
}

Image Image::from_planes(Plane red, Plane green, Plane blue) {
  if (red.rows() < 1 || red.cols() < 1) throw ContractViolation("image planes are empty");
  if (green.rows() != red.rows() || green.cols() != red.cols() || blue.rows() != red.rows() ||
      blue.cols() != red.cols()) {
    throw ContractViolation("image planes differ in size");
  }
  Image img;
  img.planes_ = {std::move(red), std::move(green), std::move(blue)};
  if (!img.in_unit_range()) throw ContractViolation("image values must lie in [0, 1]");
  return img;
}

Tensor Image::to_tensor() const {
  const Index hw = height() * width();
  Tensor t({3, height(), width()});
  for (int c = 0; c < 3; ++c) {
    t.data().segment(c * hw, hw) = Eigen::Map<const Eigen::VectorXd>(planes_[c].data(), hw);
  }
  return t;
}

bool Image::is_grayscale() const {
  return (planes_[0] == planes_[1]).all() && (planes_[0] == planes_[2]).all();
}

bool Image::in_unit_range() const {
  for (const Plane& p : planes_) {
    if (!p.allFinite() || (p < 0.0).any() || (p > 1.0).any()) return false;
  }
  return true;
}

void Image::clamp() {
  for (Plane& p : planes_) p = p.max(0.0).min(1.0);
}

bool Image::operator==(const Image& other) const {
  if (height() != other.height() || width() != other.width()) return false;
  for (int c = 0; c < 3; ++c) {
    if (!(planes_[c] == other.planes_[c]).all()) return false;
  }
  return true;
}

double psnr(const Image& reference, const Image& test) {
  if (reference.height() != test.height() || reference.width() != test.width()) {
    throw ContractViolation("psnr: image sizes differ");
  }
  double sse = 0.0;
  for (int c = 0; c < 3; ++c) sse += (reference.channel(c) - test.channel(c)).square().sum();
  const double mse = sse / static_cast<double>(3 * reference.height() * reference.width());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace gandetect
