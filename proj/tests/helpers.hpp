#pragma once

#include "gandetect/image.hpp"
#include "gandetect/rng.hpp"
#include "gandetect/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <unistd.h>

namespace gandetect::testing {

inline Tensor random_tensor(const Shape& shape, RngStream& rng, double scale = 1.0) {
  Tensor t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

inline Image random_image(Index h, Index w, RngStream& rng) {
  Image img(h, w);
  for (int c = 0; c < 3; ++c) {
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) img(c, y, x) = rng.uniform();
    }
  }
  return img;
}

// Smooth color ramps plus mild texture: closer to a photograph than white noise.
inline Image natural_image(Index h, Index w, RngStream& rng) {
  Image img(h, w);
  for (int c = 0; c < 3; ++c) {
    const double fx = rng.uniform(0.5, 2.0), fy = rng.uniform(0.5, 2.0), ph = rng.uniform(0.0, 6.0);
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        const double v = 0.5 + 0.3 * std::sin(fx * x / 10.0 + ph) * std::cos(fy * y / 12.0) +
                         0.03 * rng.normal();
        img(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("gandetect_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  static unsigned long& counter() {
    static unsigned long n = 0;
    return n;
  }
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace gandetect::testing
