#include "gandetect/augment.hpp"
#include "gandetect/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace gandetect {

namespace {

using Block = Eigen::Matrix<double, 8, 8, Eigen::RowMajor>;

// ITU-T T.81 Annex K tables, natural (row-major) order.
constexpr std::array<int, 64> kLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChromaTable = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

Block scaled_table(const std::array<int, 64>& base, int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  Block q;
  for (int i = 0; i < 64; ++i) {
    q(i / 8, i % 8) = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  }
  return q;
}

const Block& dct_matrix() {
  static const Block m = [] {
    Block d;
    for (int u = 0; u < 8; ++u) {
      const double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) {
        d(u, x) = alpha * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
    }
    return d;
  }();
  return m;
}

// Round-trips every 8x8 block of a level-shifted plane in place.
void quantize_plane(Plane& plane, const Block& table) {
  const Block& d = dct_matrix();
  for (Index by = 0; by < plane.rows(); by += 8) {
    for (Index bx = 0; bx < plane.cols(); bx += 8) {
      Block pixels = plane.block<8, 8>(by, bx).matrix();
      Block coef = d * pixels * d.transpose();
      coef = ((coef.array() / table.array()).round() * table.array()).matrix();
      plane.block<8, 8>(by, bx) = (d.transpose() * coef * d).array();
    }
  }
}

}  // namespace

Image jpeg_roundtrip(const Image& img, int quality) {
  if (quality < 1 || quality > 100) {
    throw ContractViolation("jpeg_roundtrip: quality " + std::to_string(quality) +
                            " outside [1, 100]");
  }
  const Index h = img.height(), w = img.width();
  const Index ph = (h + 7) / 8 * 8, pw = (w + 7) / 8 * 8;

  // 8-bit samples, edge-replicated up to whole blocks.
  std::array<Plane, 3> rgb;
  for (int c = 0; c < 3; ++c) {
    rgb[c].resize(ph, pw);
    for (Index y = 0; y < ph; ++y) {
      for (Index x = 0; x < pw; ++x) {
        rgb[c](y, x) = std::round(img(c, std::min(y, h - 1), std::min(x, w - 1)) * 255.0);
      }
    }
  }

  Plane luma = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2] - 128.0;
  Plane cb = -0.168736 * rgb[0] - 0.331264 * rgb[1] + 0.5 * rgb[2];
  Plane cr = 0.5 * rgb[0] - 0.418688 * rgb[1] - 0.081312 * rgb[2];

  quantize_plane(luma, scaled_table(kLumaTable, quality));
  const Block chroma_table = scaled_table(kChromaTable, quality);
  quantize_plane(cb, chroma_table);
  quantize_plane(cr, chroma_table);

  luma += 128.0;
  const Plane r = luma + 1.402 * cr;
  const Plane g = luma - 0.344136 * cb - 0.714136 * cr;
  const Plane b = luma + 1.772 * cb;

  auto to_unit = [h, w](const Plane& p) -> Plane {
    return p.topLeftCorner(h, w).max(0.0).min(255.0).round() / 255.0;
  };
  return Image::from_planes(to_unit(r), to_unit(g), to_unit(b));
}

}  // namespace gandetect
