#include "gandetect/augment.hpp"

#include "gandetect/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace gandetect {

namespace {

void check_range(const Range& r, const char* name, double lo_bound, double hi_bound) {
  if (!(r.lo <= r.hi)) throw ContractViolation(std::string(name) + ": range is not ordered");
  if (r.lo < lo_bound || r.hi > hi_bound) {
    throw ContractViolation(std::string(name) + ": range outside permitted bounds");
  }
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ContractViolation(std::string(name) + " must lie in [0, 1]");
}

// Reflect-101 index mapping that also works for indices several widths away.
Index reflect(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

double luma(double r, double g, double b) {
  if (r == g && g == b) return r;
  return std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 1.0);
}

Plane luma_plane(const Image& img) {
  Plane out(img.height(), img.width());
  for (Index y = 0; y < img.height(); ++y) {
    for (Index x = 0; x < img.width(); ++x) out(y, x) = luma(img(0, y, x), img(1, y, x), img(2, y, x));
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  return k;
}

Plane blur_rows(const Plane& src, const std::vector<double>& k) {
  const Index radius = static_cast<Index>(k.size() / 2);
  Plane out = Plane::Zero(src.rows(), src.cols());
  for (Index y = 0; y < src.rows(); ++y) {
    for (Index x = 0; x < src.cols(); ++x) {
      double acc = 0.0;
      for (Index t = -radius; t <= radius; ++t) acc += k[t + radius] * src(y, reflect(x + t, src.cols()));
      out(y, x) = acc;
    }
  }
  return out;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double delta = mx - mn;
  v = mx;
  s = mx > 0.0 ? delta / mx : 0.0;
  if (delta == 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = std::fmod((g - b) / delta, 6.0);
  } else if (mx == g) {
    h = (b - r) / delta + 2.0;
  } else {
    h = (r - g) / delta + 4.0;
  }
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = h * 6.0;
  const int sector = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

void AugmentConfig::validate() const {
  check_probability(p_color_jitter, "p_color_jitter");
  check_probability(p_grayscale, "p_grayscale");
  check_probability(p_blur, "p_blur");
  check_probability(p_jpeg, "p_jpeg");
  check_probability(p_noise, "p_noise");
  check_probability(p_cutout, "p_cutout");
  if (jpeg_quality_min < 1 || jpeg_quality_max > 100 || jpeg_quality_min > jpeg_quality_max) {
    throw ContractViolation("jpeg_quality: range must be ordered within [1, 100]");
  }
  check_range(blur_sigma, "blur_sigma", 0.0, 1e6);
  check_range(brightness, "brightness", 0.0, 1e6);
  check_range(contrast, "contrast", 0.0, 1e6);
  check_range(saturation, "saturation", 0.0, 1e6);
  check_range(hue_degrees, "hue_degrees", -180.0, 180.0);
  check_range(noise_sigma, "noise_sigma", 0.0, 1e6);
  check_range(cutout_fraction, "cutout_fraction", 0.0, 1.0);
  if (!(cutout_fill >= 0.0 && cutout_fill <= 1.0)) throw ContractViolation("cutout_fill must lie in [0, 1]");
  if (crop_size < 1) throw ContractViolation("crop_size must be positive");
}

AugmentConfig AugmentConfig::disabled() const {
  AugmentConfig c = *this;
  c.p_color_jitter = c.p_grayscale = c.p_blur = c.p_jpeg = c.p_noise = c.p_cutout = 0.0;
  return c;
}

Perturbation Perturbation::jpeg(int q) {
  if (q < 1 || q > 100) throw ContractViolation("perturbation quality outside [1, 100]");
  Perturbation p;
  p.kind = Kind::kJpeg;
  p.quality = q;
  return p;
}

Perturbation Perturbation::rescale(double s) {
  if (!(s > 0.0)) throw ContractViolation("perturbation scale must be positive");
  Perturbation p;
  p.kind = Kind::kRescale;
  p.scale = s;
  return p;
}

std::string Perturbation::label() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::kNone: os << "none"; break;
    case Kind::kJpeg: os << "jpeg_q" << quality; break;
    case Kind::kRescale: os << "rescale_" << scale; break;
  }
  return os.str();
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma >= 0.0)) throw ContractViolation("gaussian_blur: sigma must be non-negative");
  if (sigma == 0.0) return img;
  const std::vector<double> k = gaussian_kernel(sigma);
  std::array<Plane, 3> out;
  for (int c = 0; c < 3; ++c) {
    const Plane horizontal = blur_rows(img.channel(c), k);
    Plane transposed = horizontal.transpose();
    out[c] = blur_rows(transposed, k).transpose().max(0.0).min(1.0);
  }
  return Image::from_planes(std::move(out[0]), std::move(out[1]), std::move(out[2]));
}

Image to_grayscale(const Image& img) { return Image::from_gray(luma_plane(img)); }

Image color_jitter(const Image& img, double brightness, double contrast, double saturation,
                   double hue_degrees) {
  if (brightness < 0.0 || contrast < 0.0 || saturation < 0.0) {
    throw ContractViolation("color_jitter: factors must be non-negative");
  }
  Image out = img;
  if (brightness != 1.0) {
    for (int c = 0; c < 3; ++c) out.channel(c) *= brightness;
    out.clamp();
  }
  if (contrast != 1.0) {
    const double m = luma_plane(out).mean();
    for (int c = 0; c < 3; ++c) out.channel(c) = contrast * out.channel(c) + (1.0 - contrast) * m;
    out.clamp();
  }
  if (saturation != 1.0) {
    const Plane gray = luma_plane(out);
    for (int c = 0; c < 3; ++c) {
      out.channel(c) = saturation * out.channel(c) + (1.0 - saturation) * gray;
    }
    out.clamp();
  }
  if (hue_degrees != 0.0) {
    const double shift = hue_degrees / 360.0;
    for (Index y = 0; y < out.height(); ++y) {
      for (Index x = 0; x < out.width(); ++x) {
        double h, s, v;
        rgb_to_hsv(out(0, y, x), out(1, y, x), out(2, y, x), h, s, v);
        h = std::fmod(h + shift + 1.0, 1.0);
        hsv_to_rgb(h, s, v, out(0, y, x), out(1, y, x), out(2, y, x));
      }
    }
    out.clamp();
  }
  return out;
}

Image add_gaussian_noise(const Image& img, double sigma, RngStream& rng) {
  if (!(sigma >= 0.0)) throw ContractViolation("add_gaussian_noise: sigma must be non-negative");
  if (sigma == 0.0) return img;
  Image out = img;
  for (int c = 0; c < 3; ++c) {
    Plane& p = out.channel(c);
    for (Index i = 0; i < p.size(); ++i) p.data()[i] += sigma * rng.normal();
  }
  out.clamp();
  return out;
}

Image cutout(const Image& img, const Rect& rect, double fill) {
  if (!(fill >= 0.0 && fill <= 1.0)) throw ContractViolation("cutout: fill must lie in [0, 1]");
  Image out = img;
  const Index x0 = std::max<Index>(rect.x, 0), y0 = std::max<Index>(rect.y, 0);
  const Index x1 = std::min(rect.x + rect.width, img.width());
  const Index y1 = std::min(rect.y + rect.height, img.height());
  if (x1 <= x0 || y1 <= y0) return out;
  for (int c = 0; c < 3; ++c) out.channel(c).block(y0, x0, y1 - y0, x1 - x0).setConstant(fill);
  return out;
}

CropOffset random_crop_offset(Index height, Index width, int size, RngStream& rng) {
  if (height < size || width < size) throw ContractViolation("random_crop_offset: image smaller than crop");
  CropOffset off;
  off.y = rng.uniform_int(0, height - size);
  off.x = rng.uniform_int(0, width - size);
  return off;
}

Image crop(const Image& img, CropOffset offset, int size) {
  if (offset.y < 0 || offset.x < 0 || offset.y + size > img.height() || offset.x + size > img.width()) {
    throw ContractViolation("crop: window exceeds image");
  }
  return Image::from_planes(img.channel(0).block(offset.y, offset.x, size, size),
                            img.channel(1).block(offset.y, offset.x, size, size),
                            img.channel(2).block(offset.y, offset.x, size, size));
}

Image center_crop(const Image& img, int size) {
  const Image padded = reflect_pad_to(img, size);
  return crop(padded, {(padded.height() - size) / 2, (padded.width() - size) / 2}, size);
}

Image reflect_pad_to(const Image& img, int min_size) {
  const Index h = std::max<Index>(img.height(), min_size), w = std::max<Index>(img.width(), min_size);
  if (h == img.height() && w == img.width()) return img;
  const Index top = (h - img.height()) / 2, left = (w - img.width()) / 2;
  std::array<Plane, 3> out;
  for (int c = 0; c < 3; ++c) {
    out[c].resize(h, w);
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        out[c](y, x) = img(c, reflect(y - top, img.height()), reflect(x - left, img.width()));
      }
    }
  }
  return Image::from_planes(std::move(out[0]), std::move(out[1]), std::move(out[2]));
}

Image random_crop(const Image& img, int size, RngStream& rng) {
  if (size < 1) throw ContractViolation("random_crop: size must be positive");
  const Image src = reflect_pad_to(img, size);
  return crop(src, random_crop_offset(src.height(), src.width(), size, rng), size);
}

Image resize_bilinear(const Image& img, double scale) {
  if (!(scale > 0.0)) throw ContractViolation("resize_bilinear: scale must be positive");
  const Index h = img.height(), w = img.width();
  const Index oh = std::lround(static_cast<double>(h) * scale);
  const Index ow = std::lround(static_cast<double>(w) * scale);
  if (oh < 1 || ow < 1) {
    throw ContractViolation("resize_bilinear: output size " + std::to_string(oh) + "x" +
                            std::to_string(ow) + " is degenerate");
  }
  const double ry = static_cast<double>(h) / static_cast<double>(oh);
  const double rx = static_cast<double>(w) / static_cast<double>(ow);

  struct Tap {
    Index i0, i1;
    double frac;
  };
  auto taps = [](Index out_n, Index in_n, double ratio) {
    std::vector<Tap> t(out_n);
    for (Index d = 0; d < out_n; ++d) {
      const double src = std::clamp((static_cast<double>(d) + 0.5) * ratio - 0.5, 0.0,
                                    static_cast<double>(in_n - 1));
      const Index i0 = static_cast<Index>(std::floor(src));
      t[d] = {i0, std::min(i0 + 1, in_n - 1), src - static_cast<double>(i0)};
    }
    return t;
  };
  const std::vector<Tap> ty = taps(oh, h, ry), tx = taps(ow, w, rx);

  std::array<Plane, 3> out;
  for (int c = 0; c < 3; ++c) {
    const Plane& p = img.channel(c);
    out[c].resize(oh, ow);
    for (Index y = 0; y < oh; ++y) {
      const Tap& a = ty[y];
      for (Index x = 0; x < ow; ++x) {
        const Tap& b = tx[x];
        const double top = p(a.i0, b.i0) * (1.0 - b.frac) + p(a.i0, b.i1) * b.frac;
        const double bottom = p(a.i1, b.i0) * (1.0 - b.frac) + p(a.i1, b.i1) * b.frac;
        out[c](y, x) = std::clamp(top * (1.0 - a.frac) + bottom * a.frac, 0.0, 1.0);
      }
    }
  }
  return Image::from_planes(std::move(out[0]), std::move(out[1]), std::move(out[2]));
}

Image augment_view(const Image& img, const AugmentConfig& cfg, RngStream& rng) {
  Image x = img;
  if (rng.bernoulli(cfg.p_color_jitter)) {
    const double b = rng.uniform(cfg.brightness.lo, cfg.brightness.hi);
    const double c = rng.uniform(cfg.contrast.lo, cfg.contrast.hi);
    const double s = rng.uniform(cfg.saturation.lo, cfg.saturation.hi);
    const double h = rng.uniform(cfg.hue_degrees.lo, cfg.hue_degrees.hi);
    x = color_jitter(x, b, c, s, h);
  }
  if (rng.bernoulli(cfg.p_grayscale)) x = to_grayscale(x);
  if (rng.bernoulli(cfg.p_blur)) x = gaussian_blur(x, rng.uniform(cfg.blur_sigma.lo, cfg.blur_sigma.hi));
  if (rng.bernoulli(cfg.p_jpeg)) {
    x = jpeg_roundtrip(x, static_cast<int>(rng.uniform_int(cfg.jpeg_quality_min, cfg.jpeg_quality_max)));
  }
  if (rng.bernoulli(cfg.p_noise)) {
    const double sigma = rng.uniform(cfg.noise_sigma.lo, cfg.noise_sigma.hi);
    RngStream noise = rng.child("noise");
    x = add_gaussian_noise(x, sigma, noise);
  }
  if (rng.bernoulli(cfg.p_cutout)) {
    const double frac = rng.uniform(cfg.cutout_fraction.lo, cfg.cutout_fraction.hi);
    const Index side = std::lround(frac * cfg.crop_size);
    Rect r;
    r.width = r.height = side;
    r.x = rng.uniform_int(-side / 2, x.width() - 1 - side / 2);
    r.y = rng.uniform_int(-side / 2, x.height() - 1 - side / 2);
    x = cutout(x, r, cfg.cutout_fill);
  }
  RngStream crop_rng = rng.child("crop");
  return random_crop(x, cfg.crop_size, crop_rng);
}

std::pair<Image, Image> make_views(const Image& img, const AugmentConfig& cfg, RngStream& rng) {
  RngStream first = rng.child("view0");
  RngStream second = rng.child("view1");
  return {augment_view(img, cfg, first), augment_view(img, cfg, second)};
}

Image apply_perturbation(const Image& img, const Perturbation& p) {
  switch (p.kind) {
    case Perturbation::Kind::kJpeg: return jpeg_roundtrip(img, p.quality);
    case Perturbation::Kind::kRescale: return resize_bilinear(img, p.scale);
    case Perturbation::Kind::kNone: break;
  }
  return img;
}

}  // namespace gandetect
