#include "gandetect/datagen.hpp"

#include "gandetect/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace gandetect {

namespace {

constexpr double kPi = std::numbers::pi;

// Zero-mean, unit-variance Gaussian field whose amplitude spectrum is f^-alpha.
Plane spectral_field(int n, double alpha, RngStream rng) {
  std::vector<std::complex<double>> grid(static_cast<std::size_t>(n) * n);
  for (int ky = 0; ky < n; ++ky) {
    const double fy = static_cast<double>(std::min(ky, n - ky)) / n;
    for (int kx = 0; kx < n; ++kx) {
      const double fx = static_cast<double>(std::min(kx, n - kx)) / n;
      const double f = std::hypot(fx, fy);
      const double amp = f == 0.0 ? 0.0 : std::pow(f, -alpha);
      const double re = rng.normal(), im = rng.normal();
      grid[static_cast<std::size_t>(ky) * n + kx] = amp * std::complex<double>(re, im);
    }
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> line(n), out(n);
  for (int y = 0; y < n; ++y) {
    std::copy_n(grid.begin() + static_cast<std::ptrdiff_t>(y) * n, n, line.begin());
    fft.inv(out, line);
    std::copy(out.begin(), out.end(), grid.begin() + static_cast<std::ptrdiff_t>(y) * n);
  }
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) line[y] = grid[static_cast<std::size_t>(y) * n + x];
    fft.inv(out, line);
    for (int y = 0; y < n; ++y) grid[static_cast<std::size_t>(y) * n + x] = out[y];
  }
  Plane field(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) field(y, x) = grid[static_cast<std::size_t>(y) * n + x].real();
  }
  const double mean = field.mean();
  const double stddev = std::sqrt((field - mean).square().mean());
  return stddev > 0.0 ? Plane((field - mean) / stddev) : Plane(field - mean);
}

std::string record_id(Split split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%04d", to_string(split).c_str(), index);
  return buf;
}

const FingerprintSpec& find_family(const CorpusSpec& spec, const std::string& id) {
  for (const FingerprintSpec& f : spec.families) {
    if (f.family_id == id) return f;
  }
  throw ContractViolation("unknown fingerprint family '" + id + "'");
}

nlohmann::json record_json(const Record& r) {
  return {{"id", r.id}, {"path", r.path}, {"label", r.label}, {"family", r.family},
          {"split", to_string(r.split)}};
}

}  // namespace

void SceneSpec::validate(int crop_size) const {
  if (size < std::max(crop_size, 1)) throw ContractViolation("scene size is below the crop size");
  if (!(spectral_exponent >= 0.5 && spectral_exponent <= 2.0)) {
    throw ContractViolation("spectral_exponent must lie in [0.5, 2]");
  }
  if (palette.size() < 2 || palette.size() > 4) throw ContractViolation("palette needs 2-4 colors");
  if (gradient_count < 0 || shape_count < 0) throw ContractViolation("scene counts must be non-negative");
  if (texture_contrast < 0.0) throw ContractViolation("texture_contrast must be non-negative");
}

void FingerprintSpec::validate() const {
  if (family_id.empty()) throw ContractViolation("fingerprint family_id is empty");
  if (period < 2) throw ContractViolation("fingerprint period must be at least 2");
  if (!(amplitude >= 0.0 && amplitude <= 0.05)) {
    throw ContractViolation("fingerprint amplitude must lie in [0, 0.05]");
  }
  if (harmonic_mix.empty()) throw ContractViolation("fingerprint harmonic_mix is empty");
  double total = 0.0;
  for (double w : harmonic_mix) total += std::abs(w);
  if (amplitude > 0.0 && total == 0.0) throw ContractViolation("fingerprint harmonic_mix is all zero");
}

Image synth_real(const SceneSpec& spec, RngStream& rng) {
  spec.validate();
  const int n = spec.size;
  const Plane tone = (spectral_field(n, spec.spectral_exponent, rng.child("tone")).tanh() + 1.0) * 0.5;
  const Plane detail = spectral_field(n, spec.spectral_exponent, rng.child("detail"));
  const Color& a = spec.palette[0];
  const Color& b = spec.palette[1];

  std::array<Plane, 3> rgb;
  for (int c = 0; c < 3; ++c) rgb[c] = a[c] + tone * (b[c] - a[c]);

  Eigen::ArrayXd coord = Eigen::ArrayXd::LinSpaced(n, 0.0, 1.0);
  RngStream grad_rng = rng.child("gradients");
  for (int g = 0; g < spec.gradient_count; ++g) {
    const double theta = grad_rng.uniform(0.0, 2.0 * kPi);
    Color delta;
    for (double& d : delta) d = grad_rng.uniform(-0.15, 0.15);
    Plane ramp(n, n);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        ramp(y, x) = (std::cos(theta) * (coord[x] - 0.5) + std::sin(theta) * (coord[y] - 0.5));
      }
    }
    for (int c = 0; c < 3; ++c) rgb[c] += delta[c] * ramp;
  }

  RngStream shape_rng = rng.child("shapes");
  for (int s = 0; s < spec.shape_count; ++s) {
    const double cx = shape_rng.uniform(0.0, n), cy = shape_rng.uniform(0.0, n);
    const double rx = shape_rng.uniform(n / 10.0, n / 3.0), ry = shape_rng.uniform(n / 10.0, n / 3.0);
    const double angle = shape_rng.uniform(0.0, kPi);
    const double opacity = shape_rng.uniform(0.4, 0.9);
    const Color& base = spec.palette[static_cast<std::size_t>(
        shape_rng.uniform_int(0, static_cast<std::int64_t>(spec.palette.size()) - 1))];
    Color color;
    for (int c = 0; c < 3; ++c) color[c] = std::clamp(base[c] + shape_rng.uniform(-0.1, 0.1), 0.0, 1.0);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double u = (ca * dx + sa * dy) / rx, v = (-sa * dx + ca * dy) / ry;
        const double dist = (std::sqrt(u * u + v * v) - 1.0) * std::min(rx, ry);
        const double cover = std::clamp(0.5 - dist, 0.0, 1.0) * opacity;
        if (cover <= 0.0) continue;
        for (int c = 0; c < 3; ++c) rgb[c](y, x) += cover * (color[c] - rgb[c](y, x));
      }
    }
  }

  for (int c = 0; c < 3; ++c) rgb[c] = (rgb[c] + spec.texture_contrast * detail).max(0.0).min(1.0);
  return Image::from_planes(std::move(rgb[0]), std::move(rgb[1]), std::move(rgb[2]));
}

Plane fingerprint_signal(const FingerprintSpec& fp, Index height, Index width) {
  fp.validate();
  double total = 0.0;
  for (double w : fp.harmonic_mix) total += std::abs(w);
  Plane s = Plane::Zero(height, width);
  if (fp.amplitude == 0.0) return s;
  const double theta = fp.orientation_degrees * kPi / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double gain = fp.amplitude / (2.0 * total);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      const double u = x * ct + y * st, v = -x * st + y * ct;
      double acc = 0.0;
      for (std::size_t k = 0; k < fp.harmonic_mix.size(); ++k) {
        const double w = 2.0 * kPi * static_cast<double>(k + 1) / fp.period;
        acc += fp.harmonic_mix[k] * (std::cos(w * u + fp.phase) + std::cos(w * v + fp.phase));
      }
      s(y, x) = gain * acc;
    }
  }
  return s;
}

Image inject_fingerprint(const Image& img, const FingerprintSpec& fp) {
  if (fp.amplitude == 0.0) {
    fp.validate();
    return img;
  }
  const Plane signal = fingerprint_signal(fp, img.height(), img.width());
  Image out = img;
  for (int c = 0; c < 3; ++c) out.channel(c) += signal;
  out.clamp();
  return out;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ContractViolation("unknown split '" + name + "'");
}

SceneSpec SceneDistribution::draw(RngStream& rng) const {
  SceneSpec s;
  s.size = size;
  s.spectral_exponent = rng.uniform(spectral_exponent.lo, spectral_exponent.hi);
  s.texture_contrast = rng.uniform(texture_contrast.lo, texture_contrast.hi);
  const auto colors = rng.uniform_int(min_palette, max_palette);
  s.palette.clear();
  for (std::int64_t i = 0; i < colors; ++i) {
    s.palette.push_back({rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)});
  }
  s.gradient_count = static_cast<int>(rng.uniform_int(0, max_gradients));
  s.shape_count = static_cast<int>(rng.uniform_int(0, max_shapes));
  return s;
}

void CorpusSpec::validate() const {
  if (families.empty()) throw ContractViolation("corpus needs at least one fingerprint family");
  std::set<std::string> ids;
  for (const FingerprintSpec& f : families) {
    f.validate();
    if (f.family_id == kRealFamily) throw ContractViolation("family id 'real' is reserved");
    if (!ids.insert(f.family_id).second) throw ContractViolation("duplicate family '" + f.family_id + "'");
  }
  find_family(*this, train_family);
  if (families.size() < 2) throw ContractViolation("corpus needs at least one held-out family");
  if (counts.train < 1 || counts.val < 1 || counts.test < 1) {
    throw ContractViolation("split counts must be at least 1");
  }
  if (scenes.size < 1 || scenes.min_palette < 2 || scenes.max_palette > 4 ||
      scenes.min_palette > scenes.max_palette) {
    throw ContractViolation("scene distribution is invalid");
  }
  if (scenes.spectral_exponent.lo < 0.5 || scenes.spectral_exponent.hi > 2.0 ||
      scenes.spectral_exponent.lo > scenes.spectral_exponent.hi) {
    throw ContractViolation("scene spectral_exponent range must be ordered within [0.5, 2]");
  }
}

CorpusSpec CorpusSpec::defaults() {
  CorpusSpec spec;
  spec.families = {{"A", 4, 0.04, 0.0, 0.0, {1.0, 0.4}},
                   {"B", 3, 0.04, 30.0, 0.0, {1.0, 0.4}},
                   {"C", 5, 0.04, 60.0, 0.0, {1.0, 0.4}}};
  spec.train_family = "A";
  return spec;
}

void to_json(nlohmann::json& j, const FingerprintSpec& f) {
  j = nlohmann::json{{"family_id", f.family_id},       {"period", f.period},
                     {"amplitude", f.amplitude},       {"orientation_degrees", f.orientation_degrees},
                     {"phase", f.phase},               {"harmonic_mix", f.harmonic_mix}};
}

void from_json(const nlohmann::json& j, FingerprintSpec& f) {
  f.family_id = j.at("family_id").get<std::string>();
  f.period = j.at("period").get<int>();
  f.amplitude = j.at("amplitude").get<double>();
  f.orientation_degrees = j.at("orientation_degrees").get<double>();
  f.phase = j.value("phase", 0.0);
  f.harmonic_mix = j.value("harmonic_mix", std::vector<double>{1.0, 0.4});
}

void to_json(nlohmann::json& j, const CorpusSpec& c) {
  j = nlohmann::json{
      {"families", c.families},
      {"train_family", c.train_family},
      {"counts", {{"train", c.counts.train}, {"val", c.counts.val}, {"test", c.counts.test}}},
      {"scenes",
       {{"size", c.scenes.size},
        {"spectral_exponent", {c.scenes.spectral_exponent.lo, c.scenes.spectral_exponent.hi}},
        {"texture_contrast", {c.scenes.texture_contrast.lo, c.scenes.texture_contrast.hi}},
        {"palette_colors", {c.scenes.min_palette, c.scenes.max_palette}},
        {"max_gradients", c.scenes.max_gradients},
        {"max_shapes", c.scenes.max_shapes}}}};
}

void from_json(const nlohmann::json& j, CorpusSpec& c) {
  c.families = j.at("families").get<std::vector<FingerprintSpec>>();
  c.train_family = j.at("train_family").get<std::string>();
  const auto& counts = j.at("counts");
  c.counts = {counts.at("train").get<int>(), counts.at("val").get<int>(), counts.at("test").get<int>()};
  const auto& s = j.at("scenes");
  auto range = [](const nlohmann::json& v) {
    const auto r = v.get<std::vector<double>>();
    if (r.size() != 2) throw ContractViolation("ranges must be [lo, hi]");
    return Range{r[0], r[1]};
  };
  c.scenes.size = s.at("size").get<int>();
  c.scenes.spectral_exponent = range(s.at("spectral_exponent"));
  c.scenes.texture_contrast = range(s.at("texture_contrast"));
  const auto palette = s.at("palette_colors").get<std::vector<int>>();
  if (palette.size() != 2) throw ContractViolation("palette_colors must be [min, max]");
  c.scenes.min_palette = palette[0];
  c.scenes.max_palette = palette[1];
  c.scenes.max_gradients = s.at("max_gradients").get<int>();
  c.scenes.max_shapes = s.at("max_shapes").get<int>();
}

CorpusManifest build_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir,
                            const RngStream& rng) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create corpus directory " + out_dir.string() + ": " + ec.message());

  const FingerprintSpec& train_fp = find_family(spec, spec.train_family);
  CorpusManifest manifest;
  const std::pair<Split, int> splits[] = {
      {Split::kTrain, spec.counts.train}, {Split::kVal, spec.counts.val}, {Split::kTest, spec.counts.test}};
  for (const auto& [split, count] : splits) {
    const int fakes = count / 2;
    const int reals = count - fakes;
    for (int i = 0; i < count; ++i) {
      Record r;
      r.id = record_id(split, i);
      r.path = "images/" + r.id + ".ppm";
      r.split = split;
      r.label = i < reals ? 0 : 1;
      const FingerprintSpec* fp = nullptr;
      if (r.label == 1) {
        fp = split == Split::kTest
                 ? &spec.families[static_cast<std::size_t>(i - reals) % spec.families.size()]
                 : &train_fp;
      }
      r.family = fp ? fp->family_id : kRealFamily;

      RngStream item = rng.child(r.id);
      RngStream spec_rng = item.child("scene_spec");
      RngStream scene_rng = item.child("scene");
      Image img = synth_real(spec.scenes.draw(spec_rng), scene_rng);
      if (fp) img = inject_fingerprint(img, *fp);
      write_ppm(img, out_dir / r.path);
      manifest.records.push_back(std::move(r));
    }
  }
  write_manifest(manifest, out_dir / kManifestName);
  return manifest;
}

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write manifest " + path.string());
  for (const Record& r : manifest.records) os << record_json(r).dump() << '\n';
  if (!os) throw IoError("failed writing manifest " + path.string());
}

std::vector<const Record*> Corpus::split(Split s) const {
  std::vector<const Record*> out;
  for (const Record& r : manifest_.records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

Image Corpus::load(const Record& record) const {
  if (observer_) observer_(record);
  return read_ppm(root_ / record.path);
}

Corpus load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("manifest not found: " + path.string());
  const std::filesystem::path root = path.parent_path();
  CorpusManifest manifest;
  std::set<std::string> ids;
  std::set<std::string> training_fakes;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    Record r;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.size() != 5) throw LoadError("record must have exactly id, path, label, family, split");
      r.id = j.at("id").get<std::string>();
      r.path = j.at("path").get<std::string>();
      r.label = j.at("label").get<int>();
      r.family = j.at("family").get<std::string>();
      r.split = split_from_string(j.at("split").get<std::string>());
    } catch (const LoadError& e) {
      throw LoadError("malformed record at " + where + ": " + e.what());
    } catch (const std::exception& e) {
      throw LoadError("malformed record at " + where + ": " + e.what());
    }
    if (r.label != 0 && r.label != 1) throw LoadError("record '" + r.id + "' has label outside {0, 1}");
    if ((r.label == 0) != (r.family == kRealFamily)) {
      throw LoadError("record '" + r.id + "' label disagrees with family '" + r.family + "'");
    }
    if (!ids.insert(r.id).second) throw LoadError("duplicate record id '" + r.id + "'");
    if (!std::filesystem::exists(root / r.path)) {
      throw LoadError("record '" + r.id + "' references missing image " + (root / r.path).string());
    }
    if (r.label == 1 && r.split != Split::kTest) training_fakes.insert(r.family);
    manifest.records.push_back(std::move(r));
  }
  if (training_fakes.size() > 1) {
    throw LoadError("train/val splits mix several generator families");
  }
  return Corpus(std::move(manifest), root);
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write image " + path.string());
  os << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> bytes(static_cast<std::size_t>(img.height() * img.width() * 3));
  std::size_t k = 0;
  for (Index y = 0; y < img.height(); ++y) {
    for (Index x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        bytes[k++] = static_cast<char>(std::lround(std::clamp(img(c, y, x), 0.0, 1.0) * 255.0));
      }
    }
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing image " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("missing image " + path.string());
  auto token = [&]() {
    std::string t;
    char ch;
    while (is.get(ch)) {
      if (ch == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(ch);
    }
    return t;
  };
  if (token() != "P6") throw LoadError("not a binary PPM: " + path.string());
  long width = 0, height = 0, maxval = 0;
  try {
    width = std::stol(token());
    height = std::stol(token());
    maxval = std::stol(token());
  } catch (const std::exception&) {
    throw LoadError("malformed PPM header: " + path.string());
  }
  if (width < 1 || height < 1 || maxval != 255) throw LoadError("unsupported PPM: " + path.string());
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width * height * 3));
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw LoadError("truncated PPM: " + path.string());
  }
  std::array<Plane, 3> rgb;
  for (Plane& p : rgb) p.resize(height, width);
  std::size_t k = 0;
  for (long y = 0; y < height; ++y) {
    for (long x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) rgb[c](y, x) = bytes[k++] / 255.0;
    }
  }
  return Image::from_planes(std::move(rgb[0]), std::move(rgb[1]), std::move(rgb[2]));
}

}  // namespace gandetect
