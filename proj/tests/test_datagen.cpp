#include "helpers.hpp"

#include "gandetect/datagen.hpp"
#include "gandetect/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

namespace gandetect {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

// Plain O(n^3) 2-D DFT magnitude of a square plane.
Plane dft_magnitude(const Plane& p) {
  const Index n = p.rows();
  using C = std::complex<double>;
  std::vector<C> twiddle(n);
  for (Index k = 0; k < n; ++k) twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * k / n);
  Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic> rows(n, n), full(n, n);
  for (Index y = 0; y < n; ++y) {
    for (Index u = 0; u < n; ++u) {
      C acc = 0.0;
      for (Index x = 0; x < n; ++x) acc += p(y, x) * twiddle[(u * x) % n];
      rows(y, u) = acc;
    }
  }
  for (Index v = 0; v < n; ++v) {
    for (Index u = 0; u < n; ++u) {
      C acc = 0.0;
      for (Index y = 0; y < n; ++y) acc += rows(y, u) * twiddle[(v * y) % n];
      full(v, u) = acc;
    }
  }
  return full.cwiseAbs().array();
}

Plane luma(const Image& img) {
  return 0.299 * img.channel(0) + 0.587 * img.channel(1) + 0.114 * img.channel(2);
}

double low_frequency_fraction(const Image& img, double radius) {
  Plane l = luma(img);
  l -= l.mean();
  const Plane mag = dft_magnitude(l);
  const Index n = l.rows();
  double low = 0.0, total = 0.0;
  for (Index v = 0; v < n; ++v) {
    for (Index u = 0; u < n; ++u) {
      const double fu = static_cast<double>(std::min(u, n - u)), fv = static_cast<double>(std::min(v, n - v));
      const double e = mag(v, u) * mag(v, u);
      total += e;
      if (std::hypot(fu, fv) <= radius) low += e;
    }
  }
  return low / total;
}

CorpusSpec tiny_corpus() {
  CorpusSpec c = CorpusSpec::defaults();
  c.counts = {20, 10, 30};
  c.scenes.size = 24;
  return c;
}

TEST(SynthReal, DeterministicAndInRange) {
  SceneSpec spec;
  spec.size = 48;
  RngStream a(1), b(1), c(2);
  const Image x = synth_real(spec, a);
  EXPECT_EQ(x, synth_real(spec, b));
  EXPECT_FALSE(x == synth_real(spec, c));
  EXPECT_TRUE(x.in_unit_range());
  EXPECT_EQ(x.height(), 48);
}

TEST(SynthReal, SteeperSpectrumHoldsMoreLowFrequencyEnergy) {
  SceneSpec spec;
  spec.size = 64;
  spec.gradient_count = 0;
  spec.shape_count = 0;
  spec.texture_contrast = 0.1;
  for (std::uint64_t seed : {1, 2, 3}) {
    spec.spectral_exponent = 2.0;
    RngStream r1(seed);
    const double steep = low_frequency_fraction(synth_real(spec, r1), 6.0);
    spec.spectral_exponent = 0.5;
    RngStream r2(seed);
    const double flat = low_frequency_fraction(synth_real(spec, r2), 6.0);
    EXPECT_GT(steep, flat) << seed;
  }
}

TEST(SynthReal, RejectsInvalidSpecs) {
  SceneSpec spec;
  spec.spectral_exponent = 2.5;
  EXPECT_THROW(spec.validate(), ContractViolation);
  spec = SceneSpec{};
  spec.palette.resize(5);
  EXPECT_THROW(spec.validate(), ContractViolation);
  spec = SceneSpec{};
  EXPECT_THROW(spec.validate(200), ContractViolation);
}

TEST(Fingerprint, ZeroAmplitudeIsIdentity) {
  RngStream rng(3);
  const Image img = testing::random_image(16, 16, rng);
  FingerprintSpec fp{"z", 4, 0.0};
  EXPECT_EQ(inject_fingerprint(img, fp), img);
}

TEST(Fingerprint, DifferenceOnGrayIsTheLattice) {
  FingerprintSpec fp{"b", 3, 0.04, 30.0, 0.7, {1.0, 0.5}};
  const Image gray(20, 24, 0.5);
  const Image out = inject_fingerprint(gray, fp);
  const double th = 30.0 * std::numbers::pi / 180.0;
  const double gain = 0.04 / (2.0 * 1.5);
  for (Index y = 0; y < 20; ++y) {
    for (Index x = 0; x < 24; ++x) {
      const double u = x * std::cos(th) + y * std::sin(th), v = -x * std::sin(th) + y * std::cos(th);
      double want = 0.0;
      for (int k = 1; k <= 2; ++k) {
        const double w = 2.0 * std::numbers::pi * k / 3.0;
        want += (k == 1 ? 1.0 : 0.5) * (std::cos(w * u + 0.7) + std::cos(w * v + 0.7));
      }
      want *= gain;
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(out(c, y, x) - 0.5, want, 1e-15);
    }
  }
  EXPECT_LE(fingerprint_signal(fp, 20, 24).abs().maxCoeff(), 0.04 + 1e-15);
}

TEST(Fingerprint, SpectrumPeaksAtTheFundamental) {
  const Index n = 60;
  for (const auto& fp : CorpusSpec::defaults().families) {
    const Image base(n, n, 0.5);
    Plane diff = inject_fingerprint(base, fp).channel(0) - base.channel(0);
    const Plane mag = dft_magnitude(diff);
    Index bv = 0, bu = 0;
    double best = -1.0;
    for (Index v = 0; v < n; ++v) {
      for (Index u = 0; u < n; ++u) {
        if ((u == 0 && v == 0) || mag(v, u) <= best) continue;
        best = mag(v, u);
        bv = v;
        bu = u;
      }
    }
    // Fundamentals are (cos, sin) / period and (-sin, cos) / period in cycles per pixel.
    const double th = fp.orientation_degrees * std::numbers::pi / 180.0;
    const double f = static_cast<double>(n) / fp.period;
    const std::array<std::pair<double, double>, 2> fundamentals{
        {{f * std::cos(th), f * std::sin(th)}, {-f * std::sin(th), f * std::cos(th)}}};
    auto wrapped = [n](double a, Index b) {
      const double d = std::fmod(std::abs(a - static_cast<double>(b)), static_cast<double>(n));
      return std::min(d, static_cast<double>(n) - d);
    };
    bool near = false;
    for (const auto& [fu, fv] : fundamentals) {
      for (double sign : {1.0, -1.0}) {
        near |= wrapped(sign * fu, bu) <= 1.0 && wrapped(sign * fv, bv) <= 1.0;
      }
    }
    EXPECT_TRUE(near) << fp.family_id << " peak at (" << bu << ", " << bv << ")";
  }
}

TEST(Fingerprint, RejectsInvalidSpecs) {
  EXPECT_THROW((FingerprintSpec{"a", 1, 0.01}.validate()), ContractViolation);
  EXPECT_THROW((FingerprintSpec{"a", 4, 0.06}.validate()), ContractViolation);
  EXPECT_THROW((FingerprintSpec{"", 4, 0.01}.validate()), ContractViolation);
}

TEST(Corpus, DefaultFamiliesDiffer) {
  const CorpusSpec spec = CorpusSpec::defaults();
  ASSERT_EQ(spec.families.size(), 3U);
  std::set<std::pair<int, double>> geometry;
  for (const auto& f : spec.families) geometry.insert({f.period, f.orientation_degrees});
  EXPECT_EQ(geometry.size(), 3U);
  EXPECT_EQ(spec.train_family, spec.families.front().family_id);
}

TEST(Corpus, CountsBalanceAndHeldOutFamilies) {
  TempDir dir("corpus");
  const CorpusSpec spec = tiny_corpus();
  const CorpusManifest m = build_corpus(spec, dir.path(), RngStream(5));
  std::map<Split, std::array<int, 2>> counts;
  std::set<std::string> ids;
  std::set<std::string> test_families;
  for (const Record& r : m.records) {
    ++counts[r.split][r.label];
    EXPECT_TRUE(ids.insert(r.id).second) << r.id;
    EXPECT_TRUE(fs::exists(dir.path() / r.path));
    if (r.split != Split::kTest) {
      EXPECT_TRUE(r.family == kRealFamily || r.family == spec.train_family) << r.family;
    } else if (r.label == 1) {
      test_families.insert(r.family);
    }
  }
  EXPECT_EQ(counts[Split::kTrain][0] + counts[Split::kTrain][1], 20);
  EXPECT_EQ(counts[Split::kVal][0] + counts[Split::kVal][1], 10);
  EXPECT_EQ(counts[Split::kTest][0] + counts[Split::kTest][1], 30);
  for (auto s : {Split::kTrain, Split::kVal, Split::kTest}) EXPECT_EQ(counts[s][0], counts[s][1]);
  EXPECT_EQ(test_families.size(), 3U);
}

TEST(Corpus, SameSeedSameBytes) {
  TempDir a("corpus_a"), b("corpus_b");
  const CorpusSpec spec = tiny_corpus();
  const CorpusManifest ma = build_corpus(spec, a.path(), RngStream(6));
  EXPECT_EQ(build_corpus(spec, b.path(), RngStream(6)), ma);
  EXPECT_EQ(testing::read_bytes(a.path() / kManifestName), testing::read_bytes(b.path() / kManifestName));
  for (const Record& r : ma.records) {
    EXPECT_EQ(testing::read_bytes(a.path() / r.path), testing::read_bytes(b.path() / r.path)) << r.id;
  }
}

TEST(Corpus, ScenesAreDrawnPerRecord) {
  TempDir dir("corpus_scenes");
  const CorpusManifest m = build_corpus(tiny_corpus(), dir.path(), RngStream(7));
  std::set<std::string> contents;
  for (const Record& r : m.records) contents.insert(testing::read_bytes(dir.path() / r.path));
  EXPECT_EQ(contents.size(), m.records.size());
}

TEST(Corpus, ManifestRoundTrip) {
  TempDir dir("corpus_rt");
  const CorpusManifest m = build_corpus(tiny_corpus(), dir.path(), RngStream(8));
  const Corpus c = load_manifest(dir.path() / kManifestName);
  EXPECT_EQ(c.manifest(), m);
  EXPECT_EQ(c.split(Split::kVal).size(), 10U);
  const Image img = c.load(*c.split(Split::kTest).front());
  EXPECT_EQ(img.height(), 24);
}

TEST(Corpus, SpecJsonRoundTrip) {
  const CorpusSpec spec = tiny_corpus();
  nlohmann::json j = spec;
  const CorpusSpec back = j.get<CorpusSpec>();
  EXPECT_EQ(nlohmann::json(back), j);
}

class ManifestErrors : public ::testing::Test {
 protected:
  void SetUp() override {
    write_ppm(Image(4, 4, 0.5), dir.path() / "a.ppm");
    write_ppm(Image(4, 4, 0.5), dir.path() / "b.ppm");
  }
  fs::path manifest(const std::string& text) {
    const fs::path p = dir.path() / kManifestName;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }
  std::string load_error(const std::string& text) {
    try {
      load_manifest(manifest(text));
    } catch (const LoadError& e) {
      return e.what();
    }
    return "";
  }
  TempDir dir{"manifest_err"};
};

TEST_F(ManifestErrors, MissingManifest) {
  EXPECT_THROW(load_manifest(dir.path() / "none.jsonl"), LoadError);
}

TEST_F(ManifestErrors, MissingImageNamesPath) {
  const std::string e = load_error(R"({"id":"x","path":"gone.ppm","label":0,"family":"real","split":"test"})"
                                   "\n");
  EXPECT_NE(e.find("gone.ppm"), std::string::npos) << e;
}

TEST_F(ManifestErrors, DuplicateId) {
  const std::string e = load_error(
      R"({"id":"x","path":"a.ppm","label":0,"family":"real","split":"test"})"
      "\n"
      R"({"id":"x","path":"b.ppm","label":0,"family":"real","split":"test"})"
      "\n");
  EXPECT_NE(e.find("duplicate"), std::string::npos) << e;
}

TEST_F(ManifestErrors, MalformedRecordNamesLine) {
  const std::string e = load_error(
      R"({"id":"x","path":"a.ppm","label":0,"family":"real","split":"test"})"
      "\n"
      R"({"id":"y","path":"b.ppm","label":0})"
      "\n");
  EXPECT_NE(e.find(":2"), std::string::npos) << e;
  EXPECT_NE(load_error("{not json\n"), "");
  EXPECT_NE(load_error(R"({"id":"x","path":"a.ppm","label":1,"family":"real","split":"test"})"
                       "\n"),
            "");
}

TEST(Ppm, RoundTripQuantizesToBytes) {
  TempDir dir("ppm");
  RngStream rng(9);
  const Image img = testing::random_image(5, 7, rng);
  write_ppm(img, dir.path() / "x.ppm");
  const Image back = read_ppm(dir.path() / "x.ppm");
  for (int c = 0; c < 3; ++c) {
    for (Index y = 0; y < 5; ++y) {
      for (Index x = 0; x < 7; ++x) EXPECT_EQ(back(c, y, x), std::round(img(c, y, x) * 255.0) / 255.0);
    }
  }
  write_ppm(back, dir.path() / "y.ppm");
  EXPECT_EQ(read_ppm(dir.path() / "y.ppm"), back);
  std::ofstream(dir.path() / "bad.ppm", std::ios::binary) << "P6\n5 7\n255\nabc";
  EXPECT_THROW(read_ppm(dir.path() / "bad.ppm"), LoadError);
}

}  // namespace
}  // namespace gandetect
