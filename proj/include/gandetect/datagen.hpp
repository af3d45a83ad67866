#pragma once

#include "gandetect/augment.hpp"
#include "gandetect/image.hpp"
#include "gandetect/rng.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace gandetect {

using Color = std::array<double, 3>;

/// Parameters of one procedural "pristine" scene.
struct SceneSpec {
  int size = 128;
  /// Amplitude spectrum falls as 1 / f^alpha.
  double spectral_exponent = 1.5;
  std::vector<Color> palette{{0.4, 0.5, 0.6}, {0.7, 0.6, 0.4}};
  double texture_contrast = 0.15;
  int gradient_count = 1;
  int shape_count = 2;

  void validate(int crop_size = 1) const;
};

/// Periodic lattice standing in for a generator's spectral trace.
struct FingerprintSpec {
  std::string family_id;
  int period = 4;
  double amplitude = 0.04;
  double orientation_degrees = 0.0;
  double phase = 0.0;
  /// Weight of harmonic k + 1.
  std::vector<double> harmonic_mix{1.0, 0.5};

  void validate() const;
};

/// Colored 1/f^alpha texture composited with smooth gradients and soft shapes.
Image synth_real(const SceneSpec& spec, RngStream& rng);

/// The additive lattice a fingerprint contributes at every pixel of an h x w image.
Plane fingerprint_signal(const FingerprintSpec& fp, Index height, Index width);
/// Adds the lattice to all channels and clamps to [0, 1].
Image inject_fingerprint(const Image& img, const FingerprintSpec& fp);

enum class Split { kTrain, kVal, kTest };
std::string to_string(Split split);
Split split_from_string(const std::string& name);

inline const std::string kRealFamily = "real";

struct Record {
  std::string id;
  std::string path;  // relative to the manifest directory
  int label = 0;     // real = 0, fake = 1
  std::string family;
  Split split = Split::kTrain;

  bool operator==(const Record&) const = default;
};

struct CorpusManifest {
  std::vector<Record> records;
  bool operator==(const CorpusManifest&) const = default;
};

struct SplitCounts {
  int train = 64;
  int val = 32;
  int test = 96;
};

/// Distribution from which each record's SceneSpec is drawn.
struct SceneDistribution {
  int size = 128;
  Range spectral_exponent{1.0, 2.0};
  Range texture_contrast{0.08, 0.2};
  int min_palette = 2;
  int max_palette = 4;
  int max_gradients = 2;
  int max_shapes = 4;

  SceneSpec draw(RngStream& rng) const;
};

struct CorpusSpec {
  std::vector<FingerprintSpec> families;
  std::string train_family;
  SplitCounts counts;
  SceneDistribution scenes;

  void validate() const;
  /// Training family A (period 4, 0 deg) and held-out B (3, 30 deg), C (5, 60 deg).
  static CorpusSpec defaults();
};

void to_json(nlohmann::json& j, const FingerprintSpec& f);
void from_json(const nlohmann::json& j, FingerprintSpec& f);
void to_json(nlohmann::json& j, const CorpusSpec& c);
void from_json(const nlohmann::json& j, CorpusSpec& c);

inline constexpr const char* kManifestName = "manifest.jsonl";

/// Writes images/<id>.ppm and manifest.jsonl under out_dir. Train and val hold
/// reals plus the training family; test holds reals plus every family.
CorpusManifest build_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir,
                            const RngStream& rng);

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

/// Loaded manifest with lazy image access.
class Corpus {
 public:
  Corpus(CorpusManifest manifest, std::filesystem::path root)
      : manifest_(std::move(manifest)), root_(std::move(root)) {}

  const CorpusManifest& manifest() const { return manifest_; }
  const std::filesystem::path& root() const { return root_; }
  std::vector<const Record*> split(Split s) const;

  Image load(const Record& record) const;

  /// Called on every image load; lets tests audit which records are touched.
  void set_access_observer(std::function<void(const Record&)> observer) {
    observer_ = std::move(observer);
  }

 private:
  CorpusManifest manifest_;
  std::filesystem::path root_;
  std::function<void(const Record&)> observer_;
};

/// Parses and validates a JSON-Lines manifest; every referenced image must exist.
Corpus load_manifest(const std::filesystem::path& path);

/// Binary PPM (P6, maxval 255). Values map to bytes by round(v * 255).
void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

}  // namespace gandetect
