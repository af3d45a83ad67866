#pragma once

#include "gandetect/augment.hpp"
#include "gandetect/datagen.hpp"
#include "gandetect/network.hpp"
#include "gandetect/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gandetect {

/// Test-time perturbations and histogram resolution used by evaluate and sweep.
struct MetricGrid {
  std::vector<int> jpeg_qualities{30, 50, 70, 90};
  std::vector<double> rescale_factors{0.5, 0.7, 1.5};
  int histogram_bins = 20;

  std::vector<Perturbation> perturbations() const;
  void validate() const;
};

inline constexpr int kRunConfigVersion = 1;

/// Everything a pipeline command needs, read from one JSON file.
struct RunConfig {
  DetectorConfig detector;
  AugmentConfig augment;
  ContrastiveConfig contrastive;
  OptimizerConfig optimizer;
  CorpusSpec corpus = CorpusSpec::defaults();
  MetricGrid metrics;
  /// Mandatory before any command runs; may come from the command line.
  std::optional<std::uint64_t> seed;
  /// Corpus location; empty means <out>/data.
  std::string data_dir;
  /// Start fine-tuning from the contrastive checkpoint, or from fresh weights.
  bool finetune_from_pretrained = true;

  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j);
/// Throws LoadError with the file name on any parse or validation problem.
RunConfig load_run_config(const std::filesystem::path& path);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& c);

}  // namespace gandetect
