#pragma once

#include "gandetect/augment.hpp"
#include "gandetect/datagen.hpp"
#include "gandetect/network.hpp"
#include "gandetect/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gandetect {

struct ContrastiveConfig {
  double temperature = 0.07;
  /// Source images per batch; each contributes two views.
  int images_per_batch = 32;

  void validate() const;
};

struct PhaseSettings {
  OptimizerKind kind = OptimizerKind::kSgd;
  double lr = 1e-4;
  int max_epochs = 30;
};

struct OptimizerConfig {
  PhaseSettings pretrain{OptimizerKind::kSgd, 1e-4, 30};
  PhaseSettings finetune{OptimizerKind::kAdam, 1e-5, 30};
  AdamSettings adam;
  double plateau_factor = 10.0;
  int plateau_patience = 5;
  double lr_floor = 1e-6;
  /// Stop once the lr sits at the floor and the patience runs out again.
  bool stop_at_floor = true;
  /// Apply the augmentation chain during supervised fine-tuning too.
  bool augment_finetune = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const ContrastiveConfig& c);
void from_json(const nlohmann::json& j, ContrastiveConfig& c);
void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);
void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);

struct EpochRecord {
  int epoch = 0;
  std::string phase;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

/// Stream that drives the augmentation of one item in one epoch.
RngStream item_stream(std::uint64_t seed, const std::string& phase, const std::string& item_id,
                      int epoch);

/// Self-supervised phase: two views per image, NT-Xent over the 2N latents.
/// Labels are never read.
std::vector<EpochRecord> pretrain(DetectorNetwork& net, const Corpus& corpus,
                                  const AugmentConfig& augment, const ContrastiveConfig& cfg,
                                  const OptimizerConfig& opt, std::uint64_t seed);

/// Supervised phase over the whole network with binary cross-entropy.
std::vector<EpochRecord> finetune(DetectorNetwork& net, const Corpus& corpus,
                                  const AugmentConfig& augment, const ContrastiveConfig& cfg,
                                  const OptimizerConfig& opt, std::uint64_t seed);

/// Validation losses used by the plateau schedule: no augmentation, center
/// crops, NaN when the validation split is too small.
double contrastive_validation_loss(const DetectorNetwork& net, const Corpus& corpus,
                                   const ContrastiveConfig& cfg);
double supervised_validation_loss(const DetectorNetwork& net, const Corpus& corpus, int crop_size);

/// CSV with header epoch,phase,train_loss,val_loss,lr.
void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace gandetect
