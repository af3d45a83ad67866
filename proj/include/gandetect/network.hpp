#pragma once

#include "gandetect/autodiff.hpp"
#include "gandetect/image.hpp"
#include "gandetect/rng.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gandetect {

enum class HeadKind { kProjection, kClassifier };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& name);

/// Backbone and head geometry. The stem never subsamples.
struct DetectorConfig {
  int stem_channels = 16;
  std::vector<int> block_widths{16, 32};
  std::vector<int> blocks_per_stage{1, 1};
  int stem_stride = 1;
  /// Flag s set: the first block of stage s + 1 halves the resolution.
  std::vector<bool> downsample_after_stage{true, false};
  int projection_hidden = 256;
  int projection_latent = 64;
  int crop_size = 96;

  void validate() const;
  bool operator==(const DetectorConfig&) const = default;
};

/// Name of the first field where the two configs differ.
std::optional<std::string> first_mismatch(const DetectorConfig& a, const DetectorConfig& b);

void to_json(nlohmann::json& j, const DetectorConfig& c);
void from_json(const nlohmann::json& j, DetectorConfig& c);

/// One entry of the layer graph, in execution order.
struct LayerInfo {
  std::string name;
  std::string kind;  // conv, norm, relu, add, pool, affine
  int kernel = 0;
  int stride = 1;
};

class DetectorNetwork {
 public:
  DetectorNetwork() = default;

  const DetectorConfig& config() const { return config_; }
  HeadKind head() const { return head_; }

  std::map<std::string, Parameter>& parameters() { return params_; }
  const std::map<std::string, Parameter>& parameters() const { return params_; }
  Parameter& parameter(const std::string& name);
  const Parameter& parameter(const std::string& name) const;

  Index parameter_count() const;
  void zero_grad();

  /// Receptive-field floor of the deepest backbone unit; smaller inputs are rejected.
  Index min_input_size() const;
  std::vector<LayerInfo> layers() const;

  /// Records the forward pass with parameters bound for training.
  Var forward(Tape& tape, const Image& image);
  /// Pooled backbone features, recorded with parameters bound.
  Var features(Tape& tape, const Image& image);
  /// Inference-only forward on a private tape.
  Tensor infer(const Image& image) const;

 private:
  friend DetectorNetwork build_detector(const DetectorConfig&, RngStream&);
  friend DetectorNetwork swap_head(DetectorNetwork, HeadKind, RngStream&);
  friend DetectorNetwork assemble_detector(const DetectorConfig&, HeadKind,
                                           std::map<std::string, Parameter>);

  template <typename ParamFn>
  Var run(Tape& tape, const Image& image, ParamFn&& param, bool with_head) const;
  void add_head(HeadKind kind, RngStream& rng);
  void check_input(const Image& image) const;

  DetectorConfig config_;
  HeadKind head_ = HeadKind::kProjection;
  std::map<std::string, Parameter> params_;
};

/// He-initialized detector with a projection head.
DetectorNetwork build_detector(const DetectorConfig& config, RngStream& rng);

/// Replaces the head; backbone parameters are kept bit-exact and every
/// parameter is left trainable.
DetectorNetwork swap_head(DetectorNetwork net, HeadKind kind, RngStream& rng);

/// Rebuilds a network from stored parameters, checking names and shapes.
DetectorNetwork assemble_detector(const DetectorConfig& config, HeadKind head,
                                  std::map<std::string, Parameter> params);

/// Raw projection-head latent.
Tensor embed(const DetectorNetwork& net, const Image& image);
/// logistic(logit); above 0.5 means synthetic.
double classify(const DetectorNetwork& net, const Image& image);
double classify_logit(const DetectorNetwork& net, const Image& image);

/// Binary checkpoint: magic, version, config JSON, then named parameters as
/// little-endian float64.
void save_checkpoint(const DetectorNetwork& net, const std::filesystem::path& path);
DetectorNetwork load_checkpoint(const std::filesystem::path& path);

}  // namespace gandetect
