#include "gandetect/network.hpp"

#include "gandetect/errors.hpp"
#include "gandetect/ops.hpp"

#include <cmath>

namespace gandetect {

namespace {

// Inputs are shifted to zero-centered intensities before the stem.
constexpr double kInputCenter = 0.5;

std::string block_prefix(std::size_t stage, int block) {
  return "stage" + std::to_string(stage) + ".block" + std::to_string(block);
}

int block_stride(const DetectorConfig& c, std::size_t stage, int block) {
  return (block == 0 && stage > 0 && c.downsample_after_stage[stage - 1]) ? 2 : 1;
}

bool needs_shortcut(int in_channels, int out_channels, int stride) {
  return in_channels != out_channels || stride != 1;
}

Tensor gaussian_tensor(Shape shape, double stddev, RngStream rng) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = stddev * rng.normal();
  return t;
}

struct ParamSpec {
  std::string name;
  Shape shape;
  enum { kHe, kLinear, kZero, kOne } init;
  double fan_in = 1.0;
};

void conv_specs(std::vector<ParamSpec>& out, const std::string& prefix, int in, int outc, int k) {
  out.push_back({prefix + ".weight", {outc, in, k, k}, ParamSpec::kHe, double(in * k * k)});
  out.push_back({prefix + ".bias", {outc}, ParamSpec::kZero});
}

void norm_specs(std::vector<ParamSpec>& out, const std::string& prefix, int channels) {
  out.push_back({prefix + ".scale", {channels}, ParamSpec::kOne});
  out.push_back({prefix + ".shift", {channels}, ParamSpec::kZero});
}

std::vector<ParamSpec> backbone_specs(const DetectorConfig& c) {
  std::vector<ParamSpec> specs;
  conv_specs(specs, "stem.conv", 3, c.stem_channels, 3);
  norm_specs(specs, "stem.norm", c.stem_channels);
  int in = c.stem_channels;
  for (std::size_t s = 0; s < c.block_widths.size(); ++s) {
    const int width = c.block_widths[s];
    for (int b = 0; b < c.blocks_per_stage[s]; ++b) {
      const std::string p = block_prefix(s, b);
      const int stride = block_stride(c, s, b);
      conv_specs(specs, p + ".conv1", in, width, 3);
      norm_specs(specs, p + ".norm1", width);
      conv_specs(specs, p + ".conv2", width, width, 3);
      norm_specs(specs, p + ".norm2", width);
      if (needs_shortcut(in, width, stride)) conv_specs(specs, p + ".shortcut", in, width, 1);
      in = width;
    }
  }
  return specs;
}

std::vector<ParamSpec> head_specs(const DetectorConfig& c, HeadKind kind) {
  const int features = c.block_widths.back();
  if (kind == HeadKind::kProjection) {
    return {{"head.fc1.weight", {c.projection_hidden, features}, ParamSpec::kHe, double(features)},
            {"head.fc1.bias", {c.projection_hidden}, ParamSpec::kZero},
            {"head.fc2.weight", {c.projection_latent, c.projection_hidden}, ParamSpec::kLinear,
             double(c.projection_hidden)},
            {"head.fc2.bias", {c.projection_latent}, ParamSpec::kZero}};
  }
  return {{"head.fc.weight", {1, features}, ParamSpec::kLinear, double(features)},
          {"head.fc.bias", {1}, ParamSpec::kZero}};
}

Parameter init_parameter(const ParamSpec& spec, const RngStream& rng) {
  switch (spec.init) {
    case ParamSpec::kHe:
      return {spec.name, gaussian_tensor(spec.shape, std::sqrt(2.0 / spec.fan_in), rng.child(spec.name))};
    case ParamSpec::kLinear:
      return {spec.name, gaussian_tensor(spec.shape, std::sqrt(1.0 / spec.fan_in), rng.child(spec.name))};
    case ParamSpec::kOne:
      return {spec.name, Tensor::constant(spec.shape, 1.0)};
    case ParamSpec::kZero:
      break;
  }
  return {spec.name, Tensor(spec.shape)};
}

}  // namespace

std::string to_string(HeadKind kind) {
  return kind == HeadKind::kProjection ? "projection" : "classifier";
}

HeadKind head_kind_from_string(const std::string& name) {
  if (name == "projection") return HeadKind::kProjection;
  if (name == "classifier") return HeadKind::kClassifier;
  throw ContractViolation("unknown head kind '" + name + "'");
}

void DetectorConfig::validate() const {
  if (stem_stride != 1) {
    throw ContractViolation("stem_stride must be 1 (the first layer never subsamples), got " +
                            std::to_string(stem_stride));
  }
  if (stem_channels < 1) throw ContractViolation("stem_channels must be at least 1");
  if (block_widths.empty()) throw ContractViolation("block_widths must name at least one stage");
  if (blocks_per_stage.size() != block_widths.size()) {
    throw ContractViolation("blocks_per_stage must have one entry per stage");
  }
  if (downsample_after_stage.size() != block_widths.size()) {
    throw ContractViolation("downsample_after_stage must have one entry per stage");
  }
  if (downsample_after_stage.back()) {
    throw ContractViolation("downsample_after_stage: the last stage has no successor to downsample");
  }
  for (std::size_t s = 0; s < block_widths.size(); ++s) {
    if (block_widths[s] < 1) throw ContractViolation("block_widths entries must be at least 1");
    if (blocks_per_stage[s] < 1) throw ContractViolation("blocks_per_stage entries must be at least 1");
  }
  if (projection_hidden < 1) throw ContractViolation("projection_hidden must be at least 1");
  if (projection_latent < 2) throw ContractViolation("projection_latent must be at least 2");
  if (crop_size < 1) throw ContractViolation("crop_size must be positive");
}

std::optional<std::string> first_mismatch(const DetectorConfig& a, const DetectorConfig& b) {
  if (a.stem_channels != b.stem_channels) return "stem_channels";
  if (a.block_widths != b.block_widths) return "block_widths";
  if (a.blocks_per_stage != b.blocks_per_stage) return "blocks_per_stage";
  if (a.stem_stride != b.stem_stride) return "stem_stride";
  if (a.downsample_after_stage != b.downsample_after_stage) return "downsample_after_stage";
  if (a.projection_hidden != b.projection_hidden || a.projection_latent != b.projection_latent) {
    return "projection_dims";
  }
  if (a.crop_size != b.crop_size) return "crop_size";
  return std::nullopt;
}

void to_json(nlohmann::json& j, const DetectorConfig& c) {
  j = nlohmann::json{{"stem_channels", c.stem_channels},
                     {"block_widths", c.block_widths},
                     {"blocks_per_stage", c.blocks_per_stage},
                     {"stem_stride", c.stem_stride},
                     {"downsample_after_stage", c.downsample_after_stage},
                     {"projection_dims", {c.projection_hidden, c.projection_latent}},
                     {"crop_size", c.crop_size}};
}

void from_json(const nlohmann::json& j, DetectorConfig& c) {
  c.stem_channels = j.at("stem_channels").get<int>();
  c.block_widths = j.at("block_widths").get<std::vector<int>>();
  c.blocks_per_stage = j.at("blocks_per_stage").get<std::vector<int>>();
  c.stem_stride = j.at("stem_stride").get<int>();
  c.downsample_after_stage = j.at("downsample_after_stage").get<std::vector<bool>>();
  const auto dims = j.at("projection_dims").get<std::vector<int>>();
  if (dims.size() != 2) throw ContractViolation("projection_dims must be [hidden, latent]");
  c.projection_hidden = dims[0];
  c.projection_latent = dims[1];
  c.crop_size = j.at("crop_size").get<int>();
}

Parameter& DetectorNetwork::parameter(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractViolation("no parameter named '" + name + "'");
  return it->second;
}

const Parameter& DetectorNetwork::parameter(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractViolation("no parameter named '" + name + "'");
  return it->second;
}

Index DetectorNetwork::parameter_count() const {
  Index n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void DetectorNetwork::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

Index DetectorNetwork::min_input_size() const {
  Index field = 1, jump = 1;
  for (const LayerInfo& layer : layers()) {
    if (layer.kind != "conv" || layer.name.ends_with(".shortcut")) continue;
    field += (layer.kernel - 1) * jump;
    jump *= layer.stride;
  }
  return field;
}

std::vector<LayerInfo> DetectorNetwork::layers() const {
  std::vector<LayerInfo> out;
  out.push_back({"stem.conv", "conv", 3, config_.stem_stride});
  out.push_back({"stem.norm", "norm"});
  out.push_back({"stem.relu", "relu"});
  int in = config_.stem_channels;
  for (std::size_t s = 0; s < config_.block_widths.size(); ++s) {
    for (int b = 0; b < config_.blocks_per_stage[s]; ++b) {
      const std::string p = block_prefix(s, b);
      const int stride = block_stride(config_, s, b);
      out.push_back({p + ".conv1", "conv", 3, stride});
      out.push_back({p + ".norm1", "norm"});
      out.push_back({p + ".relu1", "relu"});
      out.push_back({p + ".conv2", "conv", 3, 1});
      out.push_back({p + ".norm2", "norm"});
      if (needs_shortcut(in, config_.block_widths[s], stride)) {
        out.push_back({p + ".shortcut", "conv", 1, stride});
      }
      out.push_back({p + ".add", "add"});
      out.push_back({p + ".relu2", "relu"});
      in = config_.block_widths[s];
    }
  }
  out.push_back({"pool", "pool"});
  if (head_ == HeadKind::kProjection) {
    out.push_back({"head.fc1", "affine"});
    out.push_back({"head.relu", "relu"});
    out.push_back({"head.fc2", "affine"});
  } else {
    out.push_back({"head.fc", "affine"});
  }
  return out;
}

void DetectorNetwork::check_input(const Image& image) const {
  const Index floor = min_input_size();
  if (image.height() < floor || image.width() < floor) {
    throw TooSmallInput("input " + std::to_string(image.height()) + "x" +
                        std::to_string(image.width()) + " is below the network minimum " +
                        std::to_string(floor) + "x" + std::to_string(floor));
  }
}

template <typename ParamFn>
Var DetectorNetwork::run(Tape& tape, const Image& image, ParamFn&& param, bool with_head) const {
  check_input(image);
  auto conv = [&](Var in, const std::string& prefix, int kernel, int stride) {
    Var padded = kernel > 1 ? pad_replicate(in, kernel / 2) : in;
    return conv2d(padded, param(prefix + ".weight"), param(prefix + ".bias"), stride, 0);
  };
  auto norm = [&](Var in, const std::string& prefix) {
    return channel_affine(in, param(prefix + ".scale"), param(prefix + ".shift"));
  };

  Tensor input = image.to_tensor();
  input.data().array() -= kInputCenter;
  Var x = tape.constant(std::move(input));
  x = relu(norm(conv(x, "stem.conv", 3, config_.stem_stride), "stem.norm"));
  int in = config_.stem_channels;
  for (std::size_t s = 0; s < config_.block_widths.size(); ++s) {
    const int width = config_.block_widths[s];
    for (int b = 0; b < config_.blocks_per_stage[s]; ++b) {
      const std::string p = block_prefix(s, b);
      const int stride = block_stride(config_, s, b);
      Var h = relu(norm(conv(x, p + ".conv1", 3, stride), p + ".norm1"));
      h = norm(conv(h, p + ".conv2", 3, 1), p + ".norm2");
      Var skip = needs_shortcut(in, width, stride) ? conv(x, p + ".shortcut", 1, stride) : x;
      x = relu(add(h, skip));
      in = width;
    }
  }
  Var pooled = global_average_pool(x);
  if (!with_head) return pooled;
  if (head_ == HeadKind::kProjection) {
    Var hidden = relu(affine(pooled, param("head.fc1.weight"), param("head.fc1.bias")));
    return affine(hidden, param("head.fc2.weight"), param("head.fc2.bias"));
  }
  return affine(pooled, param("head.fc.weight"), param("head.fc.bias"));
}

Var DetectorNetwork::forward(Tape& tape, const Image& image) {
  return run(tape, image, [&](const std::string& n) { return tape.param(parameter(n)); }, true);
}

Var DetectorNetwork::features(Tape& tape, const Image& image) {
  return run(tape, image, [&](const std::string& n) { return tape.param(parameter(n)); }, false);
}

Tensor DetectorNetwork::infer(const Image& image) const {
  Tape tape(Tape::Mode::kInference);
  return run(tape, image,
             [&](const std::string& n) { return tape.constant(parameter(n).value); }, true)
      .value();
}

void DetectorNetwork::add_head(HeadKind kind, RngStream& rng) {
  std::erase_if(params_, [](const auto& kv) { return kv.first.starts_with("head."); });
  const RngStream head_rng = rng.child("head." + to_string(kind));
  for (const ParamSpec& spec : head_specs(config_, kind)) {
    params_.emplace(spec.name, init_parameter(spec, head_rng));
  }
  head_ = kind;
}

DetectorNetwork build_detector(const DetectorConfig& config, RngStream& rng) {
  config.validate();
  DetectorNetwork net;
  net.config_ = config;
  const RngStream backbone = rng.child("backbone");
  for (const ParamSpec& spec : backbone_specs(config)) {
    net.params_.emplace(spec.name, init_parameter(spec, backbone));
  }
  net.add_head(HeadKind::kProjection, rng);
  return net;
}

DetectorNetwork swap_head(DetectorNetwork net, HeadKind kind, RngStream& rng) {
  net.add_head(kind, rng);
  for (auto& [name, p] : net.params_) {
    p.trainable = true;
    p.zero_grad();
  }
  return net;
}

DetectorNetwork assemble_detector(const DetectorConfig& config, HeadKind head,
                                  std::map<std::string, Parameter> params) {
  config.validate();
  std::vector<ParamSpec> specs = backbone_specs(config);
  for (ParamSpec& s : head_specs(config, head)) specs.push_back(std::move(s));
  if (specs.size() != params.size()) {
    throw LoadError("parameter set has " + std::to_string(params.size()) + " entries, config needs " +
                    std::to_string(specs.size()));
  }
  for (const ParamSpec& spec : specs) {
    auto it = params.find(spec.name);
    if (it == params.end()) throw LoadError("missing parameter '" + spec.name + "'");
    if (it->second.value.shape() != spec.shape) {
      throw LoadError("parameter '" + spec.name + "' has shape " +
                      shape_string(it->second.value.shape()) + ", expected " + shape_string(spec.shape));
    }
  }
  DetectorNetwork net;
  net.config_ = config;
  net.head_ = head;
  net.params_ = std::move(params);
  return net;
}

Tensor embed(const DetectorNetwork& net, const Image& image) {
  if (net.head() != HeadKind::kProjection) throw ContractViolation("embed needs a projection head");
  return net.infer(image);
}

double classify_logit(const DetectorNetwork& net, const Image& image) {
  if (net.head() != HeadKind::kClassifier) throw ContractViolation("classify needs a classifier head");
  return net.infer(image).item();
}

double classify(const DetectorNetwork& net, const Image& image) {
  const double z = classify_logit(net, image);
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace gandetect
