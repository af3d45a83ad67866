#include "gandetect/config.hpp"

#include "gandetect/errors.hpp"
#include "gandetect/rng.hpp"

#include <cstdio>
#include <fstream>

namespace gandetect {

std::vector<Perturbation> MetricGrid::perturbations() const {
  std::vector<Perturbation> out{Perturbation::none()};
  for (int q : jpeg_qualities) out.push_back(Perturbation::jpeg(q));
  for (double s : rescale_factors) out.push_back(Perturbation::rescale(s));
  return out;
}

void MetricGrid::validate() const {
  if (histogram_bins < 2) throw ContractViolation("metrics.histogram_bins must be at least 2");
  perturbations();
}

void RunConfig::validate() const {
  detector.validate();
  augment.validate();
  contrastive.validate();
  optimizer.validate();
  corpus.validate();
  metrics.validate();
  if (augment.crop_size != detector.crop_size) {
    throw ContractViolation("augment.crop_size must equal detector.crop_size");
  }
  if (detector.crop_size > corpus.scenes.size) {
    throw ContractViolation("detector.crop_size exceeds the corpus image size");
  }
}

nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["version"] = kRunConfigVersion;
  if (c.seed) j["seed"] = *c.seed;
  j["detector"] = c.detector;
  j["augment"] = c.augment;
  j["contrastive"] = c.contrastive;
  j["optimizer"] = c.optimizer;
  j["corpus"] = c.corpus;
  j["metrics"] = {{"jpeg_qualities", c.metrics.jpeg_qualities},
                  {"rescale_factors", c.metrics.rescale_factors},
                  {"histogram_bins", c.metrics.histogram_bins}};
  j["data_dir"] = c.data_dir;
  j["finetune_from_pretrained"] = c.finetune_from_pretrained;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  const int version = j.at("version").get<int>();
  if (version != kRunConfigVersion) {
    throw ContractViolation("unsupported config version " + std::to_string(version));
  }
  RunConfig c;
  if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
  c.detector = j.at("detector").get<DetectorConfig>();
  c.augment = j.at("augment").get<AugmentConfig>();
  c.contrastive = j.at("contrastive").get<ContrastiveConfig>();
  c.optimizer = j.at("optimizer").get<OptimizerConfig>();
  c.corpus = j.at("corpus").get<CorpusSpec>();
  const auto& m = j.at("metrics");
  c.metrics.jpeg_qualities = m.at("jpeg_qualities").get<std::vector<int>>();
  c.metrics.rescale_factors = m.at("rescale_factors").get<std::vector<double>>();
  c.metrics.histogram_bins = m.at("histogram_bins").get<int>();
  c.data_dir = j.value("data_dir", std::string());
  c.finetune_from_pretrained = j.value("finetune_from_pretrained", true);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open config " + path.string());
  try {
    // Comments are allowed so the shipped example can be annotated.
    return config_from_json(nlohmann::json::parse(is, nullptr, true, true));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const ContractViolation& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(c).dump())));
  return buf;
}

}  // namespace gandetect
