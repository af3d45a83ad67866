#include "gandetect/trainer.hpp"

#include "gandetect/errors.hpp"
#include "gandetect/losses.hpp"
#include "gandetect/ops.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace gandetect {

namespace {

std::vector<const Record*> shuffled(std::vector<const Record*> items, RngStream rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(items[i - 1], items[j]);
  }
  return items;
}

std::vector<std::vector<const Record*>> batches_of(const std::vector<const Record*>& items,
                                                   int size, std::size_t min_size) {
  std::vector<std::vector<const Record*>> out;
  for (std::size_t start = 0; start < items.size(); start += static_cast<std::size_t>(size)) {
    const std::size_t end = std::min(items.size(), start + static_cast<std::size_t>(size));
    if (end - start >= min_size) out.emplace_back(items.begin() + start, items.begin() + end);
  }
  return out;
}

AugmentConfig with_crop(AugmentConfig a, int crop) {
  a.crop_size = crop;
  a.validate();
  return a;
}

Range range_from(const nlohmann::json& v) {
  const auto r = v.get<std::vector<double>>();
  if (r.size() != 2) throw ContractViolation("ranges must be [lo, hi]");
  return {r[0], r[1]};
}

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

nlohmann::json phase_json(const PhaseSettings& p) {
  return {{"optimizer", to_string(p.kind)}, {"lr", p.lr}, {"max_epochs", p.max_epochs}};
}

PhaseSettings phase_from(const nlohmann::json& j) {
  return {optimizer_kind_from_string(j.at("optimizer").get<std::string>()), j.at("lr").get<double>(),
          j.at("max_epochs").get<int>()};
}

}  // namespace

void ContrastiveConfig::validate() const {
  if (!(temperature > 0.0)) throw ContractViolation("temperature must be positive");
  if (images_per_batch < 2) throw ContractViolation("images_per_batch must be at least 2");
}

void OptimizerConfig::validate() const {
  for (const PhaseSettings* p : {&pretrain, &finetune}) {
    if (!(p->lr > 0.0)) throw ContractViolation("learning rates must be positive");
    if (p->max_epochs < 0) throw ContractViolation("max_epochs must be non-negative");
    if (lr_floor > p->lr) throw ContractViolation("lr_floor must not exceed the initial learning rate");
  }
  if (!(lr_floor > 0.0)) throw ContractViolation("lr_floor must be positive");
  if (!(plateau_factor > 1.0)) throw ContractViolation("plateau_factor must exceed 1");
  if (plateau_patience < 1) throw ContractViolation("plateau_patience must be at least 1");
}

void to_json(nlohmann::json& j, const ContrastiveConfig& c) {
  j = nlohmann::json{{"temperature", c.temperature}, {"images_per_batch", c.images_per_batch}};
}

void from_json(const nlohmann::json& j, ContrastiveConfig& c) {
  c.temperature = j.at("temperature").get<double>();
  c.images_per_batch = j.at("images_per_batch").get<int>();
}

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = nlohmann::json{{"pretrain", phase_json(c.pretrain)},
                     {"finetune", phase_json(c.finetune)},
                     {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
                     {"plateau", {{"factor", c.plateau_factor}, {"patience", c.plateau_patience}, {"floor", c.lr_floor}}},
                     {"stop_at_floor", c.stop_at_floor},
                     {"augment_finetune", c.augment_finetune}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  c.pretrain = phase_from(j.at("pretrain"));
  c.finetune = phase_from(j.at("finetune"));
  const auto& adam = j.at("adam");
  c.adam = {adam.at("beta1").get<double>(), adam.at("beta2").get<double>(), adam.at("epsilon").get<double>()};
  const auto& plateau = j.at("plateau");
  c.plateau_factor = plateau.at("factor").get<double>();
  c.plateau_patience = plateau.at("patience").get<int>();
  c.lr_floor = plateau.at("floor").get<double>();
  c.stop_at_floor = j.value("stop_at_floor", true);
  c.augment_finetune = j.value("augment_finetune", true);
}

void to_json(nlohmann::json& j, const AugmentConfig& c) {
  j = nlohmann::json{
      {"probabilities",
       {{"color_jitter", c.p_color_jitter}, {"grayscale", c.p_grayscale}, {"blur", c.p_blur},
        {"jpeg", c.p_jpeg}, {"noise", c.p_noise}, {"cutout", c.p_cutout}}},
      {"jpeg_quality", {c.jpeg_quality_min, c.jpeg_quality_max}},
      {"blur_sigma", range_json(c.blur_sigma)},
      {"brightness", range_json(c.brightness)},
      {"contrast", range_json(c.contrast)},
      {"saturation", range_json(c.saturation)},
      {"hue_degrees", range_json(c.hue_degrees)},
      {"noise_sigma", range_json(c.noise_sigma)},
      {"cutout_fraction", range_json(c.cutout_fraction)},
      {"cutout_fill", c.cutout_fill},
      {"crop_size", c.crop_size}};
}

void from_json(const nlohmann::json& j, AugmentConfig& c) {
  const auto& p = j.at("probabilities");
  c.p_color_jitter = p.at("color_jitter").get<double>();
  c.p_grayscale = p.at("grayscale").get<double>();
  c.p_blur = p.at("blur").get<double>();
  c.p_jpeg = p.at("jpeg").get<double>();
  c.p_noise = p.at("noise").get<double>();
  c.p_cutout = p.at("cutout").get<double>();
  const auto q = j.at("jpeg_quality").get<std::vector<int>>();
  if (q.size() != 2) throw ContractViolation("jpeg_quality must be [min, max]");
  c.jpeg_quality_min = q[0];
  c.jpeg_quality_max = q[1];
  c.blur_sigma = range_from(j.at("blur_sigma"));
  c.brightness = range_from(j.at("brightness"));
  c.contrast = range_from(j.at("contrast"));
  c.saturation = range_from(j.at("saturation"));
  c.hue_degrees = range_from(j.at("hue_degrees"));
  c.noise_sigma = range_from(j.at("noise_sigma"));
  c.cutout_fraction = range_from(j.at("cutout_fraction"));
  c.cutout_fill = j.value("cutout_fill", 0.5);
  c.crop_size = j.at("crop_size").get<int>();
}

RngStream item_stream(std::uint64_t seed, const std::string& phase, const std::string& item_id,
                      int epoch) {
  return RngStream(seed).child(phase).child(item_id).child(static_cast<std::uint64_t>(epoch));
}

double contrastive_validation_loss(const DetectorNetwork& net, const Corpus& corpus,
                                   const ContrastiveConfig& cfg) {
  const int crop = net.config().crop_size;
  const auto batches = batches_of(corpus.split(Split::kVal), cfg.images_per_batch, 2);
  if (batches.empty()) return std::nan("");
  double total = 0.0;
  Index anchors = 0;
  for (const auto& batch : batches) {
    // Both views are the same center crop, so the positive similarity is
    // pinned at 1 and the loss tracks how far apart the negatives sit.
    RowMatrix z(static_cast<Index>(2 * batch.size()), net.config().projection_latent);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Tensor e = embed(net, center_crop(corpus.load(*batch[i]), crop));
      z.row(static_cast<Index>(2 * i)) = e.data().transpose();
      z.row(static_cast<Index>(2 * i + 1)) = e.data().transpose();
    }
    std::vector<std::size_t> partner(static_cast<std::size_t>(z.rows()));
    for (std::size_t i = 0; i < partner.size(); ++i) partner[i] = i ^ 1U;
    total += nt_xent_terms(z, partner, cfg.temperature).sum();
    anchors += z.rows();
  }
  return total / static_cast<double>(anchors);
}

double supervised_validation_loss(const DetectorNetwork& net, const Corpus& corpus, int crop_size) {
  const auto records = corpus.split(Split::kVal);
  if (records.empty()) return std::nan("");
  double total = 0.0;
  for (const Record* r : records) {
    const double z = classify_logit(net, center_crop(corpus.load(*r), crop_size));
    total += std::max(z, 0.0) - r->label * z + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(records.size());
}

std::vector<EpochRecord> pretrain(DetectorNetwork& net, const Corpus& corpus,
                                  const AugmentConfig& augment, const ContrastiveConfig& cfg,
                                  const OptimizerConfig& opt, std::uint64_t seed) {
  cfg.validate();
  opt.validate();
  if (net.head() != HeadKind::kProjection) throw ContractViolation("pretrain needs a projection head");
  const AugmentConfig aug = with_crop(augment, net.config().crop_size);
  const auto train = corpus.split(Split::kTrain);
  if (train.size() < 2) throw ContractViolation("pretrain needs at least two training images");

  Optimizer optimizer(opt.pretrain.kind, opt.adam);
  PlateauScheduler schedule(opt.pretrain.lr, opt.plateau_factor, opt.plateau_patience, opt.lr_floor);
  const RngStream shuffle_rng = RngStream(seed).child("pretrain-shuffle");
  std::vector<EpochRecord> history;

  for (int epoch = 1; epoch <= opt.pretrain.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    int steps = 0;
    for (const auto& batch :
         batches_of(shuffled(train, shuffle_rng.child(static_cast<std::uint64_t>(epoch))),
                    cfg.images_per_batch, 2)) {
      Tape tape;
      std::vector<Var> latents;
      for (const Record* r : batch) {
        RngStream rs = item_stream(seed, "pretrain", r->id, epoch);
        const auto [a, b] = make_views(corpus.load(*r), aug, rs);
        latents.push_back(net.forward(tape, a));
        latents.push_back(net.forward(tape, b));
      }
      Var loss = nt_xent_loss(LatentBatch::from_view_pairs(std::move(latents)), cfg.temperature);
      net.zero_grad();
      tape.backward(loss);
      optimizer.step(net.parameters(), schedule.lr());
      loss_sum += loss.value().item();
      ++steps;
    }
    const double train_loss = loss_sum / std::max(steps, 1);
    double val_loss = contrastive_validation_loss(net, corpus, cfg);
    if (std::isnan(val_loss)) val_loss = train_loss;
    const double lr = schedule.lr();
    schedule.step(val_loss);
    history.push_back({epoch, "pretrain", train_loss, val_loss, lr});
    if (opt.stop_at_floor && schedule.exhausted()) break;
  }
  return history;
}

std::vector<EpochRecord> finetune(DetectorNetwork& net, const Corpus& corpus,
                                  const AugmentConfig& augment, const ContrastiveConfig& cfg,
                                  const OptimizerConfig& opt, std::uint64_t seed) {
  cfg.validate();
  opt.validate();
  if (net.head() != HeadKind::kClassifier) throw ContractViolation("finetune needs a classifier head");
  const int crop = net.config().crop_size;
  const AugmentConfig aug = with_crop(opt.augment_finetune ? augment : augment.disabled(), crop);
  const auto train = corpus.split(Split::kTrain);
  if (train.empty()) throw ContractViolation("finetune needs training images");

  Optimizer optimizer(opt.finetune.kind, opt.adam);
  PlateauScheduler schedule(opt.finetune.lr, opt.plateau_factor, opt.plateau_patience, opt.lr_floor);
  const RngStream shuffle_rng = RngStream(seed).child("finetune-shuffle");
  std::vector<EpochRecord> history;

  for (int epoch = 1; epoch <= opt.finetune.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    int steps = 0;
    for (const auto& batch :
         batches_of(shuffled(train, shuffle_rng.child(static_cast<std::uint64_t>(epoch))),
                    cfg.images_per_batch, 1)) {
      Tape tape;
      std::vector<Var> losses;
      for (const Record* r : batch) {
        RngStream rs = item_stream(seed, "finetune", r->id, epoch);
        const auto [a, b] = make_views(corpus.load(*r), aug, rs);
        losses.push_back(bce_with_logits(net.forward(tape, a), r->label));
        losses.push_back(bce_with_logits(net.forward(tape, b), r->label));
      }
      Var total = losses.front();
      for (std::size_t i = 1; i < losses.size(); ++i) total = add(total, losses[i]);
      Var loss = scale(total, 1.0 / static_cast<double>(losses.size()));
      net.zero_grad();
      tape.backward(loss);
      optimizer.step(net.parameters(), schedule.lr());
      loss_sum += loss.value().item();
      ++steps;
    }
    const double train_loss = loss_sum / std::max(steps, 1);
    double val_loss = supervised_validation_loss(net, corpus, crop);
    if (std::isnan(val_loss)) val_loss = train_loss;
    const double lr = schedule.lr();
    schedule.step(val_loss);
    history.push_back({epoch, "finetune", train_loss, val_loss, lr});
    if (opt.stop_at_floor && schedule.exhausted()) break;
  }
  return history;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "epoch,phase,train_loss,val_loss,lr\n";
  char buf[160];
  for (const EpochRecord& e : history) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g\n", e.epoch, e.phase.c_str(), e.train_loss,
                  e.val_loss, e.lr);
    os << buf;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace gandetect
