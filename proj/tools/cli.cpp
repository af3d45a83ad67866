#include "cli.hpp"

#include "gandetect/config.hpp"
#include "gandetect/errors.hpp"
#include "gandetect/evaluation.hpp"
#include "gandetect/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

namespace gandetect::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCheckpointName = "checkpoint.gdck";
constexpr const char* kRunManifestName = "run_manifest.json";

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
};

struct Context {
  std::string command;
  Options options;
  RunConfig config;
  std::uint64_t seed = 0;
  fs::path out;
  std::ostream& log;

  fs::path data_dir() const { return config.data_dir.empty() ? out / "data" : fs::path(config.data_dir); }
  fs::path stage_dir() const { return out / command; }
};

// Exclusive marker that keeps two commands from writing one output tree.
class OutputLock {
 public:
  explicit OutputLock(fs::path path) : path_(std::move(path)) {
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (f == nullptr) {
      throw IoError("output directory is locked by another command (" + path_.string() + ")");
    }
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

std::vector<std::string> list_artifacts(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (rel != kRunManifestName) out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_run_manifest(const Context& ctx, const fs::path& dir, const std::string& status,
                        const std::string& error) {
  nlohmann::json args = {{"config", ctx.options.config_path}, {"seed", ctx.seed}, {"out", ctx.options.out}};
  if (!ctx.options.checkpoint.empty()) args["checkpoint"] = ctx.options.checkpoint;
  RunConfig echoed = ctx.config;
  echoed.seed = ctx.seed;
  nlohmann::json j = {{"command", ctx.command},
                      {"arguments", args},
                      {"seed", ctx.seed},
                      {"config_hash", config_hash(echoed)},
                      {"config", config_to_json(echoed)},
                      {"status", status},
                      {"artifacts", list_artifacts(dir)}};
  if (!error.empty()) j["error"] = error;
  fs::create_directories(dir);
  std::ofstream os(dir / kRunManifestName, std::ios::binary | std::ios::trunc);
  os << j.dump(2) << '\n';
  if (!os) throw IoError("cannot write run manifest in " + dir.string());
}

Corpus open_corpus(const Context& ctx) { return load_manifest(ctx.data_dir() / kManifestName); }

DetectorNetwork load_matching_checkpoint(const Context& ctx, const fs::path& path) {
  DetectorNetwork net = load_checkpoint(path);
  if (const auto field = first_mismatch(net.config(), ctx.config.detector)) {
    throw ContractViolation("checkpoint " + path.string() + " does not match the run config: field '" +
                            *field + "' differs");
  }
  return net;
}

fs::path checkpoint_or(const Context& ctx, const fs::path& fallback) {
  return ctx.options.checkpoint.empty() ? fallback : fs::path(ctx.options.checkpoint);
}

void cmd_gen_data(Context& ctx) {
  const fs::path dir = ctx.data_dir();
  const auto manifest = build_corpus(ctx.config.corpus, dir, RngStream(ctx.seed).child("corpus"));
  ctx.log << "wrote " << manifest.records.size() << " images to " << dir.string() << '\n';
}

void cmd_pretrain(Context& ctx) {
  const Corpus corpus = open_corpus(ctx);
  RngStream init = RngStream(ctx.seed).child("init");
  DetectorNetwork net = build_detector(ctx.config.detector, init);
  const auto history =
      pretrain(net, corpus, ctx.config.augment, ctx.config.contrastive, ctx.config.optimizer, ctx.seed);
  fs::create_directories(ctx.stage_dir());
  write_history_csv(history, ctx.stage_dir() / "history.csv");
  save_checkpoint(net, ctx.stage_dir() / kCheckpointName);
  ctx.log << "pretrained for " << history.size() << " epochs\n";
}

void cmd_finetune(Context& ctx) {
  const Corpus corpus = open_corpus(ctx);
  DetectorNetwork net;
  if (!ctx.options.checkpoint.empty() || ctx.config.finetune_from_pretrained) {
    net = load_matching_checkpoint(ctx, checkpoint_or(ctx, ctx.out / "pretrain" / kCheckpointName));
  } else {
    RngStream init = RngStream(ctx.seed).child("init");
    net = build_detector(ctx.config.detector, init);
  }
  RngStream head = RngStream(ctx.seed).child("head");
  net = swap_head(std::move(net), HeadKind::kClassifier, head);
  const auto history =
      finetune(net, corpus, ctx.config.augment, ctx.config.contrastive, ctx.config.optimizer, ctx.seed);
  fs::create_directories(ctx.stage_dir());
  write_history_csv(history, ctx.stage_dir() / "history.csv");
  save_checkpoint(net, ctx.stage_dir() / kCheckpointName);
  ctx.log << "fine-tuned for " << history.size() << " epochs\n";
}

MetricsReport base_report(const Context& ctx) {
  MetricsReport report;
  report.seed = ctx.seed;
  RunConfig echoed = ctx.config;
  echoed.seed = ctx.seed;
  report.config = config_to_json(echoed);
  return report;
}

void cmd_evaluate(Context& ctx) {
  const Corpus corpus = open_corpus(ctx);
  const DetectorNetwork net =
      load_matching_checkpoint(ctx, checkpoint_or(ctx, ctx.out / "finetune" / kCheckpointName));
  const ScoreSet scores = score_dataset(net, corpus, Split::kTest);
  MetricsReport report = base_report(ctx);
  report.families = per_family_metrics(scores);
  report.average = average_metrics(report.families);
  report.spread = per_family_threshold_spread(scores);
  report.score_histogram = histogram(scores, ctx.config.metrics.histogram_bins);
  report.errors = scores.errors;
  write_report(report, ctx.stage_dir());
  ctx.log << format_summary(report);
}

void cmd_sweep(Context& ctx) {
  const Corpus corpus = open_corpus(ctx);
  const DetectorNetwork net =
      load_matching_checkpoint(ctx, checkpoint_or(ctx, ctx.out / "finetune" / kCheckpointName));
  MetricsReport report = base_report(ctx);
  report.sweep = robustness_sweep(net, corpus, Split::kTest, ctx.config.metrics.perturbations());
  write_report(report, ctx.stage_dir());
  ctx.log << format_summary(report);
}

void cmd_report(Context& ctx) {
  MetricsReport report = read_report(ctx.out / "evaluate");
  if (fs::exists(ctx.out / "sweep" / "report.json")) report.sweep = read_report(ctx.out / "sweep").sweep;
  write_report(report, ctx.stage_dir());
  const std::string summary = format_summary(report);
  std::ofstream os(ctx.stage_dir() / "summary.txt", std::ios::binary | std::ios::trunc);
  os << summary;
  if (!os) throw IoError("cannot write summary");
  ctx.log << summary;
}

const std::map<std::string, std::function<void(Context&)>>& commands() {
  static const std::map<std::string, std::function<void(Context&)>> table{
      {"gen-data", cmd_gen_data}, {"pretrain", cmd_pretrain}, {"finetune", cmd_finetune},
      {"evaluate", cmd_evaluate}, {"sweep", cmd_sweep},       {"report", cmd_report}};
  return table;
}

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> table{
      {"gen-data", "Generate the synthetic corpus"},
      {"pretrain", "Contrastive pretraining with the projection head"},
      {"finetune", "Supervised fine-tuning of the whole network"},
      {"evaluate", "Score the test split and compute per-family metrics"},
      {"sweep", "Robustness sweep over JPEG quality and rescaling"},
      {"report", "Merge evaluation and sweep results into a summary"}};
  return table;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detector for synthetic images: data generation, training, evaluation", "gandetect"};
  app.require_subcommand(1, 1);
  Options opts;
  for (const auto& [name, text] : descriptions()) {
    CLI::App* sub = app.add_subcommand(name, text);
    sub->add_option("--config", opts.config_path, "Run configuration (JSON)")->required();
    sub->add_option("--seed", opts.seed, "Global seed; overrides the config");
    sub->add_option("--out", opts.out, "Output directory")->required();
    if (name == "finetune" || name == "evaluate" || name == "sweep") {
      sub->add_option("--checkpoint", opts.checkpoint, "Checkpoint to start from");
    }
  }

  std::vector<std::string> argv_store{"gandetect"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  RunConfig config;
  try {
    config = load_run_config(opts.config_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  if (opts.seed) config.seed = opts.seed;
  if (!config.seed) {
    err << "error: a seed is required (--seed or \"seed\" in the config)\n";
    return kExitUsage;
  }

  Context ctx{command, opts, config, *config.seed, fs::path(opts.out), out};
  const fs::path manifest_dir = command == "gen-data" ? ctx.data_dir() : ctx.stage_dir();
  try {
    fs::create_directories(ctx.out);
    OutputLock lock(ctx.out / ".lock");
    try {
      commands().at(command)(ctx);
      write_run_manifest(ctx, manifest_dir, "complete", "");
    } catch (const std::exception& e) {
      write_run_manifest(ctx, manifest_dir, "failed", e.what());
      throw;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace gandetect::cli
