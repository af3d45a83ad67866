#include "helpers.hpp"

#include "../tools/cli.hpp"

#include "gandetect/config.hpp"
#include "gandetect/evaluation.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

namespace gandetect {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using testing::read_bytes;

RunConfig toy_config() {
  RunConfig c;
  c.detector.stem_channels = 4;
  c.detector.block_widths = {4, 6};
  c.detector.projection_hidden = 8;
  c.detector.projection_latent = 4;
  c.detector.crop_size = 24;
  c.augment.crop_size = 24;
  c.contrastive.images_per_batch = 4;
  c.optimizer.pretrain.max_epochs = 1;
  c.optimizer.finetune.max_epochs = 1;
  c.corpus.counts = {8, 4, 12};
  c.corpus.scenes.size = 32;
  c.metrics.jpeg_qualities = {50};
  c.metrics.rescale_factors = {0.7, 0.3};
  return c;
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { write_config(toy_config()); }
  void write_config(const RunConfig& c, const std::string& name = "run.json") {
    std::ofstream(dir.path() / name) << config_to_json(c).dump(2);
  }
  std::vector<std::string> args(const std::string& command, const std::string& out = "out") {
    return {command, "--config", (dir.path() / "run.json").string(), "--seed", "7", "--out",
            (dir.path() / out).string()};
  }
  fs::path out(const std::string& rel = "") const { return dir.path() / "out" / rel; }

  TempDir dir{"cli"};
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({}).code, cli::kExitUsage);
  const Result unknown = cli({"train", "--config", "x", "--out", "y"});
  EXPECT_EQ(unknown.code, cli::kExitUsage);
  EXPECT_NE(unknown.err.find("gen-data"), std::string::npos);
  EXPECT_EQ(cli({"gen-data", "--out", "y"}).code, cli::kExitUsage);
  EXPECT_EQ(cli({"evaluate", "--config", "x", "--out", "y", "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, SeedIsMandatory) {
  const Result r = cli({"gen-data", "--config", (dir.path() / "run.json").string(), "--out", out().string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("seed"), std::string::npos);

  RunConfig seeded = toy_config();
  seeded.seed = 5;
  write_config(seeded, "seeded.json");
  EXPECT_EQ(cli({"gen-data", "--config", (dir.path() / "seeded.json").string(), "--out", out().string()}).code,
            cli::kExitOk);
}

TEST_F(CliTest, BadConfigFails) {
  std::ofstream(dir.path() / "bad.json") << "{ nope";
  const Result r = cli({"gen-data", "--config", (dir.path() / "bad.json").string(), "--seed", "1", "--out",
                        out().string()});
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("bad.json"), std::string::npos);
}

TEST_F(CliTest, FullChainWritesEveryArtifact) {
  for (const std::string command : {"gen-data", "pretrain", "finetune", "evaluate", "sweep", "report"}) {
    const Result r = cli(args(command));
    ASSERT_EQ(r.code, cli::kExitOk) << command << ": " << r.err;
  }
  EXPECT_TRUE(fs::exists(out("data/manifest.jsonl")));
  EXPECT_TRUE(fs::exists(out("pretrain/checkpoint.gdck")));
  EXPECT_TRUE(fs::exists(out("pretrain/history.csv")));
  EXPECT_TRUE(fs::exists(out("finetune/checkpoint.gdck")));
  for (const char* f : {"report.json", "metrics.csv", "histogram.csv", "sweep.csv", "summary.txt"}) {
    EXPECT_TRUE(fs::exists(out(std::string("report/") + f))) << f;
  }
  EXPECT_FALSE(fs::exists(out(".lock")));

  const MetricsReport report = read_report(out("report"));
  EXPECT_EQ(report.seed, 7U);
  EXPECT_EQ(report.families.size(), 3U);
  ASSERT_TRUE(report.average.has_value());
  ASSERT_EQ(report.sweep.size(), 4U);
  EXPECT_EQ(report.sweep[0].perturbation, "none");
  // 32 * 0.3 is below the network floor, so that cell fails without stopping the sweep.
  EXPECT_FALSE(report.sweep[3].ok);
  EXPECT_EQ(report.config.at("seed"), 7);

  const auto manifest = nlohmann::json::parse(read_bytes(out("evaluate/run_manifest.json")));
  EXPECT_EQ(manifest.at("command"), "evaluate");
  EXPECT_EQ(manifest.at("status"), "complete");
  EXPECT_EQ(manifest.at("seed"), 7);
  RunConfig echoed = toy_config();
  echoed.seed = 7;
  EXPECT_EQ(manifest.at("config_hash"), config_hash(echoed));
  EXPECT_EQ(manifest.at("artifacts"),
            (nlohmann::json{"histogram.csv", "metrics.csv", "report.json", "sweep.csv"}));
  EXPECT_TRUE(fs::exists(out("data/run_manifest.json")));
}

TEST_F(CliTest, SameSeedSameReportBytes) {
  for (const char* o : {"a", "b"}) {
    for (const std::string command : {"gen-data", "pretrain", "finetune", "evaluate", "sweep", "report"}) {
      ASSERT_EQ(cli(args(command, o)).code, cli::kExitOk) << command;
    }
  }
  for (const char* f : {"report.json", "metrics.csv", "histogram.csv", "sweep.csv", "summary.txt"}) {
    const std::string rel = std::string("report/") + f;
    EXPECT_EQ(read_bytes(dir.path() / "a" / rel), read_bytes(dir.path() / "b" / rel)) << f;
  }
  EXPECT_EQ(read_bytes(dir.path() / "a/finetune/checkpoint.gdck"),
            read_bytes(dir.path() / "b/finetune/checkpoint.gdck"));
}

TEST_F(CliTest, MismatchedCheckpointNamesTheField) {
  ASSERT_EQ(cli(args("gen-data")).code, cli::kExitOk);
  ASSERT_EQ(cli(args("pretrain")).code, cli::kExitOk);
  RunConfig other = toy_config();
  other.detector.stem_channels = 5;
  write_config(other);
  const Result r = cli(args("finetune"));
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("stem_channels"), std::string::npos) << r.err;
  const auto manifest = nlohmann::json::parse(read_bytes(out("finetune/run_manifest.json")));
  EXPECT_EQ(manifest.at("status"), "failed");
}

TEST_F(CliTest, MissingInputsFailCleanly) {
  const Result r = cli(args("evaluate"));
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(cli(args("report")).code, cli::kExitFailure);
}

TEST_F(CliTest, LockedOutputIsRefused) {
  fs::create_directories(out());
  std::ofstream(out(".lock")) << "";
  const Result r = cli(args("gen-data"));
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("locked"), std::string::npos);
  EXPECT_TRUE(fs::exists(out(".lock")));
}

TEST_F(CliTest, FinetuneFromScratchSkipsPretraining) {
  RunConfig c = toy_config();
  c.finetune_from_pretrained = false;
  write_config(c);
  ASSERT_EQ(cli(args("gen-data")).code, cli::kExitOk);
  const Result r = cli(args("finetune"));
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_FALSE(fs::exists(out("pretrain")));
}

TEST(ExampleConfig, LoadsAndValidates) {
  const RunConfig c = load_run_config(fs::path(GANDETECT_SOURCE_DIR) / "configs" / "toy.json");
  EXPECT_EQ(c.seed, 1U);
  EXPECT_EQ(c.detector.crop_size, c.augment.crop_size);
  EXPECT_EQ(c.corpus.families.size(), 3U);
  EXPECT_EQ(c.optimizer.plateau_patience, 100);
}

}  // namespace
}  // namespace gandetect
