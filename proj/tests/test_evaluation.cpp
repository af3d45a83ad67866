#include "helpers.hpp"

#include "gandetect/errors.hpp"
#include "gandetect/evaluation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace gandetect {
namespace {

using testing::TempDir;

ScoreSet make_set(const std::vector<double>& reals, const std::vector<double>& fakes,
                  const std::string& family = "a") {
  ScoreSet s;
  for (std::size_t i = 0; i < reals.size(); ++i) s.entries.push_back({"r" + std::to_string(i), reals[i], 0, "real"});
  for (std::size_t i = 0; i < fakes.size(); ++i) s.entries.push_back({family + std::to_string(i), fakes[i], 1, family});
  return s;
}

// Scores drawn from a small grid so ties are frequent.
ScoreSet random_set(RngStream& rng, int max_n = 200) {
  const int n = static_cast<int>(rng.uniform_int(2, max_n));
  const int grid = static_cast<int>(rng.uniform_int(2, 40));
  ScoreSet s;
  for (int i = 0; i < n; ++i) {
    const int label = i == 0 ? 0 : i == 1 ? 1 : static_cast<int>(rng.uniform_int(0, 1));
    const double score = rng.bernoulli(0.5) ? static_cast<double>(rng.uniform_int(0, grid)) / grid : rng.uniform();
    s.entries.push_back({"x" + std::to_string(i), score, label, label ? "a" : "real"});
  }
  return s;
}

double brute_auc(const ScoreSet& s) {
  double hits = 0.0, pairs = 0.0;
  for (const auto& r : s.entries) {
    if (r.label != 0) continue;
    for (const auto& f : s.entries) {
      if (f.label != 1) continue;
      pairs += 1.0;
      hits += f.score > r.score ? 1.0 : f.score == r.score ? 0.5 : 0.0;
    }
  }
  return hits / pairs;
}

double realized_far(const ScoreSet& s, double t) {
  double above = 0.0, n = 0.0;
  for (const auto& e : s.entries) {
    if (e.label != 0) continue;
    n += 1.0;
    above += e.score > t ? 1.0 : 0.0;
  }
  return above / n;
}

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy_at(make_set({0.2}, {0.7})), 1.0);
  EXPECT_EQ(accuracy_at(make_set({0.2, 0.6}, {0.7, 0.4})), 0.5);
  // Exactly at the threshold counts as real.
  EXPECT_EQ(accuracy_at(make_set({0.5}, {0.5})), 0.5);
  EXPECT_THROW(accuracy_at(ScoreSet{}), UndefinedMetric);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(make_set({0.1, 0.2}, {0.8, 0.9})), 1.0);
  EXPECT_EQ(auc(make_set({0.8, 0.9}, {0.1, 0.2})), 0.0);
  EXPECT_EQ(auc(make_set({0.1, 0.7}, {0.5, 0.9})), 0.75);
  EXPECT_EQ(auc(make_set({0.5}, {0.5})), 0.5);
  EXPECT_THROW(auc(make_set({0.1, 0.2}, {})), UndefinedMetric);
}

TEST(Auc, EqualsPairCountingExactly) {
  RngStream rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const ScoreSet s = random_set(rng);
    EXPECT_EQ(auc(s), brute_auc(s)) << trial;
  }
}

TEST(Auc, InvariantUnderIncreasingTransforms) {
  RngStream rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreSet s = random_set(rng, 60);
    const double before = auc(s);
    for (auto& e : s.entries) e.score = std::pow(e.score, 3.0) * 0.5 + 0.1;
    EXPECT_EQ(auc(s), before);
  }
}

TEST(Roc, MonotoneFromOriginToCorner) {
  RngStream rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto curve = roc_curve(random_set(rng, 80));
    ASSERT_GE(curve.size(), 2U);
    EXPECT_EQ(curve.front().false_alarm, 0.0);
    EXPECT_EQ(curve.front().detection, 0.0);
    EXPECT_EQ(curve.back().false_alarm, 1.0);
    EXPECT_EQ(curve.back().detection, 1.0);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      EXPECT_GE(curve[i].false_alarm, curve[i - 1].false_alarm);
      EXPECT_GE(curve[i].detection, curve[i - 1].detection);
    }
  }
}

TEST(PdAtFar, Examples) {
  std::vector<double> reals;
  for (int i = 1; i <= 10; ++i) reals.push_back(i / 10.0);
  const PdAtFar r = pd_at_far(make_set(reals, {0.95, 0.5}), 0.10);
  EXPECT_DOUBLE_EQ(r.threshold, 0.9);
  EXPECT_EQ(r.detection, 0.5);
  EXPECT_EQ(r.realized_far, 0.1);
  EXPECT_EQ(pd_at_far(make_set({0.1, 0.3}, {0.8, 0.9}), 0.01).detection, 1.0);
  EXPECT_EQ(pd_at_far(make_set({0.5, 0.6}, {0.1, 0.2}), 0.5).detection, 0.0);
  EXPECT_THROW(pd_at_far(make_set({0.5}, {0.1}), 0.0), ContractViolation);
  EXPECT_THROW(pd_at_far(make_set({}, {0.1}), 0.1), UndefinedMetric);
}

TEST(PdAtFar, ContractOnRandomSets) {
  RngStream rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const ScoreSet s = random_set(rng);
    for (double far : {0.01, 0.1, 0.37}) {
      const PdAtFar r = pd_at_far(s, far);
      EXPECT_LE(realized_far(s, r.threshold), far);
      EXPECT_EQ(r.realized_far, realized_far(s, r.threshold));
      // No smaller real score satisfies the constraint.
      for (const auto& e : s.entries) {
        if (e.label == 0 && e.score < r.threshold) {
          EXPECT_GT(realized_far(s, e.score), far);
        }
      }
    }
    EXPECT_GE(pd_at_far(s, 0.10).detection, pd_at_far(s, 0.01).detection);
  }
}

TEST(Histogram, Examples) {
  ScoreSet half = make_set(std::vector<double>(7, 0.5), {});
  const Histogram h = histogram(half, 10);
  ASSERT_EQ(h.groups.size(), 1U);
  for (int b = 0; b < 10; ++b) EXPECT_EQ(h.groups[0].counts[b], b == 5 ? 7 : 0);

  std::vector<double> grid;
  for (int i = 0; i < 100; ++i) grid.push_back((i + 0.5) / 100.0);
  const Histogram uniform = histogram(make_set(grid, {}), 10);
  for (auto c : uniform.groups[0].counts) EXPECT_EQ(c, 10);

  const Histogram edges = histogram(make_set({0.0, 1.0}, {}), 4);
  EXPECT_EQ(edges.groups[0].counts, (std::vector<std::int64_t>{1, 0, 0, 1}));
  EXPECT_THROW(histogram(half, 1), ContractViolation);
}

TEST(Histogram, GroupsSumToCardinality) {
  RngStream rng(5);
  ScoreSet s = random_set(rng, 150);
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    if (s.entries[i].label == 1 && i % 2 == 0) s.entries[i].family = "b";
  }
  const Histogram h = histogram(s, 13);
  std::map<std::pair<int, std::string>, std::int64_t> sizes;
  for (const auto& e : s.entries) ++sizes[{e.label, e.family}];
  ASSERT_EQ(h.groups.size(), sizes.size());
  for (const auto& g : h.groups) {
    std::int64_t total = 0;
    for (auto c : g.counts) total += c;
    EXPECT_EQ(total, (sizes[{g.label, g.family}]));
  }
}

TEST(ThresholdSpread, Examples) {
  ScoreSet s = make_set({0.1, 0.1, 0.1}, {0.9, 0.9}, "a");
  for (const auto& e : make_set({}, {0.6, 0.6}, "b").entries) s.entries.push_back(e);
  const ThresholdSpread t = per_family_threshold_spread(s);
  EXPECT_EQ(t.thresholds.at("a"), 0.1);
  EXPECT_EQ(t.thresholds.at("b"), 0.1);
  EXPECT_EQ(t.spread, 0.0);
  EXPECT_EQ(per_family_threshold_spread(make_set({0.1, 0.4}, {0.3, 0.8})).spread, 0.0);

  ScoreSet same = make_set({0.2, 0.5}, {0.4, 0.7}, "a");
  for (const auto& e : make_set({}, {0.4, 0.7}, "b").entries) same.entries.push_back(e);
  EXPECT_EQ(per_family_threshold_spread(same).spread, 0.0);

  ScoreSet apart = make_set({0.1, 0.2}, {0.3}, "a");
  for (const auto& e : make_set({}, {0.15}, "b").entries) apart.entries.push_back(e);
  // Family b: t = 0.1 keeps one real and catches the fake (0.75); t = 0.2 only gets the reals (0.5).
  const ThresholdSpread u = per_family_threshold_spread(apart);
  EXPECT_EQ(u.thresholds.at("a"), 0.2);
  EXPECT_EQ(u.thresholds.at("b"), 0.1);
  EXPECT_EQ(u.balanced_accuracy.at("b"), 0.75);
  EXPECT_DOUBLE_EQ(u.spread, 0.1);
}

TEST(ThresholdSpread, MatchesExhaustiveSearch) {
  RngStream rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const ScoreSet s = random_set(rng, 60);
    const ThresholdSpread t = per_family_threshold_spread(s);
    std::set<double> candidates;
    for (const auto& e : s.entries) candidates.insert(e.score);
    double best = -1.0, best_t = 0.0;
    for (double c : candidates) {
      const double b = balanced_accuracy_at(s, c);
      if (b > best) {
        best = b;
        best_t = c;
      }
    }
    EXPECT_EQ(t.thresholds.at("a"), best_t);
    EXPECT_EQ(t.balanced_accuracy.at("a"), best);
  }
}

TEST(ThresholdSpread, BalancedSetsPeakAccuracyAtSearchedThreshold) {
  RngStream rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> reals, fakes;
    for (int i = 0; i < 20; ++i) {
      reals.push_back(rng.uniform(0.0, 0.7));
      fakes.push_back(rng.uniform(0.3, 1.0));
    }
    const ScoreSet s = make_set(reals, fakes);
    double best = 0.0;
    for (const auto& e : s.entries) best = std::max(best, accuracy_at(s, e.score));
    EXPECT_EQ(accuracy_at(s, per_family_threshold_spread(s).thresholds.at("a")), best);
  }
}

TEST(Families, SubsetsAndAverages) {
  ScoreSet s = make_set({0.1, 0.2}, {0.9}, "a");
  for (const auto& e : make_set({}, {0.15, 0.3, 0.05}, "b").entries) s.entries.push_back(e);
  EXPECT_EQ(fake_families(s), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(family_subset(s, "b").entries.size(), 5U);
  const auto fam = per_family_metrics(s);
  ASSERT_EQ(fam.size(), 2U);
  EXPECT_EQ(fam[0].auc, 1.0);
  EXPECT_EQ(fam[1].reals, 2U);
  EXPECT_EQ(fam[1].fakes, 3U);
  EXPECT_DOUBLE_EQ(fam[1].auc, brute_auc(family_subset(s, "b")));
  const FamilyMetrics avg = average_metrics(fam);
  EXPECT_EQ(avg.family, "average");
  EXPECT_DOUBLE_EQ(avg.auc, (fam[0].auc + fam[1].auc) / 2.0);
  EXPECT_DOUBLE_EQ(avg.accuracy, (fam[0].accuracy + fam[1].accuracy) / 2.0);
}

// A tiny corpus and classifier shared by the scoring tests.
class ScoringFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("scoring");
    CorpusSpec spec = CorpusSpec::defaults();
    spec.counts = {4, 2, 12};
    spec.scenes.size = 32;
    build_corpus(spec, dir_->path(), RngStream(3));
    DetectorConfig c;
    c.stem_channels = 4;
    c.block_widths = {4, 6};
    c.projection_hidden = 8;
    c.projection_latent = 4;
    c.crop_size = 24;
    RngStream rng(4);
    net_ = new DetectorNetwork(swap_head(build_detector(c, rng), HeadKind::kClassifier, rng));
  }
  static void TearDownTestSuite() {
    delete net_;
    delete dir_;
  }
  static Corpus corpus() { return load_manifest(dir_->path() / kManifestName); }

  static TempDir* dir_;
  static DetectorNetwork* net_;
};
TempDir* ScoringFixture::dir_ = nullptr;
DetectorNetwork* ScoringFixture::net_ = nullptr;

TEST_F(ScoringFixture, ZeroHeadScoresOneHalf) {
  DetectorNetwork zero = *net_;
  zero.parameter("head.fc.weight").value.data().setZero();
  const ScoreSet s = score_dataset(zero, corpus(), Split::kTest);
  ASSERT_EQ(s.entries.size(), 12U);
  for (const auto& e : s.entries) EXPECT_EQ(e.score, 1.0 / (1.0 + std::exp(-zero.parameter("head.fc.bias").value[0])));
}

TEST_F(ScoringFixture, DeterministicAndOnlyTouchesTheSplit) {
  Corpus c = corpus();
  std::set<Split> touched;
  c.set_access_observer([&](const Record& r) { touched.insert(r.split); });
  const ScoreSet a = score_dataset(*net_, c, Split::kTest);
  EXPECT_EQ(a, score_dataset(*net_, c, Split::kTest));
  EXPECT_EQ(touched, std::set<Split>{Split::kTest});
  a.validate();
}

TEST_F(ScoringFixture, RescaleRunsAtReducedSizeAndTooSmallItemsAreReported) {
  const ScoreSet half = score_dataset(*net_, corpus(), Split::kTest, Perturbation::rescale(0.5));
  EXPECT_EQ(half.entries.size(), 12U);
  EXPECT_TRUE(half.errors.empty());
  half.validate();
  // 32 * 0.3 rounds to 10, below the 13 pixel floor.
  const ScoreSet tiny = score_dataset(*net_, corpus(), Split::kTest, Perturbation::rescale(0.3));
  EXPECT_TRUE(tiny.entries.empty());
  EXPECT_EQ(tiny.errors.size(), 12U);
}

TEST_F(ScoringFixture, SweepCellsAreIndependent) {
  const Corpus c = corpus();
  const std::vector<Perturbation> grid{Perturbation::jpeg(50), Perturbation::rescale(0.7), Perturbation::rescale(0.3)};
  const auto forward = robustness_sweep(*net_, c, Split::kTest, grid);
  ASSERT_EQ(forward.size(), 4U);
  EXPECT_EQ(forward[0].perturbation, "none");
  const ScoreSet plain = score_dataset(*net_, c, Split::kTest);
  EXPECT_EQ(forward[0].accuracy, accuracy_at(plain));
  EXPECT_EQ(forward[0].auc, auc(plain));
  EXPECT_FALSE(forward[3].ok);
  EXPECT_FALSE(forward[3].error.empty());

  const auto backward = robustness_sweep(*net_, c, Split::kTest,
                                         {Perturbation::rescale(0.3), Perturbation::rescale(0.7),
                                          Perturbation::none(), Perturbation::jpeg(50)});
  auto find = [&](const std::string& label) {
    return *std::find_if(backward.begin(), backward.end(), [&](const SweepCell& s) { return s.perturbation == label; });
  };
  for (const auto& cell : forward) EXPECT_EQ(find(cell.perturbation), cell) << cell.perturbation;
}

MetricsReport sample_report() {
  MetricsReport r;
  r.seed = 42;
  r.config = {{"a", 1}, {"b", {1.5, 2}}};
  const ScoreSet s = make_set({0.1, 0.35, 0.2}, {0.9, 0.3, 1.0 / 3.0});
  r.families = per_family_metrics(s);
  r.average = average_metrics(r.families);
  r.spread = per_family_threshold_spread(s);
  r.score_histogram = histogram(s, 5);
  r.sweep = {{"none", true, "", 6, 0, 0.5, 0.75}, {"rescale_0.1", false, "all failed", 0, 6, 0.0, 0.0}};
  r.errors = {{"x1", "too small, \"quoted\""}};
  return r;
}

TEST(Report, JsonAndFilesRoundTrip) {
  TempDir dir("report");
  const MetricsReport r = sample_report();
  EXPECT_EQ(report_from_json(report_to_json(r)), r);
  const auto paths = write_report(r, dir.path());
  EXPECT_EQ(read_report(dir.path()), r);
  for (const auto& p : paths) EXPECT_TRUE(std::filesystem::exists(p)) << p;

  std::ifstream csv(dir.path() / "metrics.csv");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 1 + static_cast<int>(r.families.size()) + 1);
}

TEST(Report, SameReportSameBytes) {
  TempDir a("report_a"), b("report_b");
  const MetricsReport r = sample_report();
  const auto pa = write_report(r, a.path());
  write_report(r, b.path());
  for (const auto& p : pa) {
    EXPECT_EQ(testing::read_bytes(p), testing::read_bytes(b.path() / p.filename())) << p.filename();
  }
}

TEST(Report, RejectsOtherSchemaVersions) {
  nlohmann::json j = report_to_json(sample_report());
  j["schema_version"] = 99;
  EXPECT_THROW(report_from_json(j), LoadError);
}

TEST(Report, NumbersRoundTripShortest) {
  for (double v : {0.1, 1.0 / 3.0, 0.0, 1.0, 0.95, 1e-17}) EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(1.0), "1");
}

TEST(Report, SummaryShowsPercentages) {
  const std::string text = format_summary(sample_report());
  EXPECT_NE(text.find("average"), std::string::npos);
  EXPECT_NE(text.find("%"), std::string::npos) << text;
}

}  // namespace
}  // namespace gandetect
