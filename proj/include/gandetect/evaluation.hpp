#pragma once

#include "gandetect/augment.hpp"
#include "gandetect/datagen.hpp"
#include "gandetect/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gandetect {

struct ScoreEntry {
  std::string id;
  double score = 0.0;
  int label = 0;
  std::string family;

  bool operator==(const ScoreEntry&) const = default;
};

/// Item that could not be scored, e.g. too small after a rescale.
struct ItemError {
  std::string id;
  std::string message;

  bool operator==(const ItemError&) const = default;
};

struct ScoreSet {
  std::vector<ScoreEntry> entries;
  std::vector<ItemError> errors;

  std::size_t count(int label) const;
  /// Scores must be finite and inside [0, 1]; labels 0 or 1.
  void validate() const;
  bool operator==(const ScoreSet&) const = default;
};

/// Scores every record of a split at its native resolution, after the
/// optional perturbation. Items that fail are listed in `errors`.
ScoreSet score_dataset(const DetectorNetwork& net, const Corpus& corpus, Split split,
                       const Perturbation& perturbation = Perturbation::none());

/// Fraction of fakes with score > t plus reals with score <= t.
double accuracy_at(const ScoreSet& scores, double threshold = 0.5);

/// Mann-Whitney statistic via midranks; ties count one half.
double auc(const ScoreSet& scores);

struct RocPoint {
  double false_alarm = 0.0;
  double detection = 0.0;
};

/// Sweeps every distinct score from high to low, starting at (0, 0) and ending at (1, 1).
std::vector<RocPoint> roc_curve(const ScoreSet& scores);

struct PdAtFar {
  double threshold = 0.0;
  double detection = 0.0;
  double realized_far = 0.0;
};

/// Smallest real score t with (#reals > t) / n_real <= far; detection counts fakes > t.
PdAtFar pd_at_far(const ScoreSet& scores, double far);

struct HistogramGroup {
  int label = 0;
  std::string family;
  std::vector<std::int64_t> counts;

  bool operator==(const HistogramGroup&) const = default;
};

/// Equal-width bins over [0, 1], half-open except the last which includes 1.
struct Histogram {
  int bins = 0;
  std::vector<HistogramGroup> groups;

  bool operator==(const Histogram&) const = default;
};

Histogram histogram(const ScoreSet& scores, int bins);

struct ThresholdSpread {
  /// Balanced-accuracy-optimal threshold per fake family.
  std::map<std::string, double> thresholds;
  std::map<std::string, double> balanced_accuracy;
  /// Families without fakes.
  std::vector<std::string> skipped;
  double spread = 0.0;

  bool operator==(const ThresholdSpread&) const = default;
};

/// Balanced accuracy of the rule "fake iff score > t".
double balanced_accuracy_at(const ScoreSet& scores, double threshold);

/// Per family: every real plus that family's fakes, best threshold among the
/// distinct scores, lowest on ties.
ThresholdSpread per_family_threshold_spread(const ScoreSet& scores);

/// Fake families present in the set, sorted.
std::vector<std::string> fake_families(const ScoreSet& scores);
/// All reals plus the fakes of one family.
ScoreSet family_subset(const ScoreSet& scores, const std::string& family);

struct FamilyMetrics {
  std::string family;
  std::size_t reals = 0;
  std::size_t fakes = 0;
  double accuracy = 0.0;
  double auc = 0.0;
  double pd_at_1 = 0.0;
  double pd_at_10 = 0.0;

  bool operator==(const FamilyMetrics&) const = default;
};

FamilyMetrics compute_metrics(const ScoreSet& scores, const std::string& family);
std::vector<FamilyMetrics> per_family_metrics(const ScoreSet& scores);
/// Unweighted mean over families.
FamilyMetrics average_metrics(const std::vector<FamilyMetrics>& families);

struct SweepCell {
  std::string perturbation;
  bool ok = true;
  std::string error;
  std::size_t scored = 0;
  std::size_t failed_items = 0;
  double accuracy = 0.0;
  double auc = 0.0;

  bool operator==(const SweepCell&) const = default;
};

/// One scoring pass per perturbation; `none` is added up front when missing.
std::vector<SweepCell> robustness_sweep(const DetectorNetwork& net, const Corpus& corpus,
                                        Split split, const std::vector<Perturbation>& grid);

inline constexpr int kReportSchemaVersion = 1;

struct MetricsReport {
  int schema_version = kReportSchemaVersion;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<FamilyMetrics> families;
  std::optional<FamilyMetrics> average;
  std::optional<ThresholdSpread> spread;
  std::optional<Histogram> score_histogram;
  std::vector<SweepCell> sweep;
  std::vector<ItemError> errors;

  bool operator==(const MetricsReport&) const = default;
};

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

/// report.json plus metrics.csv, histogram.csv and sweep.csv under out_dir.
/// Returns the written paths. Output bytes depend only on the report.
std::vector<std::filesystem::path> write_report(const MetricsReport& report,
                                                const std::filesystem::path& out_dir);
MetricsReport read_report(const std::filesystem::path& out_dir);

/// Plain-text table with metrics scaled to percent.
std::string format_summary(const MetricsReport& report);

/// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace gandetect
