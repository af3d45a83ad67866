#include "gandetect/evaluation.hpp"

#include "gandetect/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gandetect {

namespace {

void require_both_classes(const ScoreSet& s, const char* what) {
  if (s.count(0) == 0 || s.count(1) == 0) {
    throw UndefinedMetric(std::string(what) + " needs at least one real and one fake score");
  }
}

std::vector<double> scores_of(const ScoreSet& s, int label) {
  std::vector<double> out;
  for (const ScoreEntry& e : s.entries) {
    if (e.label == label) out.push_back(e.score);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Number of sorted values strictly greater than t.
std::size_t count_above(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t));
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

nlohmann::json metrics_json(const FamilyMetrics& m) {
  return {{"family", m.family}, {"reals", m.reals},   {"fakes", m.fakes},
          {"accuracy", m.accuracy}, {"auc", m.auc}, {"pd_at_1", m.pd_at_1},
          {"pd_at_10", m.pd_at_10}};
}

FamilyMetrics metrics_from(const nlohmann::json& j) {
  FamilyMetrics m;
  m.family = j.at("family").get<std::string>();
  m.reals = j.at("reals").get<std::size_t>();
  m.fakes = j.at("fakes").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.auc = j.at("auc").get<double>();
  m.pd_at_1 = j.at("pd_at_1").get<double>();
  m.pd_at_10 = j.at("pd_at_10").get<double>();
  return m;
}

}  // namespace

std::size_t ScoreSet::count(int label) const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                [&](const ScoreEntry& e) { return e.label == label; }));
}

void ScoreSet::validate() const {
  for (const ScoreEntry& e : entries) {
    if (!std::isfinite(e.score) || e.score < 0.0 || e.score > 1.0) {
      throw ContractViolation("score for " + e.id + " is not a finite value in [0, 1]");
    }
    if (e.label != 0 && e.label != 1) throw ContractViolation("label for " + e.id + " must be 0 or 1");
  }
}

ScoreSet score_dataset(const DetectorNetwork& net, const Corpus& corpus, Split split,
                       const Perturbation& perturbation) {
  if (net.head() != HeadKind::kClassifier) throw ContractViolation("scoring needs a classifier head");
  ScoreSet out;
  for (const Record* r : corpus.split(split)) {
    Image img = corpus.load(*r);
    try {
      img = apply_perturbation(img, perturbation);
      out.entries.push_back({r->id, classify(net, img), r->label, r->family});
    } catch (const TooSmallInput& e) {
      out.errors.push_back({r->id, e.what()});
    } catch (const ContractViolation& e) {
      // Perturbations that collapse the image, e.g. a tiny rescale factor.
      out.errors.push_back({r->id, e.what()});
    }
  }
  return out;
}

double accuracy_at(const ScoreSet& scores, double threshold) {
  if (scores.entries.empty()) throw UndefinedMetric("accuracy of an empty score set");
  std::size_t correct = 0;
  for (const ScoreEntry& e : scores.entries) {
    const bool says_fake = e.score > threshold;
    if (says_fake == (e.label == 1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.entries.size());
}

double auc(const ScoreSet& scores) {
  require_both_classes(scores, "AUC");
  std::vector<std::pair<double, int>> all;
  all.reserve(scores.entries.size());
  for (const ScoreEntry& e : scores.entries) all.emplace_back(e.score, e.label);
  std::sort(all.begin(), all.end());

  // Twice the rank sum of the fakes, with tied groups sharing their mean rank.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t fakes = 0;
    while (j < all.size() && all[j].first == all[i].first) fakes += static_cast<std::uint64_t>(all[j++].second);
    const std::uint64_t lo = i + 1;
    const std::uint64_t hi = j;
    twice_rank_sum += fakes * (lo + hi);
    i = j;
  }
  const std::uint64_t nf = scores.count(1);
  const std::uint64_t nr = scores.count(0);
  const std::uint64_t twice_u = twice_rank_sum - nf * (nf + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * nr * nf);
}

std::vector<RocPoint> roc_curve(const ScoreSet& scores) {
  require_both_classes(scores, "ROC");
  const auto reals = scores_of(scores, 0);
  const auto fakes = scores_of(scores, 1);
  std::vector<double> thresholds;
  for (const ScoreEntry& e : scores.entries) thresholds.push_back(e.score);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double nr = static_cast<double>(reals.size());
  const double nf = static_cast<double>(fakes.size());
  std::vector<RocPoint> curve{{0.0, 0.0}};
  // Rule "fake iff score >= t" so that every distinct score adds a point.
  for (double t : thresholds) {
    const auto at_least = [t](const std::vector<double>& v) {
      return static_cast<double>(v.end() - std::lower_bound(v.begin(), v.end(), t));
    };
    curve.push_back({at_least(reals) / nr, at_least(fakes) / nf});
  }
  return curve;
}

PdAtFar pd_at_far(const ScoreSet& scores, double far) {
  if (!(far > 0.0 && far < 1.0)) throw ContractViolation("far must lie in (0, 1)");
  require_both_classes(scores, "Pd@FAR");
  const auto reals = scores_of(scores, 0);
  const auto fakes = scores_of(scores, 1);
  const double nr = static_cast<double>(reals.size());
  for (double t : reals) {
    const double realized = static_cast<double>(count_above(reals, t)) / nr;
    if (realized <= far) {
      return {t, static_cast<double>(count_above(fakes, t)) / static_cast<double>(fakes.size()), realized};
    }
  }
  // The largest real always qualifies, so the loop returns.
  throw std::logic_error("pd_at_far: no threshold found");
}

Histogram histogram(const ScoreSet& scores, int bins) {
  if (bins < 2) throw ContractViolation("histogram needs at least 2 bins");
  std::map<std::pair<int, std::string>, std::vector<std::int64_t>> groups;
  for (const ScoreEntry& e : scores.entries) {
    auto& counts = groups[{e.label, e.family}];
    if (counts.empty()) counts.assign(static_cast<std::size_t>(bins), 0);
    const double pos = std::floor(e.score * bins);
    const int bin = std::clamp(static_cast<int>(pos), 0, bins - 1);
    ++counts[static_cast<std::size_t>(bin)];
  }
  Histogram h;
  h.bins = bins;
  for (auto& [key, counts] : groups) h.groups.push_back({key.first, key.second, std::move(counts)});
  return h;
}

double balanced_accuracy_at(const ScoreSet& scores, double threshold) {
  require_both_classes(scores, "balanced accuracy");
  std::size_t tn = 0;
  std::size_t tp = 0;
  for (const ScoreEntry& e : scores.entries) {
    if (e.label == 0 && e.score <= threshold) ++tn;
    if (e.label == 1 && e.score > threshold) ++tp;
  }
  return 0.5 * (static_cast<double>(tn) / static_cast<double>(scores.count(0)) +
                static_cast<double>(tp) / static_cast<double>(scores.count(1)));
}

std::vector<std::string> fake_families(const ScoreSet& scores) {
  std::set<std::string> names;
  for (const ScoreEntry& e : scores.entries) {
    if (e.label == 1) names.insert(e.family);
  }
  return {names.begin(), names.end()};
}

ScoreSet family_subset(const ScoreSet& scores, const std::string& family) {
  ScoreSet out;
  for (const ScoreEntry& e : scores.entries) {
    if (e.label == 0 || e.family == family) out.entries.push_back(e);
  }
  return out;
}

ThresholdSpread per_family_threshold_spread(const ScoreSet& scores) {
  ThresholdSpread out;
  std::set<std::string> named;
  for (const ScoreEntry& e : scores.entries) {
    if (e.family != kRealFamily) named.insert(e.family);
  }
  const auto families = fake_families(scores);
  for (const std::string& f : named) {
    if (!std::binary_search(families.begin(), families.end(), f)) out.skipped.push_back(f);
  }
  if (scores.count(0) == 0) throw UndefinedMetric("threshold search needs real scores");

  for (const std::string& family : families) {
    const ScoreSet subset = family_subset(scores, family);
    std::vector<double> candidates;
    for (const ScoreEntry& e : subset.entries) candidates.push_back(e.score);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const auto reals = scores_of(subset, 0);
    const auto fakes = scores_of(subset, 1);
    double best_t = candidates.front();
    double best = -1.0;
    for (double t : candidates) {
      const double tnr = static_cast<double>(reals.size() - count_above(reals, t)) / reals.size();
      const double tpr = static_cast<double>(count_above(fakes, t)) / fakes.size();
      const double ba = 0.5 * (tnr + tpr);
      if (ba > best) {
        best = ba;
        best_t = t;
      }
    }
    out.thresholds[family] = best_t;
    out.balanced_accuracy[family] = best;
  }
  if (!out.thresholds.empty()) {
    auto [lo, hi] = std::minmax_element(out.thresholds.begin(), out.thresholds.end(),
                                        [](const auto& a, const auto& b) { return a.second < b.second; });
    out.spread = hi->second - lo->second;
  }
  return out;
}

FamilyMetrics compute_metrics(const ScoreSet& scores, const std::string& family) {
  const ScoreSet subset = family_subset(scores, family);
  FamilyMetrics m;
  m.family = family;
  m.reals = subset.count(0);
  m.fakes = subset.count(1);
  m.accuracy = accuracy_at(subset, 0.5);
  m.auc = auc(subset);
  m.pd_at_1 = pd_at_far(subset, 0.01).detection;
  m.pd_at_10 = pd_at_far(subset, 0.10).detection;
  return m;
}

std::vector<FamilyMetrics> per_family_metrics(const ScoreSet& scores) {
  std::vector<FamilyMetrics> out;
  for (const std::string& f : fake_families(scores)) out.push_back(compute_metrics(scores, f));
  return out;
}

FamilyMetrics average_metrics(const std::vector<FamilyMetrics>& families) {
  if (families.empty()) throw UndefinedMetric("average over zero families");
  FamilyMetrics avg;
  avg.family = "average";
  avg.reals = families.front().reals;
  for (const FamilyMetrics& m : families) {
    avg.fakes += m.fakes;
    avg.accuracy += m.accuracy;
    avg.auc += m.auc;
    avg.pd_at_1 += m.pd_at_1;
    avg.pd_at_10 += m.pd_at_10;
  }
  const double n = static_cast<double>(families.size());
  avg.accuracy /= n;
  avg.auc /= n;
  avg.pd_at_1 /= n;
  avg.pd_at_10 /= n;
  return avg;
}

std::vector<SweepCell> robustness_sweep(const DetectorNetwork& net, const Corpus& corpus,
                                        Split split, const std::vector<Perturbation>& grid) {
  if (grid.empty()) throw ContractViolation("robustness sweep needs a nonempty grid");
  std::vector<Perturbation> cells = grid;
  if (std::find(cells.begin(), cells.end(), Perturbation::none()) == cells.end()) {
    cells.insert(cells.begin(), Perturbation::none());
  }
  std::vector<SweepCell> out;
  for (const Perturbation& p : cells) {
    SweepCell cell;
    cell.perturbation = p.label();
    try {
      const ScoreSet s = score_dataset(net, corpus, split, p);
      cell.scored = s.entries.size();
      cell.failed_items = s.errors.size();
      cell.accuracy = accuracy_at(s, 0.5);
      cell.auc = auc(s);
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
      cell.accuracy = 0.0;
      cell.auc = 0.0;
    }
    out.push_back(cell);
  }
  return out;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["schema_version"] = r.schema_version;
  j["seed"] = r.seed;
  j["config"] = r.config;
  j["families"] = nlohmann::json::array();
  for (const FamilyMetrics& m : r.families) j["families"].push_back(metrics_json(m));
  j["average"] = r.average ? metrics_json(*r.average) : nlohmann::json(nullptr);
  if (r.spread) {
    j["threshold_spread"] = {{"thresholds", r.spread->thresholds},
                             {"balanced_accuracy", r.spread->balanced_accuracy},
                             {"skipped", r.spread->skipped},
                             {"spread", r.spread->spread}};
  } else {
    j["threshold_spread"] = nullptr;
  }
  if (r.score_histogram) {
    nlohmann::json groups = nlohmann::json::array();
    for (const HistogramGroup& g : r.score_histogram->groups) {
      groups.push_back({{"label", g.label}, {"family", g.family}, {"counts", g.counts}});
    }
    j["histogram"] = {{"bins", r.score_histogram->bins}, {"groups", groups}};
  } else {
    j["histogram"] = nullptr;
  }
  j["sweep"] = nlohmann::json::array();
  for (const SweepCell& c : r.sweep) {
    j["sweep"].push_back({{"perturbation", c.perturbation}, {"ok", c.ok}, {"error", c.error},
                          {"scored", c.scored}, {"failed_items", c.failed_items},
                          {"accuracy", c.accuracy}, {"auc", c.auc}});
  }
  j["errors"] = nlohmann::json::array();
  for (const ItemError& e : r.errors) j["errors"].push_back({{"id", e.id}, {"message", e.message}});
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != kReportSchemaVersion) {
    throw LoadError("unsupported report schema version " + std::to_string(r.schema_version));
  }
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = j.at("config");
  for (const auto& m : j.at("families")) r.families.push_back(metrics_from(m));
  if (!j.at("average").is_null()) r.average = metrics_from(j.at("average"));
  if (const auto& s = j.at("threshold_spread"); !s.is_null()) {
    ThresholdSpread t;
    t.thresholds = s.at("thresholds").get<std::map<std::string, double>>();
    t.balanced_accuracy = s.at("balanced_accuracy").get<std::map<std::string, double>>();
    t.skipped = s.at("skipped").get<std::vector<std::string>>();
    t.spread = s.at("spread").get<double>();
    r.spread = t;
  }
  if (const auto& h = j.at("histogram"); !h.is_null()) {
    Histogram hist;
    hist.bins = h.at("bins").get<int>();
    for (const auto& g : h.at("groups")) {
      hist.groups.push_back({g.at("label").get<int>(), g.at("family").get<std::string>(),
                             g.at("counts").get<std::vector<std::int64_t>>()});
    }
    r.score_histogram = hist;
  }
  for (const auto& c : j.at("sweep")) {
    SweepCell cell;
    cell.perturbation = c.at("perturbation").get<std::string>();
    cell.ok = c.at("ok").get<bool>();
    cell.error = c.at("error").get<std::string>();
    cell.scored = c.at("scored").get<std::size_t>();
    cell.failed_items = c.at("failed_items").get<std::size_t>();
    cell.accuracy = c.at("accuracy").get<double>();
    cell.auc = c.at("auc").get<double>();
    r.sweep.push_back(cell);
  }
  for (const auto& e : j.at("errors")) {
    r.errors.push_back({e.at("id").get<std::string>(), e.at("message").get<std::string>()});
  }
  return r;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::filesystem::path> write_report(const MetricsReport& report,
                                                const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;

  written.push_back(out_dir / "report.json");
  write_text(written.back(), report_to_json(report).dump(2) + "\n");

  std::ostringstream metrics;
  metrics << "family,reals,fakes,accuracy,auc,pd_at_1,pd_at_10\n";
  auto row = [&](const FamilyMetrics& m) {
    metrics << csv_field(m.family) << ',' << m.reals << ',' << m.fakes << ',' << format_number(m.accuracy)
            << ',' << format_number(m.auc) << ',' << format_number(m.pd_at_1) << ','
            << format_number(m.pd_at_10) << '\n';
  };
  for (const FamilyMetrics& m : report.families) row(m);
  if (report.average) row(*report.average);
  written.push_back(out_dir / "metrics.csv");
  write_text(written.back(), metrics.str());

  std::ostringstream hist;
  hist << "label,family,bin,lower,upper,count\n";
  if (report.score_histogram) {
    const int bins = report.score_histogram->bins;
    for (const HistogramGroup& g : report.score_histogram->groups) {
      for (int b = 0; b < bins; ++b) {
        hist << g.label << ',' << csv_field(g.family) << ',' << b << ','
             << format_number(static_cast<double>(b) / bins) << ','
             << format_number(static_cast<double>(b + 1) / bins) << ',' << g.counts[b] << '\n';
      }
    }
  }
  written.push_back(out_dir / "histogram.csv");
  write_text(written.back(), hist.str());

  std::ostringstream sweep;
  sweep << "perturbation,ok,scored,failed_items,accuracy,auc,error\n";
  for (const SweepCell& c : report.sweep) {
    sweep << csv_field(c.perturbation) << ',' << (c.ok ? "true" : "false") << ',' << c.scored << ','
          << c.failed_items << ',' << format_number(c.accuracy) << ',' << format_number(c.auc) << ','
          << csv_field(c.error) << '\n';
  }
  written.push_back(out_dir / "sweep.csv");
  write_text(written.back(), sweep.str());
  return written;
}

MetricsReport read_report(const std::filesystem::path& out_dir) {
  const auto path = out_dir / "report.json";
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

std::string format_summary(const MetricsReport& report) {
  std::ostringstream os;
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.1f", 100.0 * v);
    return std::string(buf);
  };
  os << "seed " << report.seed << "\n\n";
  if (!report.families.empty()) {
    os << "family        acc@0.5     AUC   Pd@1%  Pd@10%\n";
    auto line = [&](const FamilyMetrics& m) {
      char name[16];
      std::snprintf(name, sizeof name, "%-12s", m.family.c_str());
      os << name << "  " << pct(m.accuracy) << "  " << pct(m.auc) << "  " << pct(m.pd_at_1) << "  "
         << pct(m.pd_at_10) << '\n';
    };
    for (const FamilyMetrics& m : report.families) line(m);
    if (report.average) line(*report.average);
  }
  if (report.spread) {
    os << "\nthreshold spread " << format_number(report.spread->spread) << '\n';
    for (const auto& [family, t] : report.spread->thresholds) {
      os << "  " << family << " best threshold " << format_number(t) << '\n';
    }
  }
  if (!report.sweep.empty()) {
    os << "\nperturbation    acc@0.5     AUC\n";
    for (const SweepCell& c : report.sweep) {
      char name[20];
      std::snprintf(name, sizeof name, "%-14s", c.perturbation.c_str());
      if (c.ok) {
        os << name << "  " << pct(c.accuracy) << "  " << pct(c.auc) << '\n';
      } else {
        os << name << "  failed: " << c.error << '\n';
      }
    }
  }
  if (!report.errors.empty()) os << '\n' << report.errors.size() << " items could not be scored\n";
  return os.str();
}

}  // namespace gandetect
