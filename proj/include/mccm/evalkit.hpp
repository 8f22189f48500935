#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mccm {

/// One scored sample. label 1 = pristine, which is the positive class for
/// every rate below (TPR counts pristine images accepted as pristine).
struct ScoreEntry {
  std::string id;
  int label = 1;
  double score = 0.0;
};

using ScoreSet = std::vector<ScoreEntry>;

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Threshold sweep from high to low score; ties form a single step.
/// Always starts at (0,0) and ends at (1,1).
struct RocCurve {
  std::vector<RocPoint> points;
};

struct EvalReport {
  double auc = 0.0;
  double d_eer = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  RocCurve curve;
};

RocCurve roc_curve(const ScoreSet& scores);

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

/// Operating point where FPR equals FNR = 1 - TPR, linearly interpolated
/// between the bracketing curve points.
double d_eer(const RocCurve& curve);

EvalReport evaluate_scores(const ScoreSet& scores);

void write_scores_csv(const ScoreSet& scores, const std::filesystem::path& path);
ScoreSet read_scores_csv(const std::filesystem::path& path);
std::string scores_csv(const ScoreSet& scores);

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);

/// Key of one cell of the comparison table.
struct CellKey {
  std::string variant;
  std::string protocol;  // "I" or "II"
  std::string train_gen;
  std::string test_gen;
  std::string aug;  // "none" or "with"
  std::uint64_t seed = 0;

  auto operator<=>(const CellKey&) const = default;
};

/// Complete grid: every (variant, protocol, train_gen, test_gen, aug)
/// combination present in `expected` must have a report.
struct ReportGrid {
  std::vector<CellKey> expected;
  std::map<CellKey, EvalReport> reports;
};

/// D-EER as a percentage with two decimals, e.g. 0.0445 -> "4.45".
std::string format_percent(double rate);

/// CSV rows: variant,protocol,seed,train_gen,test_gen,aug,auc,d_eer,d_eer_pct,best_auc,best_d_eer.
/// auc and d_eer are exact round-trip decimals; d_eer_pct is the two-decimal
/// display form. Best markers are computed per (protocol, seed, train_gen,
/// test_gen, aug) across variants: highest AUC, lowest D-EER, one marker each.
std::string report_table(const ReportGrid& grid);

}  // namespace mccm
