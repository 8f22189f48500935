#include "mccm/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "mccm/error.hpp"
#include "mccm/io.hpp"

namespace mccm {

RocCurve roc_curve(const ScoreSet& scores) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& e : scores) {
    require(e.label == 0 || e.label == 1, "labels must be 0 or 1");
    (e.label == 1 ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0) fail(Errc::single_class, "ROC needs both labels present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a].score > scores[b].score; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]].score;
    for (; i < order.size() && scores[order[i]].score == s; ++i) (scores[order[i]].label == 1 ? tp : fp)++;
    curve.points.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

double d_eer(const RocCurve& curve) {
  const auto& pts = curve.points;
  // g = FPR - FNR is non-decreasing along the sweep: -1 at (0,0), +1 at (1,1).
  auto g = [](const RocPoint& p) { return p.fpr - (1.0 - p.tpr); };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double gi = g(pts[i]);
    if (gi == 0.0) return pts[i].fpr;
    if (i + 1 < pts.size() && gi < 0.0 && g(pts[i + 1]) > 0.0) {
      const double gj = g(pts[i + 1]);
      const double t = -gi / (gj - gi);
      return pts[i].fpr + t * (pts[i + 1].fpr - pts[i].fpr);
    }
  }
  return 0.5;  // unreachable for a well-formed curve
}

EvalReport evaluate_scores(const ScoreSet& scores) {
  EvalReport r;
  r.curve = roc_curve(scores);
  r.auc = auc(r.curve);
  r.d_eer = d_eer(r.curve);
  for (const auto& e : scores) (e.label == 1 ? r.n_pos : r.n_neg)++;
  return r;
}

std::string scores_csv(const ScoreSet& scores) {
  std::string out = "id,label,score\n";
  for (const auto& e : scores) out += e.id + ',' + std::to_string(e.label) + ',' + format_double(e.score) + '\n';
  return out;
}

void write_scores_csv(const ScoreSet& scores, const std::filesystem::path& path) {
  write_file_atomic(path, scores_csv(scores));
}

ScoreSet read_scores_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "id,label,score")
    fail(Errc::malformed_header, path.string() + ": expected header 'id,label,score'");
  ScoreSet out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.rfind(',');
    require(c1 != std::string::npos && c2 != c1, path.string() + ": bad row '" + line + "'");
    ScoreEntry e;
    e.id = line.substr(0, c1);
    e.label = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
    e.score = std::stod(line.substr(c2 + 1));
    out.push_back(std::move(e));
  }
  return out;
}

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : curve.points) out += format_double(p.fpr) + ',' + format_double(p.tpr) + '\n';
  write_file_atomic(path, out);
}

std::string format_percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", rate * 100.0);
  return buf;
}

std::string report_table(const ReportGrid& grid) {
  std::vector<std::string> missing;
  for (const auto& k : grid.expected)
    if (!grid.reports.count(k))
      missing.push_back(k.variant + "/" + k.protocol + "/seed" + std::to_string(k.seed) + "/" + k.train_gen + "->" + k.test_gen + "/" + k.aug);
  if (!missing.empty()) {
    std::string msg = "incomplete grid, missing cells:";
    for (const auto& m : missing) msg += " " + m;
    fail(Errc::incomplete_grid, msg);
  }

  // Column group = everything except the variant. Exactly one marker per group
  // and metric; ties go to the first variant in grid order.
  auto group_of = [](const CellKey& k) { return CellKey{"", k.protocol, k.train_gen, k.test_gen, k.aug, k.seed}; };
  std::map<CellKey, CellKey> best_auc, best_eer;
  for (const auto& k : grid.expected) {
    const auto& r = grid.reports.at(k);
    const auto g = group_of(k);
    auto [ia, fresh_a] = best_auc.try_emplace(g, k);
    if (!fresh_a && r.auc > grid.reports.at(ia->second).auc) ia->second = k;
    auto [ie, fresh_e] = best_eer.try_emplace(g, k);
    if (!fresh_e && r.d_eer < grid.reports.at(ie->second).d_eer) ie->second = k;
  }

  std::string out = "variant,protocol,seed,train_gen,test_gen,aug,auc,d_eer,d_eer_pct,best_auc,best_d_eer\n";
  for (const auto& k : grid.expected) {
    const auto& r = grid.reports.at(k);
    const auto g = group_of(k);
    out += k.variant + ',' + k.protocol + ',' + std::to_string(k.seed) + ',' + k.train_gen + ',' + k.test_gen + ',' + k.aug + ',' +
           format_double(r.auc) + ',' + format_double(r.d_eer) + ',' + format_percent(r.d_eer) + ',' +
           (best_auc.at(g) == k ? "1" : "0") + ',' + (best_eer.at(g) == k ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace mccm
