#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <ctime>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "mccm/dataset.hpp"
#include "mccm/evalkit.hpp"
#include "mccm/freqspec.hpp"
#include "mccm/harness.hpp"
#include "mccm/imgdata.hpp"
#include "mccm/io.hpp"
#include "mccm/loss.hpp"
#include "mccm/net.hpp"
#include "mccm/rng.hpp"

using namespace mccm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double wall_limit_s;  // stated runtime bound
  std::function<Outcome()> run;
};

RgbImage random_image(std::uint64_t seed, int n) {
  RgbImage img(n, n);
  SplitMix64 rng(seed);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

// ---- 1 -----------------------------------------------------------------------

Outcome loss_identities() {
  double worst_focal = 0.0, worst_cmfl = 0.0, worst_total = 0.0;
  bool weight_exact = true;
  for (int i = 1; i <= 5000; ++i) {
    const double p = i / 5001.0;
    for (int y : {0, 1}) {
      worst_focal = std::max(worst_focal, std::abs(focal(p, y, 1.0, 0.0) - ce(p, y)));
      const double f_zero = y == 1 ? 0.0 : 1.0;
      for (double alpha : {0.25, 1.0, 2.0})
        for (double gamma : {0.0, 1.0, 3.0})
          worst_cmfl = std::max(worst_cmfl, std::abs(cmfl(p, f_zero, y, alpha, gamma) - alpha * ce(p, y)));
      LossConfig cfg;
      cfg.lambda = 0.0;
      const HeadOutputs h{0.3, 0.8, p};
      worst_total = std::max(worst_total, std::abs(total_loss(h, y, cfg).total - ce(p, y)));
    }
  }
  for (int k = 1; k <= 100; ++k) {
    const double p = 0.01 * k;
    if (cmfl_weight(p, p) != p * p) weight_exact = false;
  }
  const bool pass = worst_focal <= 1e-12 && worst_cmfl <= 1e-12 && worst_total <= 1e-12 && weight_exact;
  return {pass, "focal-ce " + fmt(worst_focal) + ", cmfl-alpha*ce " + fmt(worst_cmfl) + ", total(lambda=0)-ce " +
                    fmt(worst_total) + ", weight(p,p)==p^2 " + (weight_exact ? "exact" : "NOT exact")};
}

// ---- 2 -----------------------------------------------------------------------

Outcome loss_gradients() {
  SplitMix64 rng(2024);
  const double gammas[] = {0, 1, 2, 3};
  const double lambdas[] = {0, 0.25, 0.5, 1};
  const double step = 1e-6;
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    HeadOutputs h{0.01 + 0.98 * rng.uniform(), 0.01 + 0.98 * rng.uniform(), 0.01 + 0.98 * rng.uniform()};
    const int y = static_cast<int>(rng.below(2));
    LossConfig cfg;
    cfg.gamma = gammas[rng.below(4)];
    cfg.lambda = lambdas[rng.below(4)];
    const auto g = total_loss_grad(h, y, cfg);
    double fd[3];
    double* fields[3] = {&h.s, &h.f, &h.r};
    for (int k = 0; k < 3; ++k) {
      const double keep = *fields[k];
      *fields[k] = keep + step;
      const double up = total_loss(h, y, cfg).total;
      *fields[k] = keep - step;
      const double down = total_loss(h, y, cfg).total;
      *fields[k] = keep;
      fd[k] = (up - down) / (2 * step);
    }
    const double an[3] = {g.ds, g.df, g.dr};
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 3; ++k) {
      num += (an[k] - fd[k]) * (an[k] - fd[k]);
      den += fd[k] * fd[k];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  return {worst < 1e-5, "max relative error " + fmt(worst) + " over 1000 draws (bound 1e-5)"};
}

// ---- 3 -----------------------------------------------------------------------

Outcome network_gradients() {
  NetConfig c;
  c.input_size = 8;
  c.stem_channels = 4;
  c.blocks = 1;
  c.layers_per_block = 2;
  c.growth = 3;
  c.seed = 3;
  auto st = init_network(c);
  SplitMix64 rng(31);
  for (auto& t : st.params)
    for (double& v : t.values) v += 0.05 * rng.normal();

  std::vector<RgbImage> rgb;
  std::vector<FreqInput> freq;
  std::vector<int> y;
  for (int i = 0; i < 3; ++i) {
    rgb.push_back(random_image(500 + i, 8));
    freq.push_back(to_freq_input(rgb.back()));
    y.push_back(i % 2);
  }
  const LossConfig cfg;
  // Loss plus the on/off pattern of every ReLU unit; central differences are
  // only meaningful when both probes see the same pattern.
  auto probe = [&](std::vector<bool>& pattern) {
    const auto r = forward(st, rgb, freq);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += total_loss(r.heads[i], y[i], cfg).total;
    pattern.clear();
    for (const auto& sc : r.cache.samples)
      for (const auto* bc : {&sc.spatial, &sc.frequency}) {
        for (const auto& buf : bc->blocks)
          for (double v : buf) pattern.push_back(v > 0.0);
        for (const auto& buf : bc->transitions)
          for (double v : buf) pattern.push_back(v > 0.0);
      }
    return total;
  };
  const auto res = forward(st, rgb, freq);
  std::vector<HeadGrads> hg;
  for (std::size_t i = 0; i < y.size(); ++i) hg.push_back(total_loss_grad(res.heads[i], y[i], cfg));
  const auto grads = backward(st, res.cache, hg);

  const double step = 1e-5;
  double worst = 0.0;
  std::string worst_name;
  std::size_t compared = 0, straddled = 0;
  bool every_group = true;
  std::vector<bool> pat_up, pat_down;
  for (std::size_t p = 0; p < st.params.size(); ++p) {
    auto& values = st.params[p].values;
    double num = 0.0, den = 0.0;
    const std::size_t compared_before = compared;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double keep = values[k];
      values[k] = keep + step;
      const double up = probe(pat_up);
      values[k] = keep - step;
      const double down = probe(pat_down);
      values[k] = keep;
      if (pat_up != pat_down) {
        ++straddled;
        continue;
      }
      ++compared;
      const double fd = (up - down) / (2 * step);
      num += (fd - grads[p].values[k]) * (fd - grads[p].values[k]);
      den += fd * fd;
    }
    every_group &= compared > compared_before;
    const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
    if (rel > worst) {
      worst = rel;
      worst_name = st.params[p].name;
    }
  }
  return {worst < 1e-4 && every_group, std::to_string(st.params.size()) + " parameter groups, worst relative error " +
                                       fmt(worst) + " (" + worst_name + ", bound 1e-4); " + std::to_string(compared) +
                                       " coordinates compared, " + std::to_string(straddled) +
                                       " skipped where the probes straddle a ReLU kink" +
                                       (every_group ? "" : "; SOME GROUP HAD NO USABLE COORDINATE")};
}

// ---- 4 -----------------------------------------------------------------------

Outcome dft_pipeline() {
  double parseval = 0.0, symmetry = 0.0;
  bool bounds = true, centre = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int n = seed % 2 ? 32 : 64;
    const auto img = random_image(7000 + seed, n);
    const auto spec = dft2_per_channel(img);
    for (int c = 0; c < 3; ++c) {
      double lhs = 0.0, rhs = 0.0, scale = 0.0;
      for (double v : img.plane(c)) rhs += v * v;
      rhs *= static_cast<double>(n) * n;
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
          const auto a = spec.at(c, u, v);
          lhs += std::norm(a);
          scale = std::max(scale, std::abs(a));
          if (u == n / 2 || v == n / 2) continue;
          const auto b = std::conj(spec.at(c, (n - u) % n, (n - v) % n));
          symmetry = std::max(symmetry, std::abs(a - b) / std::abs(spec.at(c, 0, 0)));
        }
      parseval = std::max(parseval, std::abs(lhs - rhs) / rhs);
    }
    const auto f = to_freq_input(img);
    for (double v : f.data) bounds &= v >= -1.0 && v <= 1.0;
    for (int c = 0; c < 3; ++c) centre &= f.at(c, n / 2, n / 2) == 1.0;
  }
  double constant = 0.0;
  const auto flat = to_freq_input(RgbImage(32, 32, 0.37));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        constant = std::max(constant, std::abs(flat.at(c, y, x) - (y == 16 && x == 16 ? 1.0 : -1.0)));
  const bool pass = parseval <= 1e-9 && symmetry <= 1e-12 && bounds && centre && constant <= 1e-6;
  return {pass, "parseval rel " + fmt(parseval) + ", conj-symmetry rel " + fmt(symmetry) + ", bounds " +
                    (bounds ? "ok" : "VIOLATED") + ", DC at centre " + (centre ? "ok" : "VIOLATED") +
                    ", constant image max dev " + fmt(constant)};
}

// ---- 5 -----------------------------------------------------------------------

double mann_whitney(const ScoreSet& s) {
  double good = 0.0, pairs = 0.0;
  for (const auto& p : s)
    for (const auto& n : s) {
      if (p.label != 1 || n.label != 0) continue;
      pairs += 1.0;
      good += p.score > n.score ? 1.0 : (p.score == n.score ? 0.5 : 0.0);
    }
  return good / pairs;
}

// Sweeps `steps` evenly spaced thresholds from above the maximum to below the
// minimum (accept as pristine when score >= t) and interpolates linearly
// between the two consecutive operating points where FPR - FNR changes sign.
double scan_eer(const ScoreSet& s, long steps) {
  std::vector<std::pair<double, int>> v;
  double np = 0, nn = 0;
  for (const auto& e : s) {
    v.emplace_back(e.score, e.label);
    (e.label == 1 ? np : nn) += 1.0;
  }
  std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.first > b.first; });
  const double hi = v.front().first, lo = v.back().first;
  const double top = hi + 1e-9 * (1.0 + std::abs(hi)), bottom = lo - 1e-9 * (1.0 + std::abs(lo));
  std::size_t idx = 0;
  double tp = 0, fp = 0;
  double fpr_prev = 0.0, fnr_prev = 1.0;
  for (long i = 0; i <= steps; ++i) {
    const double t = i == steps ? bottom : top - (top - bottom) * static_cast<double>(i) / steps;
    while (idx < v.size() && v[idx].first >= t) (v[idx++].second == 1 ? tp : fp) += 1.0;
    const double fpr = fp / nn, fnr = 1.0 - tp / np;
    if (fpr == fpr_prev && fnr == fnr_prev) continue;
    const double d0 = fpr_prev - fnr_prev, d1 = fpr - fnr;
    if (d0 == 0.0) return fpr_prev;
    if ((d0 < 0) != (d1 < 0) || d1 == 0.0) return fpr_prev + d0 / (d0 - d1) * (fpr - fpr_prev);
    fpr_prev = fpr;
    fnr_prev = fnr;
  }
  return fpr_prev;
}

Outcome metric_oracles() {
  SplitMix64 rng(555);
  double worst_auc = 0.0, worst_eer = 0.0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t n = 2 + rng.below(49);
    ScoreSet s;
    for (std::size_t i = 0; i < n; ++i) {
      double score = rng.uniform();
      if (set % 3 == 0) score = std::floor(score * 8.0) / 8.0;
      s.push_back({"x" + std::to_string(i), static_cast<int>(rng.below(2)), score});
    }
    s[0].label = 1;
    s[1].label = 0;
    const auto curve = roc_curve(s);
    worst_auc = std::max(worst_auc, std::abs(auc(curve) - mann_whitney(s)));
    worst_eer = std::max(worst_eer, std::abs(d_eer(curve) - scan_eer(s, 1000000)));
  }
  return {worst_auc <= 1e-9 && worst_eer <= 1e-9,
          "max |auc - mann_whitney| " + fmt(worst_auc) + ", max |d_eer - scan| " + fmt(worst_eer)};
}

// ---- 6 -----------------------------------------------------------------------

struct ToyGrid {
  int count = 3500;
  int size = 64;
  int epochs = 4;
  int batch = 32;
  double lr = 1e-3;
  int stem = 8;
  int blocks = 3;
  int layers = 2;
  int growth = 4;
  int jobs = 0;
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

Outcome cross_modal(const fs::path& work, const ToyGrid& t, double& cpu_used) {
  const double cpu0 = cpu_seconds();
  write_dataset(work / "pristine", Generator::pristine, gen_pristine(101, t.count, t.size), {}, 101);
  write_dataset(work / "freqfake", Generator::freqfake, gen_freqfake(202, t.count, t.size), {}, 202);
  write_dataset(work / "spatialfake", Generator::spatialfake, gen_spatialfake(303, t.count, t.size), {}, 303);

  GridConfig g;
  g.pristine_dir = work / "pristine";
  g.fake_dirs = {{Generator::freqfake, work / "freqfake"}, {Generator::spatialfake, work / "spatialfake"}};
  g.protocol = Protocol::I;
  g.seeds = {1, 2, 3};
  g.base.epochs = t.epochs;
  g.base.batch_size = t.batch;
  g.base.lr = t.lr;
  g.base.net.stem_channels = t.stem;
  g.base.net.blocks = t.blocks;
  g.base.net.layers_per_block = t.layers;
  g.base.net.growth = t.growth;
  g.out_dir = work / "runs";
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  g.jobs = t.jobs > 0 ? t.jobs : static_cast<int>(std::min(4u, hw));

  const auto result = run_leave_one_out(g, [](const std::string& line) { std::cout << "    " << line << std::endl; });
  const std::string table = report_table(result.grid);
  write_file_atomic(work / "table.csv", table);
  cpu_used = cpu_seconds() - cpu0;

  std::map<std::tuple<std::uint64_t, std::string, std::string>, std::map<std::string, double>> cells;
  for (const auto& c : result.cells) cells[{c.key.seed, c.key.train_gen, c.key.test_gen}][c.key.variant] = c.report.auc;

  bool pass = true;
  std::ostringstream detail;
  detail << "\n    seed train->test      dual_cmfl dual_bce one_rgb  one_dft  fusion   check";
  for (const auto& [key, auc] : cells) {
    const auto& [seed, train, test] = key;
    const double dual = auc.at("dual_cmfl");
    const bool vs_single = dual >= std::max(auc.at("one_rgb"), auc.at("one_dft")) - 0.05;
    const bool vs_fusion = dual >= auc.at("fusion") - 0.05;
    pass &= vs_single && vs_fusion;
    detail << "\n    " << seed << "    " << std::left << std::setw(17) << (train + "->" + test) << std::right;
    for (const char* v : {"dual_cmfl", "dual_bce", "one_rgb", "one_dft", "fusion"})
      detail << std::fixed << std::setprecision(4) << std::setw(9) << auc.at(v);
    detail << "  " << (vs_single ? "single ok" : "SINGLE FAIL") << ", " << (vs_fusion ? "fusion ok" : "FUSION FAIL");
  }
  for (std::uint64_t seed : g.seeds) {
    const double on_sf = cells.at({seed, "freqfake", "spatialfake"}).at("one_dft");
    const double on_ff = cells.at({seed, "spatialfake", "freqfake"}).at("one_dft");
    const bool ok = on_sf < on_ff;
    pass &= ok;
    detail << "\n    seed " << seed << ": one_dft on spatialfake " << std::setprecision(4) << on_sf
           << (ok ? " < " : " >= ") << on_ff << " on freqfake" << (ok ? "" : "  FAIL");
  }
  detail << "\n    trained " << result.trained << " models with " << g.jobs << " job(s); table at "
         << (work / "table.csv").string();
  return {pass, detail.str()};
}

// ---- 7 -----------------------------------------------------------------------

std::uint64_t hash_images(const std::vector<RgbImage>& imgs) {
  std::string bytes;
  for (const auto& im : imgs) {
    bytes.append(reinterpret_cast<const char*>(im.data.data()), im.data.size() * sizeof(double));
    const auto f = to_freq_input(im);
    bytes.append(reinterpret_cast<const char*>(f.data.data()), f.data.size() * sizeof(double));
  }
  return fnv1a64(bytes);
}

Outcome protocol_two_determinism(const fs::path& work) {
  write_dataset(work / "p", Generator::pristine, gen_pristine(11, 700, 64), {}, 11);
  write_dataset(work / "f", Generator::freqfake, gen_freqfake(12, 700, 64), {}, 12);
  const Dataset p = load_dataset(work / "p"), f = load_dataset(work / "f");
  SampleSet train, val, test;
  for (auto [set, split] : std::initializer_list<std::pair<SampleSet*, Split>>{
           {&train, Split::train}, {&val, Split::val}, {&test, Split::test}}) {
    set->append(p, split);
    set->append(f, split);
  }

  ExperimentConfig cfg;
  cfg.protocol = Protocol::II;
  cfg.epochs = 1;
  cfg.lr = 1e-3;
  cfg.net.input_size = 64;
  cfg.net.stem_channels = 4;
  cfg.net.blocks = 2;
  cfg.net.layers_per_block = 1;
  cfg.net.growth = 4;
  cfg.seed = 1;
  save_checkpoint(train_model(cfg, train, val).best, work / "a.ckpt");
  cfg.variant = Variant::one_dft;
  cfg.seed = 2;
  save_checkpoint(train_model(cfg, train, val).best, work / "b.ckpt");

  const std::uint64_t eval_seed = 7;
  bool inputs_equal = true, scores_equal = true, scores_match_inputs = true;
  std::uint64_t first_hash = 0;
  int n = 0;
  for (const char* name : {"a.ckpt", "b.ckpt"}) {
    const auto state = load_checkpoint(work / name);
    const auto imgs = prepare_eval_images(test, eval_seed);
    const auto h = hash_images(imgs);
    if (n++ == 0) first_hash = h;
    inputs_equal &= h == first_hash;
    const auto via_inputs = score_images(state, test, imgs);
    const fs::path s1 = work / (std::string(name) + ".1.csv"), s2 = work / (std::string(name) + ".2.csv");
    write_scores_csv(evaluate_model(state, test, eval_seed), s1);
    write_scores_csv(evaluate_model(load_checkpoint(work / name), test, eval_seed), s2);
    scores_equal &= read_file(s1) == read_file(s2);
    scores_match_inputs &= read_file(s1) == scores_csv(via_inputs);
  }
  std::ostringstream hex;
  hex << std::hex << first_hash;
  return {inputs_equal && scores_equal && scores_match_inputs,
          std::to_string(test.size()) + " test images; augmented-input hash " + hex.str() + " " +
              (inputs_equal ? "identical" : "DIFFERS") + " across checkpoints; rerun scores CSV " +
              (scores_equal ? "byte-identical" : "DIFFERS") + "; scores " +
              (scores_match_inputs ? "consistent with hashed inputs" : "INCONSISTENT with hashed inputs")};
}

// ---- 8 -----------------------------------------------------------------------

struct SpectrumTriple {
  std::uint64_t pristine_seed, freqfake_seed, sample_seed;
  double pristine_margin, freqfake_margin;  // regression baselines
};

// Baselines recorded by the first run of this oracle (200 images, 64 px).
const SpectrumTriple kTriples[] = {
    {1, 2, 3, -0.0022080083354341917, 1.5528549981336255},
    {10, 20, 30, 0.006571330615983265, 1.551537055022963},
    {100, 200, 300, 0.0009708109410012933, 1.5490760516845232},
};

Outcome spectrum_analysis() {
  bool pass = true;
  std::ostringstream detail;
  detail << "200 images per set, 64 px";
  for (const auto& t : kTriples) {
    const double mp = nyquist_band_margin(average_spectrum(gen_pristine(t.pristine_seed, 200, 64), 200, t.sample_seed));
    const double mf = nyquist_band_margin(average_spectrum(gen_freqfake(t.freqfake_seed, 200, 64), 200, t.sample_seed));
    const bool ordered = mf > 0.0 && mp < mf;
    const bool stable = std::abs(mp - t.pristine_margin) <= 1e-9 * std::max(1.0, std::abs(t.pristine_margin)) &&
                        std::abs(mf - t.freqfake_margin) <= 1e-9 * std::max(1.0, std::abs(t.freqfake_margin));
    pass &= ordered && stable;
    detail << "\n    seeds (" << t.pristine_seed << "," << t.freqfake_seed << "," << t.sample_seed
           << "): freqfake margin " << format_double(mf) << ", pristine margin " << format_double(mp)
           << (ordered ? "" : "  ORDER FAIL") << (stable ? "" : "  BASELINE DRIFT");
  }
  return {pass, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  std::string keep;
  ToyGrid toy;
  app.add_option("--only", only, "criteria to run (default: all)");
  app.add_option("--work-dir", keep, "keep scratch data here instead of a removed temp dir");
  app.add_option("--jobs", toy.jobs, "parallel train units for criterion 6 (default: min(4, cores))");
  CLI11_PARSE(app, argc, argv);

  const fs::path work = keep.empty() ? fs::temp_directory_path() / ("mccm-acceptance-" + std::to_string(::getpid()))
                                     : fs::path(keep);
  fs::create_directories(work);

  double c6_cpu = 0.0;
  const std::vector<Criterion> criteria = {
      {1, "loss identities", 1.0, loss_identities},
      {2, "loss gradient vs finite differences", 5.0, loss_gradients},
      {3, "network gradient vs finite differences", 60.0, network_gradients},
      {4, "DFT pipeline", 10.0, dft_pipeline},
      {5, "metric oracle equivalence", 30.0, metric_oracles},
      {6, "toy cross-modal leave-one-out grid", 30.0 * 60.0,
       [&] { return cross_modal(work / "grid", toy, c6_cpu); }},
      {7, "protocol II determinism", 120.0, [&] { return protocol_two_determinism(work / "determinism"); }},
      {8, "spectrum analysis", 60.0, spectrum_analysis},
  };

  int failed = 0;
  std::vector<std::string> summary;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    std::cout << "[criterion " << c.id << "] " << c.name << " ..." << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt(wall, 4) + " s";
    bool in_time = wall < c.wall_limit_s;
    if (c.id == 6) {
      // The bound is stated for four cores; compare total CPU work against four
      // times the wall budget when fewer cores are available.
      const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
      const double budget = c.wall_limit_s * 4.0;
      in_time = hw >= 4 ? wall < c.wall_limit_s : c6_cpu < budget;
      timing += ", cpu " + fmt(c6_cpu, 5) + " s on " + std::to_string(hw) + " core(s), budget " +
                (hw >= 4 ? fmt(c.wall_limit_s) + " s wall" : fmt(budget) + " cpu-s");
    }
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    const std::string line = "criterion " + std::to_string(c.id) + " (" + c.name + "): " + (pass ? "PASS" : "FAIL") +
                             " [" + timing + (in_time ? "" : ", OVER TIME BOUND") + "]";
    std::cout << line << "\n    " << o.detail << std::endl;
    summary.push_back(line);
  }
  std::cout << "\n==== acceptance summary ====\n";
  for (const auto& s : summary) std::cout << s << "\n";
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed")) << "\n";

  if (keep.empty()) {
    std::error_code ec;
    fs::remove_all(work, ec);
  }
  return failed ? 1 : 0;
}
