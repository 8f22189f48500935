#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>

#include "mccm/dataset.hpp"
#include "mccm/error.hpp"
#include "mccm/evalkit.hpp"
#include "mccm/freqspec.hpp"
#include "mccm/harness.hpp"
#include "mccm/imgdata.hpp"
#include "mccm/io.hpp"
#include "mccm/net.hpp"

namespace fs = std::filesystem;
using namespace mccm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void usage(const std::string& msg) { throw UsageError(msg); }

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

// Flag values that name enums are checked up front so a bad value is a usage error.
template <class F>
auto parse_or_usage(F&& f, const std::string& what) {
  try {
    return f();
  } catch (const Error& e) {
    usage(what + ": " + e.what());
  }
}

SplitRatios parse_ratios(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      usage("--ratios: '" + tok + "' is not a number");
    }
  }
  if (v.size() != 3) usage("--ratios needs exactly three comma-separated values");
  if (std::any_of(v.begin(), v.end(), [](double x) { return !(x >= 0.0); }))
    usage("--ratios values must be non-negative");
  if (std::abs(v[0] + v[1] + v[2] - 1.0) > 1e-9) usage("--ratios must sum to 1");
  return {v[0], v[1], v[2]};
}

// ---- gen -------------------------------------------------------------------

struct GenOpts {
  fs::path out;
  std::string generator;
  int count = 0;
  int size = 64;
  std::uint64_t seed = 0;
  std::string ratios;
  bool force = false;
};

void run_gen(const GenOpts& o) {
  const Generator g = parse_or_usage([&] { return parse_generator(o.generator); }, "--generator");
  if (o.count < 1) usage("--count must be >= 1");
  if (o.size < 16 || o.size % 2 != 0) usage("--size must be even and >= 16");
  const SplitRatios ratios = o.ratios.empty() ? SplitRatios{} : parse_ratios(o.ratios);
  if (fs::exists(o.out) && !fs::is_directory(o.out)) usage(o.out.string() + " exists and is not a directory");
  const bool non_empty = fs::exists(o.out) && !fs::is_empty(o.out);
  if (non_empty && !o.force) usage(o.out.string() + " is not empty (use --force to overwrite)");

  std::cout << "gen: generator=" << to_string(g) << " count=" << o.count << " size=" << o.size
            << " seed=" << o.seed << " ratios=" << format_double(ratios.train) << ","
            << format_double(ratios.val) << "," << format_double(ratios.test) << "\n";

  if (non_empty) {
    for (const auto& entry : fs::directory_iterator(o.out)) {
      const auto ext = entry.path().extension();
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && (ext == ".ppm" || ext == ".tmp" || name == "manifest.csv"))
        fs::remove(entry.path());
    }
  }
  const auto images = generate(g, o.seed, o.count, o.size);
  const auto manifest = write_dataset(o.out, g, images, ratios, o.seed);
  std::size_t counts[3] = {0, 0, 0};
  for (Split s : manifest.split) counts[static_cast<int>(s)]++;
  std::cout << "wrote " << images.size() << " images to " << o.out.string() << " (train " << counts[0] << ", val "
            << counts[1] << ", test " << counts[2] << ")\n";
}

// ---- spectrum --------------------------------------------------------------

struct SpectrumOpts {
  fs::path in;
  std::size_t sample = 1000;
  std::uint64_t seed = 0;
  fs::path out;
  fs::path csv;
  int channel = 0;
  bool no_highpass = false;
};

void run_spectrum(const SpectrumOpts& o) {
  if (o.sample < 1) usage("--sample must be >= 1");
  std::cout << "spectrum: in=" << o.in.string() << " sample=" << o.sample << " seed=" << o.seed
            << " highpass=" << (o.no_highpass ? "off" : "on") << " csv_channel=" << o.channel << "\n";
  const Dataset ds = load_dataset(o.in);
  if (ds.images.empty()) fail(Errc::invalid_argument, "dataset is empty");
  std::size_t n = o.sample;
  if (n > ds.images.size()) {
    warn("--sample " + std::to_string(n) + " exceeds dataset size; using all " + std::to_string(ds.images.size()) +
         " images");
    n = ds.images.size();
  }
  const auto spec = average_spectrum(ds.images, n, o.seed, !o.no_highpass);
  write_pgm(spectrum_display(spec), o.out);
  if (!o.csv.empty()) write_spectrum_csv(spec, o.channel, o.csv);
  if (std::min(spec.width, spec.height) >= 18) {
    std::cout << "nyquist_band_margin=" << format_double(nyquist_band_margin(spec)) << "\n";
  } else {
    warn("images smaller than 18x18 are too small for the Nyquist band statistic");
    std::cout << "nyquist_band_margin=n/a\n";
  }
}

// ---- train -----------------------------------------------------------------

struct TrainOpts {
  fs::path pristine, fake, out, history;
  std::string variant = "dual_cmfl";
  std::string protocol = "I";
  int epochs = 25;
  int batch = 32;
  double lr = 1e-4;
  double wd = 1e-5;
  double gamma = 3.0;
  double lambda = 0.5;
  double alpha = 1.0;
  double flip = 0.5;
  bool decoupled = false;
  bool bce_all_heads = false;
  std::uint64_t seed = 0;
  int stem = 16, blocks = 3, layers = 2, growth = 8;
};

void run_train(const TrainOpts& o) {
  const Variant v = parse_or_usage([&] { return parse_variant(o.variant); }, "--variant");
  if (v == Variant::fusion)
    usage("fusion is not trained; train one_rgb and one_dft, then combine their scores with `mccm fuse`");
  const Protocol p = parse_or_usage([&] { return parse_protocol(o.protocol); }, "--protocol");
  if (o.epochs < 1 || o.batch < 1) usage("--epochs and --batch must be >= 1");
  if (!(o.flip >= 0.0 && o.flip <= 1.0)) usage("--flip must be in [0,1]");

  ExperimentConfig cfg;
  cfg.protocol = p;
  cfg.variant = v;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.lr = o.lr;
  cfg.weight_decay = o.wd;
  cfg.decoupled_weight_decay = o.decoupled;
  cfg.bce_all_heads = o.bce_all_heads;
  cfg.flip_prob = o.flip;
  cfg.seed = o.seed;
  cfg.loss.gamma = o.gamma;
  cfg.loss.lambda = o.lambda;
  cfg.loss.alpha = o.alpha;
  parse_or_usage([&] { cfg.loss.validate(); return 0; }, "loss");
  cfg.net.stem_channels = o.stem;
  cfg.net.blocks = o.blocks;
  cfg.net.layers_per_block = o.layers;
  cfg.net.growth = o.growth;
  if (v == Variant::dual_cmfl && o.lambda == 0.0)
    warn("--lambda 0 with dual_cmfl reduces the objective to cross entropy on the joint head");

  const Dataset pristine = load_dataset(o.pristine);
  const Dataset fake = load_dataset(o.fake);
  require(!pristine.images.empty() && !fake.images.empty(), "datasets must not be empty");
  cfg.net.input_size = pristine.images.front().width;
  cfg.train_generator = fake.manifest.records.front().generator;
  parse_or_usage([&] { net_for_variant(v, cfg.net).validate(); return 0; }, "network");

  const fs::path history = o.history.empty() ? fs::path(o.out).replace_extension(".history.csv") : o.history;
  std::cout << "train: variant=" << to_string(v) << " protocol=" << to_string(p)
            << " train_gen=" << to_string(cfg.train_generator) << " seed=" << cfg.seed << " epochs=" << cfg.epochs
            << " batch=" << cfg.batch_size << " lr=" << format_double(cfg.lr) << " wd=" << format_double(cfg.weight_decay)
            << (cfg.decoupled_weight_decay ? " (decoupled)" : "") << " alpha=" << format_double(cfg.loss.alpha)
            << " gamma=" << format_double(cfg.loss.gamma) << " lambda=" << format_double(cfg.loss.lambda)
            << " flip=" << format_double(cfg.flip_prob) << " net=" << cfg.net.input_size << "px/stem"
            << cfg.net.stem_channels << "/blocks" << cfg.net.blocks << "x" << cfg.net.layers_per_block << "/growth"
            << cfg.net.growth << "\n";

  SampleSet train, val;
  train.append(pristine, Split::train);
  train.append(fake, Split::train);
  val.append(pristine, Split::val);
  val.append(fake, Split::val);
  const auto result = train_model(cfg, train, val, [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " train_loss " << format_double(r.train_loss) << " val_loss "
              << format_double(r.val_loss) << std::endl;
  });
  save_checkpoint(result.best, o.out);
  write_file_atomic(history, history_csv(result.history));
  std::cout << "best epoch " << result.best_epoch << " val_loss " << format_double(result.best.best.value) << "; wrote "
            << o.out.string() << " and " << history.string() << "\n";
}

// ---- eval ------------------------------------------------------------------

struct EvalOpts {
  fs::path model, pristine, fake, scores, report, roc;
  bool aug = false;
  std::optional<std::uint64_t> eval_seed;
  std::string split = "test";
};

void run_eval(const EvalOpts& o) {
  if (o.aug && !o.eval_seed) usage("--aug requires --eval-seed");
  if (!o.aug && o.eval_seed) usage("--eval-seed is only meaningful with --aug");
  const Split split = parse_or_usage([&] { return parse_split(o.split); }, "--split");
  std::cout << "eval: model=" << o.model.string() << " split=" << to_string(split)
            << " aug=" << (o.aug ? "with" : "none");
  if (o.eval_seed) std::cout << " eval_seed=" << *o.eval_seed;
  std::cout << "\n";

  const NetworkState state = load_checkpoint(o.model);
  const Dataset pristine = load_dataset(o.pristine);
  const Dataset fake = load_dataset(o.fake);
  SampleSet test;
  test.append(pristine, split);
  test.append(fake, split);
  require(test.size() > 0, "selected split is empty");
  const auto scores = evaluate_model(state, test, o.aug ? o.eval_seed : std::nullopt);
  const auto report = evaluate_scores(scores);

  nlohmann::ordered_json j;
  j["model"] = o.model.string();
  j["mode"] = std::string(to_string(default_mode(state.config)));
  j["split"] = std::string(to_string(split));
  j["aug"] = o.aug ? "with" : "none";
  if (o.eval_seed) j["eval_seed"] = *o.eval_seed;
  j["auc"] = report.auc;
  j["d_eer"] = report.d_eer;
  j["d_eer_pct"] = format_percent(report.d_eer);
  j["n_pos"] = report.n_pos;
  j["n_neg"] = report.n_neg;
  write_scores_csv(scores, o.scores);
  write_file_atomic(o.report, j.dump(2) + "\n");
  if (!o.roc.empty()) write_roc_csv(report.curve, o.roc);
  std::cout << "auc " << format_double(report.auc) << " d_eer " << format_percent(report.d_eer) << "%\n";
}

// ---- fuse ------------------------------------------------------------------

struct FuseOpts {
  fs::path a, b, out;
};

void run_fuse(const FuseOpts& o) {
  std::cout << "fuse: a=" << o.a.string() << " b=" << o.b.string() << "\n";
  const auto fused = fuse_scores(read_scores_csv(o.a), read_scores_csv(o.b));
  write_scores_csv(fused, o.out);
  std::cout << "wrote " << fused.size() << " rows to " << o.out.string() << "\n";
}

// ---- compare ---------------------------------------------------------------

struct CompareOpts {
  fs::path config, out;
  int jobs = 0;
};

void run_compare(const CompareOpts& o) {
  if (!fs::exists(o.config)) usage("config " + o.config.string() + " does not exist");
  GridConfig g = parse_or_usage(
      [&] { return parse_grid_config(read_file(o.config), fs::absolute(o.config).parent_path()); }, "--config");
  if (o.jobs > 0) g.jobs = o.jobs;
  std::cout << "compare: protocol=" << to_string(g.protocol) << " seeds=";
  for (std::size_t i = 0; i < g.seeds.size(); ++i) std::cout << (i ? "," : "") << g.seeds[i];
  std::cout << " eval_seed=" << g.eval_seed << " variants=";
  for (std::size_t i = 0; i < g.variants.size(); ++i) std::cout << (i ? "," : "") << to_string(g.variants[i]);
  std::cout << " epochs=" << g.base.epochs << " batch=" << g.base.batch_size << " lr=" << format_double(g.base.lr)
            << " gamma=" << format_double(g.base.loss.gamma) << " lambda=" << format_double(g.base.loss.lambda)
            << " jobs=" << g.jobs << " out_dir=" << g.out_dir.string() << "\n";

  const auto result = run_leave_one_out(g, [](const std::string& line) { std::cout << line << std::endl; });
  write_file_atomic(o.out, report_table(result.grid));
  std::cout << "trained " << result.trained << ", reused " << result.resumed << "; wrote " << o.out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-channel cross-modal synthetic-image detector (desk scale)"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenOpts gen;
  auto* g = app.add_subcommand("gen", "generate a toy dataset");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--generator", gen.generator, "pristine|freqfake|spatialfake")->required();
  g->add_option("--count", gen.count, "number of images")->required();
  g->add_option("--size", gen.size, "image side (even, >= 16)")->capture_default_str();
  g->add_option("--seed", gen.seed, "generation and split seed")->required();
  g->add_option("--ratios", gen.ratios, "train,val,test fractions");
  g->add_flag("--force", gen.force, "overwrite a non-empty output directory");

  SpectrumOpts spec;
  auto* s = app.add_subcommand("spectrum", "average log-magnitude spectrum of a dataset");
  s->add_option("--in", spec.in, "dataset directory")->required();
  s->add_option("--sample", spec.sample, "images to average")->capture_default_str();
  s->add_option("--seed", spec.seed, "sampling seed")->required();
  s->add_option("--out", spec.out, "PGM output")->required();
  s->add_option("--csv", spec.csv, "raw spectrum CSV for one channel");
  s->add_option("--channel", spec.channel, "channel written to --csv")->check(CLI::Range(0, 2))->capture_default_str();
  s->add_flag("--no-highpass", spec.no_highpass, "skip the median residual");

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "train one model");
  t->add_option("--pristine", tr.pristine)->required();
  t->add_option("--fake", tr.fake)->required();
  t->add_option("--variant", tr.variant, "dual_cmfl|dual_bce|one_rgb|one_dft")->capture_default_str();
  t->add_option("--protocol", tr.protocol, "I|II")->capture_default_str();
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--batch", tr.batch)->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--wd", tr.wd, "weight decay")->capture_default_str();
  t->add_flag("--decoupled-wd", tr.decoupled, "decoupled (AdamW) weight decay");
  t->add_option("--gamma", tr.gamma)->capture_default_str();
  t->add_option("--lambda", tr.lambda)->capture_default_str();
  t->add_option("--alpha", tr.alpha)->capture_default_str();
  t->add_option("--flip", tr.flip, "horizontal flip probability")->capture_default_str();
  t->add_flag("--bce-all-heads", tr.bce_all_heads, "dual_bce: supervise every head");
  t->add_option("--stem", tr.stem)->capture_default_str();
  t->add_option("--blocks", tr.blocks)->capture_default_str();
  t->add_option("--layers", tr.layers, "dense layers per block")->capture_default_str();
  t->add_option("--growth", tr.growth)->capture_default_str();
  t->add_option("--seed", tr.seed)->required();
  t->add_option("--out", tr.out, "checkpoint path")->required();
  t->add_option("--history", tr.history, "history CSV (default: <out> with extension .history.csv)");

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "score a split with a checkpoint");
  e->add_option("--model", ev.model)->required();
  e->add_option("--pristine", ev.pristine)->required();
  e->add_option("--fake", ev.fake)->required();
  e->add_flag("--aug", ev.aug, "deterministic blur+JPEG on test images");
  e->add_option("--eval-seed", ev.eval_seed, "seed for --aug");
  e->add_option("--split", ev.split)->capture_default_str();
  e->add_option("--scores", ev.scores)->required();
  e->add_option("--report", ev.report)->required();
  e->add_option("--roc", ev.roc, "ROC points CSV");

  FuseOpts fu;
  auto* f = app.add_subcommand("fuse", "average two score files");
  f->add_option("--scores-a", fu.a)->required();
  f->add_option("--scores-b", fu.b)->required();
  f->add_option("--out", fu.out)->required();

  CompareOpts cmp;
  auto* c = app.add_subcommand("compare", "leave-one-out grid and report table");
  c->add_option("--config", cmp.config, "grid JSON (see docs/grid_config.md)")->required();
  c->add_option("--out", cmp.out, "report table CSV")->required();
  c->add_option("--jobs", cmp.jobs, "parallel train units (overrides the config)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (g->parsed()) run_gen(gen);
    else if (s->parsed()) run_spectrum(spec);
    else if (t->parsed()) run_train(tr);
    else if (e->parsed()) run_eval(ev);
    else if (f->parsed()) run_fuse(fu);
    else if (c->parsed()) run_compare(cmp);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
