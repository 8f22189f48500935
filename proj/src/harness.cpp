#include "mccm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <json.hpp>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "mccm/error.hpp"
#include "mccm/freqspec.hpp"
#include "mccm/io.hpp"
#include "mccm/rng.hpp"

namespace mccm {

namespace {

constexpr std::uint64_t kRunStreamSalt = 0x7261696E5F72756EULL;  // separates run draws from init draws
constexpr std::size_t kEvalChunk = 32;

struct SampleObjective {
  double loss = 0.0;
  HeadGrads grad;
};

SampleObjective objective(const HeadOutputs& h, int y, const ExperimentConfig& cfg) {
  const double eps = cfg.loss.clamp_eps;
  SampleObjective o;
  switch (cfg.variant) {
    case Variant::dual_cmfl:
      o.loss = total_loss(h, y, cfg.loss).total;
      o.grad = total_loss_grad(h, y, cfg.loss);
      break;
    case Variant::dual_bce: {
      const double r = clamp_prob(h.r, eps);
      o.loss = bce_loss(r, y);
      o.grad.dr = bce_grad(r, y);
      if (cfg.bce_all_heads) {
        const double s = clamp_prob(h.s, eps), f = clamp_prob(h.f, eps);
        o.loss += bce_loss(s, y) + bce_loss(f, y);
        o.grad.ds = bce_grad(s, y);
        o.grad.df = bce_grad(f, y);
      }
      break;
    }
    case Variant::one_rgb: {
      const double s = clamp_prob(h.s, eps);
      o.loss = bce_loss(s, y);
      o.grad.ds = bce_grad(s, y);
      break;
    }
    case Variant::one_dft: {
      const double f = clamp_prob(h.f, eps);
      o.loss = bce_loss(f, y);
      o.grad.df = bce_grad(f, y);
      break;
    }
    case Variant::fusion: fail(Errc::invalid_argument, "fusion has no training objective");
  }
  return o;
}

void check_both_classes(const SampleSet& set, const std::string& what) {
  require(set.images.size() == set.size() && set.labels.size() == set.size(), what + ": inconsistent sample set");
  bool pos = false, neg = false;
  for (int y : set.labels) (y == 1 ? pos : neg) = true;
  if (!pos || !neg) fail(Errc::single_class, what + " split must contain both classes");
}

std::vector<FreqInput> freq_inputs(const std::vector<RgbImage>& rgb) {
  std::vector<FreqInput> out;
  out.reserve(rgb.size());
  for (const auto& im : rgb) out.push_back(to_freq_input(im));
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

}  // namespace

std::string_view to_string(Protocol p) { return p == Protocol::I ? "I" : "II"; }

Protocol parse_protocol(std::string_view s) {
  if (s == "I" || s == "1") return Protocol::I;
  if (s == "II" || s == "2") return Protocol::II;
  fail(Errc::invalid_argument, "unknown protocol '" + std::string(s) + "' (expected I or II)");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::dual_cmfl: return "dual_cmfl";
    case Variant::dual_bce: return "dual_bce";
    case Variant::one_rgb: return "one_rgb";
    case Variant::one_dft: return "one_dft";
    case Variant::fusion: return "fusion";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  for (Variant v : {Variant::dual_cmfl, Variant::dual_bce, Variant::one_rgb, Variant::one_dft, Variant::fusion})
    if (s == to_string(v)) return v;
  fail(Errc::invalid_argument, "unknown variant '" + std::string(s) + "'");
}

NetConfig net_for_variant(Variant v, NetConfig base) {
  switch (v) {
    case Variant::dual_cmfl:
    case Variant::dual_bce: base.spatial_head = base.frequency_head = base.joint_head = true; break;
    case Variant::one_rgb:
      base.spatial_head = true;
      base.frequency_head = base.joint_head = false;
      break;
    case Variant::one_dft:
      base.frequency_head = true;
      base.spatial_head = base.joint_head = false;
      break;
    case Variant::fusion: fail(Errc::invalid_argument, "fusion combines two trained single-channel models");
  }
  return base;
}

void SampleSet::append(const Dataset& ds, Split split) {
  for (std::size_t i : ds.indices(split)) {
    ids.push_back(ds.manifest.records[i].id);
    labels.push_back(ds.manifest.records[i].label);
    images.push_back(&ds.images[i]);
  }
}

double validation_loss(const NetworkState& state, const ExperimentConfig& cfg, const SampleSet& set) {
  require(set.size() > 0, "validation set is empty");
  const bool need_f = state.config.has_frequency_branch();
  double sum = 0.0;
  for (std::size_t start = 0; start < set.size(); start += kEvalChunk) {
    const std::size_t end = std::min(set.size(), start + kEvalChunk);
    std::vector<RgbImage> rgb;
    for (std::size_t i = start; i < end; ++i) rgb.push_back(*set.images[i]);
    const auto freq = need_f ? freq_inputs(rgb) : std::vector<FreqInput>{};
    const auto res = forward(state, rgb, freq);
    for (std::size_t i = start; i < end; ++i) sum += objective(res.heads[i - start], set.labels[i], cfg).loss;
  }
  return sum / static_cast<double>(set.size());
}

TrainResult train_model(const ExperimentConfig& cfg, const SampleSet& train, const SampleSet& val,
                        const ProgressFn& progress) {
  require(cfg.variant != Variant::fusion, "fusion is not trained; fuse two single-channel models instead");
  require(cfg.epochs >= 1 && cfg.batch_size >= 1, "epochs and batch size must be >= 1");
  require(cfg.flip_prob >= 0.0 && cfg.flip_prob <= 1.0, "flip probability must be in [0,1]");
  cfg.loss.validate();
  check_both_classes(train, "train");
  check_both_classes(val, "validation");

  NetConfig nc = net_for_variant(cfg.variant, cfg.net);
  nc.seed = cfg.seed;
  NetworkState state = init_network(nc);
  const bool need_f = nc.has_frequency_branch();
  const AdamConfig adam{cfg.lr, cfg.weight_decay, 0.9, 0.999, 1e-8, cfg.decoupled_weight_decay};

  SplitMix64 rng(cfg.seed ^ kRunStreamSalt);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.best = state;
  double best_val = 0.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<RgbImage> rgb;
      std::vector<int> labels;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const int y = train.labels[idx];
        RgbImage img = *train.images[idx];
        // Draws happen in the same order for every variant.
        const bool flip = rng.uniform() < cfg.flip_prob;
        result.counters.seen[y]++;
        if (flip) {
          img = hflip(img);
          result.counters.flipped[y]++;
        }
        if (cfg.protocol == Protocol::II) {
          AugmentSpec spec;
          spec.sigma = rng.uniform() * 2.0;
          spec.quality = kJpegQualities[rng.below(kJpegQualities.size())];
          img = apply_augment(img, spec);
          result.counters.degraded[y]++;
        }
        rgb.push_back(std::move(img));
        labels.push_back(y);
      }
      const auto freq = need_f ? freq_inputs(rgb) : std::vector<FreqInput>{};
      const auto res = forward(state, rgb, freq);
      const double scale = 1.0 / static_cast<double>(rgb.size());
      std::vector<HeadGrads> grads(rgb.size());
      for (std::size_t k = 0; k < rgb.size(); ++k) {
        const auto o = objective(res.heads[k], labels[k], cfg);
        loss_sum += o.loss;
        grads[k] = {o.grad.ds * scale, o.grad.df * scale, o.grad.dr * scale};
      }
      const ParamSet g = backward(state, res.cache, grads);
      adam_step(state, g, adam);
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), validation_loss(state, cfg, val)};
    result.history.push_back(rec);
    if (result.best_epoch < 0 || rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.best_epoch = epoch;
      result.best = state;
      result.best.best = {epoch, rec.val_loss};
    }
    if (progress) progress(rec);
  }
  return result;
}

ScoreSet fuse_scores(const ScoreSet& a, const ScoreSet& b) {
  std::map<std::string, const ScoreEntry*> by_id;
  for (const auto& e : b) by_id.emplace(e.id, &e);
  std::vector<std::string> offenders;
  std::set<std::string> seen;
  ScoreSet out;
  for (const auto& e : a) {
    seen.insert(e.id);
    auto it = by_id.find(e.id);
    if (it == by_id.end()) {
      offenders.push_back(e.id + " (only in a)");
      continue;
    }
    out.push_back({e.id, e.label, fusion_score(e.score, it->second->score)});
  }
  for (const auto& e : b)
    if (!seen.count(e.id)) offenders.push_back(e.id + " (only in b)");
  if (a.size() != seen.size() || b.size() != by_id.size()) offenders.push_back("<duplicate ids>");
  if (!offenders.empty()) {
    std::string msg = "score files disagree on ids:";
    for (std::size_t i = 0; i < offenders.size() && i < 20; ++i) msg += " " + offenders[i];
    if (offenders.size() > 20) msg += " ... (" + std::to_string(offenders.size()) + " total)";
    fail(Errc::id_mismatch, msg);
  }
  return out;
}

std::vector<RgbImage> prepare_eval_images(const SampleSet& test, std::optional<std::uint64_t> eval_seed) {
  std::vector<RgbImage> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i)
    out.push_back(eval_seed ? apply_augment(*test.images[i], deterministic_eval_aug(test.ids[i], *eval_seed))
                            : *test.images[i]);
  return out;
}

ScoreSet score_images(const NetworkState& state, const SampleSet& test, const std::vector<RgbImage>& images) {
  require(images.size() == test.size(), "score_images: image count does not match the sample set");
  const PredictMode mode = default_mode(state.config);
  const bool need_f = mode != PredictMode::rgb_only;
  ScoreSet out;
  out.reserve(test.size());
  for (std::size_t start = 0; start < images.size(); start += kEvalChunk) {
    const std::size_t end = std::min(images.size(), start + kEvalChunk);
    const std::span<const RgbImage> chunk(images.data() + start, end - start);
    std::vector<FreqInput> freq;
    if (need_f)
      for (const auto& im : chunk) freq.push_back(to_freq_input(im));
    const std::span<const RgbImage> rgb = mode == PredictMode::dft_only ? std::span<const RgbImage>{} : chunk;
    const auto scores = predict(state, rgb, freq, mode);
    for (std::size_t i = start; i < end; ++i) out.push_back({test.ids[i], test.labels[i], scores[i - start]});
  }
  return out;
}

ScoreSet evaluate_model(const NetworkState& state, const SampleSet& test, std::optional<std::uint64_t> eval_seed) {
  require(test.size() > 0, "test split is empty");
  return score_images(state, test, prepare_eval_images(test, eval_seed));
}

ScoreSet evaluate_fusion(const NetworkState& rgb_model, const NetworkState& dft_model, const SampleSet& test,
                         std::optional<std::uint64_t> eval_seed) {
  require(rgb_model.config.spatial_head && !rgb_model.config.joint_head, "fusion needs a one_rgb model first");
  require(dft_model.config.frequency_head && !dft_model.config.joint_head, "fusion needs a one_dft model second");
  const auto images = prepare_eval_images(test, eval_seed);
  return fuse_scores(score_images(rgb_model, test, images), score_images(dft_model, test, images));
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (const auto& r : history)
    out += std::to_string(r.epoch) + ',' + format_double(r.train_loss) + ',' + format_double(r.val_loss) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Leave-one-out grid

GridConfig parse_grid_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, std::string("grid config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), "grid config must be a JSON object");
  auto check_keys = [](const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
      require(ok, "unknown key '" + it.key() + "' in " + where);
    }
  };
  check_keys(j, {"pristine", "fakes", "protocol", "variants", "seeds", "eval_seed", "out_dir", "jobs", "train", "loss", "net"},
             "grid config");
  auto path_of = [&](const json& v) {
    std::filesystem::path p = v.get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };

  GridConfig g;
  try {
    g.pristine_dir = path_of(j.at("pristine"));
    for (auto it = j.at("fakes").begin(); it != j.at("fakes").end(); ++it) {
      const Generator gen = parse_generator(it.key());
      require(gen != Generator::pristine, "'fakes' must list synthetic generators");
      g.fake_dirs[gen] = path_of(it.value());
    }
    g.out_dir = path_of(j.at("out_dir"));
    if (j.contains("protocol")) g.protocol = parse_protocol(j["protocol"].get<std::string>());
    if (j.contains("variants")) {
      g.variants.clear();
      for (const auto& v : j["variants"]) g.variants.push_back(parse_variant(v.get<std::string>()));
    }
    if (j.contains("seeds")) g.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("eval_seed")) g.eval_seed = j["eval_seed"].get<std::uint64_t>();
    if (j.contains("jobs")) g.jobs = j["jobs"].get<int>();
    if (j.contains("train")) {
      const auto& t = j["train"];
      check_keys(t, {"epochs", "batch_size", "lr", "weight_decay", "flip_prob", "decoupled_weight_decay", "bce_all_heads"},
                 "train");
      g.base.epochs = t.value("epochs", g.base.epochs);
      g.base.batch_size = t.value("batch_size", g.base.batch_size);
      g.base.lr = t.value("lr", g.base.lr);
      g.base.weight_decay = t.value("weight_decay", g.base.weight_decay);
      g.base.flip_prob = t.value("flip_prob", g.base.flip_prob);
      g.base.decoupled_weight_decay = t.value("decoupled_weight_decay", g.base.decoupled_weight_decay);
      g.base.bce_all_heads = t.value("bce_all_heads", g.base.bce_all_heads);
    }
    if (j.contains("loss")) {
      const auto& l = j["loss"];
      check_keys(l, {"alpha", "gamma", "lambda", "clamp_eps"}, "loss");
      g.base.loss.alpha = l.value("alpha", g.base.loss.alpha);
      g.base.loss.gamma = l.value("gamma", g.base.loss.gamma);
      g.base.loss.lambda = l.value("lambda", g.base.loss.lambda);
      g.base.loss.clamp_eps = l.value("clamp_eps", g.base.loss.clamp_eps);
    }
    if (j.contains("net")) {
      const auto& n = j["net"];
      check_keys(n, {"input_size", "stem_channels", "blocks", "layers_per_block", "growth"}, "net");
      if (n.contains("input_size")) {
        g.base.net.input_size = n["input_size"].get<int>();
        g.input_size_from_data = false;
      }
      g.base.net.stem_channels = n.value("stem_channels", g.base.net.stem_channels);
      g.base.net.blocks = n.value("blocks", g.base.net.blocks);
      g.base.net.layers_per_block = n.value("layers_per_block", g.base.net.layers_per_block);
      g.base.net.growth = n.value("growth", g.base.net.growth);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::invalid_argument, std::string("grid config: ") + e.what());
  }
  g.base.protocol = g.protocol;
  return g;
}

std::vector<CellKey> expected_cells(const GridConfig& cfg) {
  std::vector<std::string> augs{"none"};
  if (cfg.protocol == Protocol::II) augs.push_back("with");
  std::vector<CellKey> out;
  for (auto seed : cfg.seeds)
    for (const auto& [train_gen, _] : cfg.fake_dirs)
      for (Variant v : cfg.variants)
        for (const auto& [test_gen, __] : cfg.fake_dirs) {
          if (test_gen == train_gen) continue;
          for (const auto& aug : augs)
            out.push_back({std::string(to_string(v)), std::string(to_string(cfg.protocol)),
                           std::string(to_string(train_gen)), std::string(to_string(test_gen)), aug, seed});
        }
  return out;
}

namespace {

std::string fingerprint(const ExperimentConfig& c, const std::string& data_tag) {
  const auto& n = c.net;
  const auto& l = c.loss;
  std::string s = std::string(to_string(c.variant)) + "|" + std::string(to_string(c.protocol)) + "|" +
                  std::string(to_string(c.train_generator)) + "|" + std::to_string(c.seed) + "|" +
                  std::to_string(c.epochs) + "|" + std::to_string(c.batch_size) + "|" + format_double(c.lr) + "|" +
                  format_double(c.weight_decay) + "|" + std::to_string(c.decoupled_weight_decay) + "|" +
                  std::to_string(c.bce_all_heads) + "|" + format_double(c.flip_prob) + "|" + format_double(l.alpha) +
                  "|" + format_double(l.gamma) + "|" + format_double(l.lambda) + "|" + format_double(l.clamp_eps) +
                  "|" + std::to_string(n.input_size) + "|" + std::to_string(n.stem_channels) + "|" +
                  std::to_string(n.blocks) + "|" + std::to_string(n.layers_per_block) + "|" +
                  std::to_string(n.growth) + "|" + data_tag;
  return hex64(fnv1a64(s));
}

bool verify_cell(const std::filesystem::path& dir, const std::string& fp) {
  const auto manifest = dir / "cell.json";
  if (!std::filesystem::exists(manifest)) return false;
  try {
    const auto j = nlohmann::json::parse(read_file(manifest));
    if (j.at("fingerprint").get<std::string>() != fp) return false;
    for (auto it = j.at("files").begin(); it != j.at("files").end(); ++it) {
      const auto p = dir / it.key();
      if (!std::filesystem::exists(p) || hex64(fnv1a64(read_file(p))) != it.value().get<std::string>()) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

void write_cell_manifest(const std::filesystem::path& dir, const std::string& fp,
                         const std::vector<std::string>& files) {
  nlohmann::json j;
  j["fingerprint"] = fp;
  j["files"] = nlohmann::json::object();
  for (const auto& f : files) j["files"][f] = hex64(fnv1a64(read_file(dir / f)));
  write_file_atomic(dir / "cell.json", j.dump(2) + "\n");
}

std::string scores_name(Generator test_gen, const std::string& aug) {
  return "scores_" + std::string(to_string(test_gen)) + "_" + aug + ".csv";
}

struct UnitOutput {
  // (variant, test_gen, aug) -> scores
  std::map<std::tuple<Variant, Generator, std::string>, ScoreSet> scores;
  std::size_t trained = 0;
  std::size_t resumed = 0;
};

}  // namespace

GridResult run_leave_one_out(const GridConfig& grid_cfg, const LogFn& log) {
  GridConfig cfg = grid_cfg;
  require(cfg.fake_dirs.size() >= 2, "leave-one-out needs at least two fake generators");
  require(!cfg.seeds.empty() && !cfg.variants.empty(), "grid needs at least one seed and one variant");
  require(cfg.jobs >= 1, "jobs must be >= 1");

  std::mutex log_mu;
  auto say = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard<std::mutex> lock(log_mu);
    log(msg);
  };

  const Dataset pristine = load_dataset(cfg.pristine_dir);
  std::map<Generator, Dataset> fakes;
  for (const auto& [g, dir] : cfg.fake_dirs) fakes.emplace(g, load_dataset(dir));

  require(!pristine.images.empty(), "pristine dataset is empty");
  const int side = pristine.images.front().width;
  auto check_side = [&](const Dataset& ds) {
    for (const auto& im : ds.images)
      require(im.width == side && im.height == side, "all grid images must be " + std::to_string(side) + "x" +
                                                          std::to_string(side) + " (" + ds.root.string() + ")");
  };
  check_side(pristine);
  for (const auto& [g, ds] : fakes) check_side(ds);
  if (cfg.input_size_from_data) cfg.base.net.input_size = side;
  require(cfg.base.net.input_size == side, "net.input_size " + std::to_string(cfg.base.net.input_size) +
                                               " does not match the " + std::to_string(side) + "px images");

  std::string data_tag = hex64(fnv1a64(read_file(cfg.pristine_dir / "manifest.csv")));
  for (const auto& [g, dir] : cfg.fake_dirs) data_tag += hex64(fnv1a64(read_file(dir / "manifest.csv")));

  auto split_of = [&](const Dataset& fake, Split s, const std::string& what) {
    SampleSet set;
    set.append(pristine, s);
    set.append(fake, s);
    bool pos = false, neg = false;
    for (int y : set.labels) (y == 1 ? pos : neg) = true;
    require(pos && neg, "missing " + std::string(to_string(s)) + " split for " + what);
    return set;
  };

  std::vector<std::string> augs{"none"};
  if (cfg.protocol == Protocol::II) augs.push_back("with");

  std::vector<Variant> trainable;
  auto want = [&](Variant v) {
    return std::find(cfg.variants.begin(), cfg.variants.end(), v) != cfg.variants.end();
  };
  const bool fusion = want(Variant::fusion);
  for (Variant v : {Variant::dual_cmfl, Variant::dual_bce, Variant::one_rgb, Variant::one_dft})
    if (want(v) || (fusion && (v == Variant::one_rgb || v == Variant::one_dft))) trainable.push_back(v);

  struct Unit {
    std::uint64_t seed;
    Generator train_gen;
  };
  std::vector<Unit> units;
  for (auto seed : cfg.seeds)
    for (const auto& [g, _] : cfg.fake_dirs) units.push_back({seed, g});

  std::vector<UnitOutput> outputs(units.size());
  std::vector<std::exception_ptr> errors(units.size());

  auto run_unit = [&](std::size_t ui) {
    const Unit& u = units[ui];
    UnitOutput& out = outputs[ui];
    const std::string gname(to_string(u.train_gen));
    const auto unit_dir = cfg.out_dir / ("seed-" + std::to_string(u.seed)) / ("train-" + gname);
    const SampleSet train = split_of(fakes.at(u.train_gen), Split::train, gname);
    const SampleSet val = split_of(fakes.at(u.train_gen), Split::val, gname);

    // Test sets and their (shared) evaluation images per held-out generator and aug mode.
    std::map<Generator, SampleSet> tests;
    for (const auto& [h, ds] : fakes)
      if (h != u.train_gen) tests.emplace(h, split_of(ds, Split::test, std::string(to_string(h))));
    std::map<std::pair<Generator, std::string>, std::vector<RgbImage>> eval_images;
    auto images_for = [&](Generator h, const std::string& aug) -> const std::vector<RgbImage>& {
      auto key = std::make_pair(h, aug);
      auto it = eval_images.find(key);
      if (it == eval_images.end()) {
        std::optional<std::uint64_t> seed;
        if (aug == "with") seed = cfg.eval_seed;
        it = eval_images.emplace(key, prepare_eval_images(tests.at(h), seed)).first;
      }
      return it->second;
    };

    for (Variant v : trainable) {
      ExperimentConfig ec = cfg.base;
      ec.protocol = cfg.protocol;
      ec.train_generator = u.train_gen;
      ec.variant = v;
      ec.seed = u.seed;
      const auto dir = unit_dir / std::string(to_string(v));
      const std::string fp = fingerprint(ec, data_tag);
      const std::string tag = "seed " + std::to_string(u.seed) + " train " + gname + " " + std::string(to_string(v));

      if (verify_cell(dir, fp)) {
        for (const auto& [h, test] : tests)
          for (const auto& aug : augs) out.scores[{v, h, aug}] = read_scores_csv(dir / scores_name(h, aug));
        ++out.resumed;
        say(tag + ": verified artifacts, skipping");
        continue;
      }

      std::filesystem::create_directories(dir);
      say(tag + ": training");
      const auto result = train_model(ec, train, val, [&](const EpochRecord& r) {
        say(tag + ": epoch " + std::to_string(r.epoch) + " train " + format_double(r.train_loss) + " val " +
            format_double(r.val_loss));
      });
      save_checkpoint(result.best, dir / "model.ckpt");
      write_file_atomic(dir / "history.csv", history_csv(result.history));
      std::vector<std::string> files{"model.ckpt", "history.csv"};
      for (const auto& [h, test] : tests)
        for (const auto& aug : augs) {
          auto scores = score_images(result.best, test, images_for(h, aug));
          write_scores_csv(scores, dir / scores_name(h, aug));
          files.push_back(scores_name(h, aug));
          out.scores[{v, h, aug}] = std::move(scores);
        }
      write_cell_manifest(dir, fp, files);
      ++out.trained;
    }

    if (fusion) {
      const auto dir = unit_dir / "fusion";
      ExperimentConfig ec = cfg.base;
      ec.protocol = cfg.protocol;
      ec.train_generator = u.train_gen;
      ec.variant = Variant::fusion;
      ec.seed = u.seed;
      const std::string fp = fingerprint(ec, data_tag);
      std::filesystem::create_directories(dir);
      std::vector<std::string> files;
      for (const auto& [h, test] : tests)
        for (const auto& aug : augs) {
          auto fused = fuse_scores(out.scores.at({Variant::one_rgb, h, aug}), out.scores.at({Variant::one_dft, h, aug}));
          if (!verify_cell(dir, fp)) write_scores_csv(fused, dir / scores_name(h, aug));
          files.push_back(scores_name(h, aug));
          out.scores[{Variant::fusion, h, aug}] = std::move(fused);
        }
      if (!verify_cell(dir, fp)) write_cell_manifest(dir, fp, files);
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      try {
        run_unit(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int nthreads = std::min<int>(cfg.jobs, static_cast<int>(units.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  GridResult res;
  res.grid.expected = expected_cells(cfg);
  for (std::size_t ui = 0; ui < units.size(); ++ui) {
    res.trained += outputs[ui].trained;
    res.resumed += outputs[ui].resumed;
  }
  for (const auto& key : res.grid.expected) {
    for (std::size_t ui = 0; ui < units.size(); ++ui) {
      if (units[ui].seed != key.seed || to_string(units[ui].train_gen) != key.train_gen) continue;
      const auto it = outputs[ui].scores.find({parse_variant(key.variant), parse_generator(key.test_gen), key.aug});
      if (it == outputs[ui].scores.end()) continue;
      GridCellResult cell{key, key.seed, evaluate_scores(it->second), it->second};
      res.grid.reports[key] = cell.report;
      res.cells.push_back(std::move(cell));
    }
  }
  return res;
}

}  // namespace mccm
