#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mccm/dataset.hpp"
#include "mccm/evalkit.hpp"
#include "mccm/loss.hpp"
#include "mccm/net.hpp"

namespace mccm {

enum class Protocol { I, II };
enum class Variant { dual_cmfl, dual_bce, one_rgb, one_dft, fusion };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view s);
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

/// Heads enabled for a trainable variant.
NetConfig net_for_variant(Variant v, NetConfig base);

struct ExperimentConfig {
  Protocol protocol = Protocol::I;
  Generator train_generator = Generator::freqfake;
  Variant variant = Variant::dual_cmfl;
  LossConfig loss;
  NetConfig net;
  int epochs = 25;
  int batch_size = 32;  // full-scale runs used 128
  double lr = 1e-4;
  double weight_decay = 1e-5;
  bool decoupled_weight_decay = false;
  /// dual_bce only: also put BCE on the spatial and frequency heads.
  bool bce_all_heads = false;
  double flip_prob = 0.5;
  std::uint64_t seed = 0;
};

/// Non-owning view of labeled images.
struct SampleSet {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<const RgbImage*> images;

  std::size_t size() const { return ids.size(); }
  void append(const Dataset& ds, Split split);
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// Instrumentation of train-time augmentation, per label (index = label).
struct AugmentCounters {
  std::size_t flipped[2] = {0, 0};
  std::size_t degraded[2] = {0, 0};
  std::size_t seen[2] = {0, 0};
};

struct TrainResult {
  NetworkState best;
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  AugmentCounters counters;
};

using ProgressFn = std::function<void(const EpochRecord&)>;

/// Seeded epoch loop with per-sample flip (and Protocol II blur+JPEG on both
/// classes), Adam updates, and best-validation retention (ties keep the
/// earliest epoch).
TrainResult train_model(const ExperimentConfig& cfg, const SampleSet& train, const SampleSet& val,
                        const ProgressFn& progress = {});

/// Mean objective of the variant over a sample set, no augmentation.
double validation_loss(const NetworkState& state, const ExperimentConfig& cfg, const SampleSet& set);

inline double fusion_score(double score_rgb, double score_dft) { return (score_rgb + score_dft) / 2.0; }

/// Row-wise mean. Ids must match as sets; output order follows `a`.
ScoreSet fuse_scores(const ScoreSet& a, const ScoreSet& b);

/// Images exactly as a model sees them at test time: untouched, or degraded
/// with deterministic_eval_aug(id, eval_seed).
std::vector<RgbImage> prepare_eval_images(const SampleSet& test, std::optional<std::uint64_t> eval_seed);

/// Scores with the network's natural head (joint for dual networks).
ScoreSet score_images(const NetworkState& state, const SampleSet& test, const std::vector<RgbImage>& images);

ScoreSet evaluate_model(const NetworkState& state, const SampleSet& test, std::optional<std::uint64_t> eval_seed);
ScoreSet evaluate_fusion(const NetworkState& rgb_model, const NetworkState& dft_model, const SampleSet& test,
                         std::optional<std::uint64_t> eval_seed);

std::string history_csv(const std::vector<EpochRecord>& history);

/// Leave-one-out comparison grid.
struct GridConfig {
  std::filesystem::path pristine_dir;
  std::map<Generator, std::filesystem::path> fake_dirs;  // >= 2 generators
  Protocol protocol = Protocol::I;
  std::vector<Variant> variants{Variant::dual_cmfl, Variant::dual_bce, Variant::one_rgb, Variant::one_dft,
                                Variant::fusion};
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t eval_seed = 7;
  ExperimentConfig base;
  /// Take base.net.input_size from the images instead of the config.
  bool input_size_from_data = true;
  std::filesystem::path out_dir;
  int jobs = 1;
};

/// Parses the JSON grid document (schema in docs/grid_config.md).
GridConfig parse_grid_config(const std::string& json_text, const std::filesystem::path& base_dir);

struct GridCellResult {
  CellKey key;
  std::uint64_t seed = 0;
  EvalReport report;
  ScoreSet scores;
};

struct GridResult {
  ReportGrid grid;
  std::vector<GridCellResult> cells;
  std::size_t trained = 0;  // models trained in this call (0 when fully resumed)
  std::size_t resumed = 0;
};

/// Expected cells: for each seed, each train generator, each variant, each
/// held-out generator, and each aug mode ("none", plus "with" for Protocol II).
std::vector<CellKey> expected_cells(const GridConfig& cfg);

using LogFn = std::function<void(const std::string&)>;

/// Trains (or resumes) every model and evaluates every cell. Model directories
/// carry a checksum manifest; verified directories are reused, not retrained.
GridResult run_leave_one_out(const GridConfig& cfg, const LogFn& log = {});

}  // namespace mccm
