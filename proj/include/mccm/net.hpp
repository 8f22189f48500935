#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mccm/image.hpp"
#include "mccm/loss.hpp"

namespace mccm {

/// Miniature dual-branch dense network. The full-scale reference uses
/// 224x224 inputs and 384-dim embeddings per branch (DenseNet161 prefix); the
/// defaults here are the desk-scale analog.
struct NetConfig {
  int input_size = 64;
  int stem_channels = 16;
  int blocks = 3;
  int layers_per_block = 2;
  int growth = 8;
  bool spatial_head = true;
  bool frequency_head = true;
  bool joint_head = true;
  std::uint64_t seed = 0;

  void validate() const;

  bool has_spatial_branch() const { return spatial_head || joint_head; }
  bool has_frequency_branch() const { return frequency_head || joint_head; }
  bool is_dual() const { return spatial_head && frequency_head && joint_head; }

  /// GAP embedding width of one branch.
  int embedding_dim() const;
  /// Side length of the last feature map before GAP.
  int final_size() const;

  bool operator==(const NetConfig&) const = default;

  static NetConfig dual();
  static NetConfig rgb_only();
  static NetConfig dft_only();
};

/// Shape summary of one convolution in a branch, in execution order.
struct ConvShape {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int size = 0;  // spatial side the conv runs at
};

std::vector<ConvShape> branch_layout(const NetConfig& cfg);

struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  bool operator==(const Tensor&) const = default;
};

using ParamSet = std::vector<Tensor>;

/// Same names/shapes as `params`, all zeros.
ParamSet zeros_like(const ParamSet& params);

struct AdamState {
  std::uint64_t step = 0;
  ParamSet m;
  ParamSet v;

  bool operator==(const AdamState&) const = default;
};

struct BestMeta {
  int epoch = -1;
  double value = 0.0;

  bool operator==(const BestMeta&) const = default;
};

struct NetworkState {
  NetConfig config;
  ParamSet params;
  AdamState optimizer;
  BestMeta best;
  /// Bumped on every parameter update; ties a forward cache to the weights it used.
  std::uint64_t revision = 0;

  const Tensor& param(const std::string& name) const;
  Tensor& param(const std::string& name);
};

/// He-uniform weights (bound sqrt(6/fan_in)) drawn in parameter order from
/// SplitMix64(cfg.seed); zero biases.
NetworkState init_network(const NetConfig& cfg);

struct Embeddings {
  std::vector<double> spatial;
  std::vector<double> frequency;
  std::vector<double> joint;  // spatial ++ frequency
};

struct BranchCache {
  std::vector<double> input;
  std::vector<std::vector<double>> blocks;       // dense block buffers, post-ReLU
  std::vector<std::vector<double>> transitions;  // transition outputs before pooling
  std::vector<double> pooled;                    // last pooled map (GAP input)
};

struct SampleCache {
  BranchCache spatial;
  BranchCache frequency;
  Embeddings embeddings;
  HeadOutputs heads;
};

struct ForwardCache {
  std::uint64_t revision = 0;
  NetConfig config;
  std::vector<SampleCache> samples;
};

struct ForwardResult {
  std::vector<HeadOutputs> heads;  // disabled heads report 0.5
  std::vector<Embeddings> embeddings;
  ForwardCache cache;
};

/// Runs every configured branch and head. A branch's inputs may be empty only
/// when that branch is not configured.
ForwardResult forward(const NetworkState& state, std::span<const RgbImage> rgb,
                      std::span<const FreqInput> freq);

/// Reverse-mode gradients for the batch summed over samples (callers scale
/// head_grads for mean reduction). Accumulation runs in sample order.
ParamSet backward(const NetworkState& state, const ForwardCache& cache, std::span<const HeadGrads> head_grads);

struct AdamConfig {
  double lr = 1e-4;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// false: classic L2 term g += wd * theta; true: decoupled (AdamW) decay.
  bool decoupled = false;
};

/// One Adam update with bias correction; t = opt.step after increment.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& opt, const AdamConfig& cfg);
void adam_step(NetworkState& state, const ParamSet& grads, const AdamConfig& cfg);

enum class PredictMode { dual, rgb_only, dft_only };

std::string_view to_string(PredictMode m);
PredictMode default_mode(const NetConfig& cfg);

/// Pristine probability from the head selected by `mode`: joint for dual,
/// otherwise the single branch head. Unused branch inputs may be empty.
std::vector<double> predict(const NetworkState& state, std::span<const RgbImage> rgb,
                            std::span<const FreqInput> freq, PredictMode mode);

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const NetworkState& state);
NetworkState deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const NetworkState& state, const std::filesystem::path& path);
NetworkState load_checkpoint(const std::filesystem::path& path);

}  // namespace mccm
