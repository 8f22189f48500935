#include "mccm/net.hpp"

#include <Eigen/Core>
#include <cmath>

#include "mccm/error.hpp"
#include "mccm/rng.hpp"

namespace mccm {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

struct ConvIdx {
  int weight = -1;
  int bias = -1;
  int cin = 0;
  int cout = 0;
  int kernel = 0;
  int size = 0;
};

struct BranchIdx {
  ConvIdx stem;
  std::vector<std::vector<ConvIdx>> layers;  // [block][layer]
  std::vector<ConvIdx> transitions;          // [block]
  std::vector<int> block_in;                 // channels entering each block
  std::vector<int> block_total;              // channels in each block buffer
  std::vector<int> sizes;                    // spatial side of each block
  int final_size = 0;
  int embedding = 0;
};

struct HeadIdx {
  int weight = -1;
  int bias = -1;
};

struct Layout {
  bool spatial = false;
  bool frequency = false;
  BranchIdx s, f;
  HeadIdx head_s, head_f, head_j;
  std::vector<Tensor> shapes;  // names and shapes, empty values
};

void add_param(Layout& lay, const std::string& name, std::vector<int> shape) {
  lay.shapes.push_back({name, std::move(shape), {}});
}

ConvIdx add_conv(Layout& lay, const std::string& name, int cin, int cout, int kernel, int size) {
  ConvIdx c{static_cast<int>(lay.shapes.size()), static_cast<int>(lay.shapes.size()) + 1, cin, cout, kernel, size};
  add_param(lay, name + ".weight", {cout, cin, kernel, kernel});
  add_param(lay, name + ".bias", {cout});
  return c;
}

BranchIdx add_branch(Layout& lay, const NetConfig& cfg, const std::string& prefix) {
  BranchIdx b;
  int size = cfg.input_size;
  int channels = cfg.stem_channels;
  b.stem = add_conv(lay, prefix + ".stem", 3, channels, 3, size);
  for (int blk = 0; blk < cfg.blocks; ++blk) {
    const std::string bp = prefix + ".block" + std::to_string(blk);
    b.block_in.push_back(channels);
    b.sizes.push_back(size);
    std::vector<ConvIdx> layers;
    for (int l = 0; l < cfg.layers_per_block; ++l)
      layers.push_back(add_conv(lay, bp + ".layer" + std::to_string(l), channels + l * cfg.growth, cfg.growth, 3, size));
    b.layers.push_back(std::move(layers));
    const int total = channels + cfg.layers_per_block * cfg.growth;
    b.block_total.push_back(total);
    b.transitions.push_back(add_conv(lay, bp + ".transition", total, total / 2, 1, size));
    channels = total / 2;
    size /= 2;
  }
  b.final_size = size;
  b.embedding = channels;
  return b;
}

Layout make_layout(const NetConfig& cfg) {
  cfg.validate();
  Layout lay;
  lay.spatial = cfg.has_spatial_branch();
  lay.frequency = cfg.has_frequency_branch();
  if (lay.spatial) lay.s = add_branch(lay, cfg, "rgb");
  if (lay.frequency) lay.f = add_branch(lay, cfg, "dft");
  const int e = cfg.embedding_dim();
  auto head = [&](const std::string& name, int in) {
    HeadIdx h{static_cast<int>(lay.shapes.size()), static_cast<int>(lay.shapes.size()) + 1};
    add_param(lay, "head." + name + ".weight", {1, in});
    add_param(lay, "head." + name + ".bias", {1});
    return h;
  };
  if (cfg.spatial_head) lay.head_s = head("spatial", e);
  if (cfg.frequency_head) lay.head_f = head("frequency", e);
  if (cfg.joint_head) lay.head_j = head("joint", 2 * e);
  return lay;
}

std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// cols[(c*k*k + ky*k + kx), y*w + x] = in[c, y+ky-p, x+kx-p] (zero outside).
void im2col(const double* in, int cin, int size, int k, double* cols) {
  const int pad = k / 2;
  const int hw = size * size;
  for (int c = 0; c < cin; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * hw;
        const double* plane = in + static_cast<std::size_t>(c) * hw;
        for (int y = 0; y < size; ++y) {
          const int sy = y + ky - pad;
          double* dst = row + y * size;
          if (sy < 0 || sy >= size) {
            std::fill(dst, dst + size, 0.0);
            continue;
          }
          const double* src = plane + sy * size;
          for (int x = 0; x < size; ++x) {
            const int sx = x + kx - pad;
            dst[x] = (sx < 0 || sx >= size) ? 0.0 : src[sx];
          }
        }
      }
}

void col2im_add(const double* cols, int cin, int size, int k, double* din) {
  const int pad = k / 2;
  const int hw = size * size;
  for (int c = 0; c < cin; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * hw;
        double* plane = din + static_cast<std::size_t>(c) * hw;
        for (int y = 0; y < size; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= size) continue;
          const double* src = row + y * size;
          double* dst = plane + sy * size;
          for (int x = 0; x < size; ++x) {
            const int sx = x + kx - pad;
            if (sx >= 0 && sx < size) dst[sx] += src[x];
          }
        }
      }
}

std::vector<double>& scratch_cols() {
  thread_local std::vector<double> buf;
  return buf;
}

std::vector<double>& scratch_dcols() {
  thread_local std::vector<double> buf;
  return buf;
}

// out = relu(W * cols(in) + b), cout x size^2.
void conv_relu_forward(const ParamSet& P, const ConvIdx& c, const double* in, double* out) {
  const int hw = c.size * c.size;
  const int kdim = c.cin * c.kernel * c.kernel;
  const double* cols = in;
  if (c.kernel != 1) {
    auto& buf = scratch_cols();
    buf.resize(static_cast<std::size_t>(kdim) * hw);
    im2col(in, c.cin, c.size, c.kernel, buf.data());
    cols = buf.data();
  }
  CMapMat W(P[c.weight].values.data(), c.cout, kdim);
  CMapMat C(cols, kdim, hw);
  MapMat O(out, c.cout, hw);
  O.noalias() = W * C;
  const auto& bias = P[c.bias].values;
  for (int o = 0; o < c.cout; ++o) {
    double* row = out + static_cast<std::size_t>(o) * hw;
    for (int i = 0; i < hw; ++i) {
      const double z = row[i] + bias[o];
      row[i] = z > 0.0 ? z : 0.0;
    }
  }
}

// dz: gradient w.r.t. the pre-activation (already masked), cout x size^2.
// Accumulates weight/bias grads and, when din != nullptr, input grads.
void conv_backward(const ParamSet& P, ParamSet& G, const ConvIdx& c, const double* in, const double* dz,
                   double* din) {
  const int hw = c.size * c.size;
  const int kdim = c.cin * c.kernel * c.kernel;
  const double* cols = in;
  if (c.kernel != 1) {
    auto& buf = scratch_cols();
    buf.resize(static_cast<std::size_t>(kdim) * hw);
    im2col(in, c.cin, c.size, c.kernel, buf.data());
    cols = buf.data();
  }
  CMapMat C(cols, kdim, hw);
  CMapMat dZ(dz, c.cout, hw);
  MapMat dW(G[c.weight].values.data(), c.cout, kdim);
  dW.noalias() += dZ * C.transpose();
  auto& db = G[c.bias].values;
  for (int o = 0; o < c.cout; ++o) {
    const double* row = dz + static_cast<std::size_t>(o) * hw;
    double acc = 0.0;
    for (int i = 0; i < hw; ++i) acc += row[i];
    db[o] += acc;
  }
  if (!din) return;
  CMapMat W(P[c.weight].values.data(), c.cout, kdim);
  if (c.kernel == 1) {
    MapMat dIn(din, kdim, hw);
    dIn.noalias() += W.transpose() * dZ;
  } else {
    auto& dcols = scratch_dcols();
    dcols.resize(static_cast<std::size_t>(kdim) * hw);
    MapMat dC(dcols.data(), kdim, hw);
    dC.noalias() = W.transpose() * dZ;
    col2im_add(dcols.data(), c.cin, c.size, c.kernel, din);
  }
}

void avg_pool2(const double* in, int channels, int size, double* out) {
  const int half = size / 2;
  for (int c = 0; c < channels; ++c) {
    const double* p = in + static_cast<std::size_t>(c) * size * size;
    double* o = out + static_cast<std::size_t>(c) * half * half;
    for (int y = 0; y < half; ++y)
      for (int x = 0; x < half; ++x)
        o[y * half + x] = 0.25 * (p[2 * y * size + 2 * x] + p[2 * y * size + 2 * x + 1] +
                                  p[(2 * y + 1) * size + 2 * x] + p[(2 * y + 1) * size + 2 * x + 1]);
  }
}

std::vector<double> branch_forward(const ParamSet& P, const BranchIdx& L, std::span<const double> input,
                                   BranchCache& bc) {
  bc.input.assign(input.begin(), input.end());
  const int nblocks = static_cast<int>(L.layers.size());
  bc.blocks.resize(nblocks);
  bc.transitions.resize(nblocks);
  for (int b = 0; b < nblocks; ++b) {
    const int hw = L.sizes[b] * L.sizes[b];
    bc.blocks[b].assign(static_cast<std::size_t>(L.block_total[b]) * hw, 0.0);
  }
  conv_relu_forward(P, L.stem, bc.input.data(), bc.blocks[0].data());

  for (int b = 0; b < nblocks; ++b) {
    const int hw = L.sizes[b] * L.sizes[b];
    double* buf = bc.blocks[b].data();
    for (const auto& layer : L.layers[b])
      conv_relu_forward(P, layer, buf, buf + static_cast<std::size_t>(layer.cin) * hw);
    const auto& t = L.transitions[b];
    bc.transitions[b].assign(static_cast<std::size_t>(t.cout) * hw, 0.0);
    conv_relu_forward(P, t, buf, bc.transitions[b].data());
    if (b + 1 < nblocks) {
      avg_pool2(bc.transitions[b].data(), t.cout, L.sizes[b], bc.blocks[b + 1].data());
    } else {
      bc.pooled.assign(static_cast<std::size_t>(t.cout) * L.final_size * L.final_size, 0.0);
      avg_pool2(bc.transitions[b].data(), t.cout, L.sizes[b], bc.pooled.data());
    }
  }

  const int fhw = L.final_size * L.final_size;
  std::vector<double> emb(L.embedding);
  for (int c = 0; c < L.embedding; ++c) {
    double acc = 0.0;
    for (int i = 0; i < fhw; ++i) acc += bc.pooled[static_cast<std::size_t>(c) * fhw + i];
    emb[c] = acc / fhw;
  }
  return emb;
}

void branch_backward(const ParamSet& P, ParamSet& G, const BranchIdx& L, const BranchCache& bc,
                     std::span<const double> d_emb) {
  const int nblocks = static_cast<int>(L.layers.size());
  const int fhw = L.final_size * L.final_size;
  // d pooled output of the current block
  std::vector<double> d_pooled(static_cast<std::size_t>(L.embedding) * fhw);
  for (int c = 0; c < L.embedding; ++c)
    for (int i = 0; i < fhw; ++i) d_pooled[static_cast<std::size_t>(c) * fhw + i] = d_emb[c] / fhw;

  std::vector<double> d_buf, d_t;
  for (int b = nblocks - 1; b >= 0; --b) {
    const int size = L.sizes[b], half = size / 2, hw = size * size;
    const auto& t = L.transitions[b];
    // avg-pool backward, then ReLU mask on the transition output
    d_t.assign(static_cast<std::size_t>(t.cout) * hw, 0.0);
    for (int c = 0; c < t.cout; ++c)
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const std::size_t i = static_cast<std::size_t>(c) * hw + y * size + x;
          d_t[i] = bc.transitions[b][i] > 0.0
                       ? 0.25 * d_pooled[static_cast<std::size_t>(c) * half * half + (y / 2) * half + x / 2]
                       : 0.0;
        }
    d_buf.assign(static_cast<std::size_t>(L.block_total[b]) * hw, 0.0);
    const double* buf = bc.blocks[b].data();
    conv_backward(P, G, t, buf, d_t.data(), d_buf.data());

    for (int l = static_cast<int>(L.layers[b].size()) - 1; l >= 0; --l) {
      const auto& layer = L.layers[b][l];
      const std::size_t off = static_cast<std::size_t>(layer.cin) * hw;
      double* d_out = d_buf.data() + off;
      const double* out = buf + off;
      for (std::size_t i = 0; i < static_cast<std::size_t>(layer.cout) * hw; ++i)
        if (!(out[i] > 0.0)) d_out[i] = 0.0;
      conv_backward(P, G, layer, buf, d_out, d_buf.data());
    }

    // d_buf[0:block_in] is the gradient of this block's input.
    const std::size_t in_len = static_cast<std::size_t>(L.block_in[b]) * hw;
    if (b > 0) {
      d_pooled.assign(d_buf.begin(), d_buf.begin() + static_cast<std::ptrdiff_t>(in_len));
    } else {
      for (std::size_t i = 0; i < in_len; ++i)
        if (!(buf[i] > 0.0)) d_buf[i] = 0.0;
      conv_backward(P, G, L.stem, bc.input.data(), d_buf.data(), nullptr);
    }
  }
}

double head_logit(const ParamSet& P, const HeadIdx& h, std::span<const double> e) {
  const auto& w = P[h.weight].values;
  double z = P[h.bias].values[0];
  for (std::size_t i = 0; i < e.size(); ++i) z += w[i] * e[i];
  return z;
}

// Adds dz * e to the head's weights and dz * w to d_e.
void head_backward(const ParamSet& P, ParamSet& G, const HeadIdx& h, std::span<const double> e, double dz,
                   std::span<double> d_e) {
  const auto& w = P[h.weight].values;
  auto& gw = G[h.weight].values;
  for (std::size_t i = 0; i < e.size(); ++i) {
    gw[i] += dz * e[i];
    d_e[i] += dz * w[i];
  }
  G[h.bias].values[0] += dz;
}

const Layout& layout_for(const NetConfig& cfg) {
  thread_local NetConfig cached_cfg;
  thread_local Layout cached;
  thread_local bool valid = false;
  NetConfig key = cfg;
  key.seed = 0;
  if (!valid || !(cached_cfg == key)) {
    cached = make_layout(cfg);
    cached_cfg = key;
    valid = true;
  }
  return cached;
}

void check_inputs(const NetConfig& cfg, std::span<const RgbImage> rgb, std::span<const FreqInput> freq,
                  bool need_s, bool need_f) {
  auto bad = [](const std::string& why) { fail(Errc::shape_mismatch, why); };
  const std::size_t n = need_s ? rgb.size() : freq.size();
  if (need_s) {
    if (rgb.size() != n) bad("rgb batch size mismatch");
    for (const auto& im : rgb)
      if (im.width != cfg.input_size || im.height != cfg.input_size)
        bad("rgb input must be " + std::to_string(cfg.input_size) + "x" + std::to_string(cfg.input_size));
  }
  if (need_f) {
    if (freq.size() != n) bad("frequency batch size does not match rgb batch size");
    for (const auto& im : freq)
      if (im.width != cfg.input_size || im.height != cfg.input_size)
        bad("frequency input must be " + std::to_string(cfg.input_size) + "x" + std::to_string(cfg.input_size));
  }
}

ForwardResult forward_impl(const NetworkState& state, std::span<const RgbImage> rgb,
                           std::span<const FreqInput> freq, bool need_s, bool need_f) {
  const auto& cfg = state.config;
  const Layout& lay = layout_for(cfg);
  check_inputs(cfg, rgb, freq, need_s, need_f);
  const std::size_t n = need_s ? rgb.size() : freq.size();
  const auto& P = state.params;

  ForwardResult res;
  res.cache.revision = state.revision;
  res.cache.config = cfg;
  res.cache.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& sc = res.cache.samples[i];
    auto& e = sc.embeddings;
    if (need_s) e.spatial = branch_forward(P, lay.s, rgb[i].data, sc.spatial);
    if (need_f) e.frequency = branch_forward(P, lay.f, freq[i].data, sc.frequency);
    if (need_s && need_f) {
      e.joint = e.spatial;
      e.joint.insert(e.joint.end(), e.frequency.begin(), e.frequency.end());
    }
    if (need_s && cfg.spatial_head) sc.heads.s = sigmoid(head_logit(P, lay.head_s, e.spatial));
    if (need_f && cfg.frequency_head) sc.heads.f = sigmoid(head_logit(P, lay.head_f, e.frequency));
    if (need_s && need_f && cfg.joint_head) sc.heads.r = sigmoid(head_logit(P, lay.head_j, e.joint));
    res.heads.push_back(sc.heads);
    res.embeddings.push_back(e);
  }
  return res;
}

}  // namespace

void NetConfig::validate() const {
  require(input_size >= 2, "input_size must be >= 2");
  require(stem_channels >= 1 && growth >= 1 && layers_per_block >= 0 && blocks >= 1,
          "stem_channels, growth and blocks must be >= 1, layers_per_block >= 0");
  require(input_size % (1 << blocks) == 0,
          "input_size must be divisible by 2^blocks (" + std::to_string(1 << blocks) + ")");
  require(spatial_head || frequency_head || joint_head, "at least one head must be enabled");
  int channels = stem_channels;
  for (int b = 0; b < blocks; ++b) {
    channels = (channels + layers_per_block * growth) / 2;
    require(channels >= 1, "transition would produce zero channels");
  }
}

int NetConfig::embedding_dim() const {
  int channels = stem_channels;
  for (int b = 0; b < blocks; ++b) channels = (channels + layers_per_block * growth) / 2;
  return channels;
}

int NetConfig::final_size() const { return input_size >> blocks; }

NetConfig NetConfig::dual() { return NetConfig{}; }

NetConfig NetConfig::rgb_only() {
  NetConfig c;
  c.frequency_head = false;
  c.joint_head = false;
  return c;
}

NetConfig NetConfig::dft_only() {
  NetConfig c;
  c.spatial_head = false;
  c.joint_head = false;
  return c;
}

std::vector<ConvShape> branch_layout(const NetConfig& cfg) {
  NetConfig single = cfg;
  single.spatial_head = true;
  single.frequency_head = false;
  single.joint_head = false;
  const Layout lay = make_layout(single);
  std::vector<ConvShape> out;
  auto push = [&](const ConvIdx& c) {
    std::string name = lay.shapes[c.weight].name;
    name = name.substr(4, name.size() - 4 - 7);  // strip "rgb." and ".weight"
    out.push_back({name, c.cin, c.cout, c.kernel, c.size});
  };
  push(lay.s.stem);
  for (std::size_t b = 0; b < lay.s.layers.size(); ++b) {
    for (const auto& l : lay.s.layers[b]) push(l);
    push(lay.s.transitions[b]);
  }
  return out;
}

ParamSet zeros_like(const ParamSet& params) {
  ParamSet out = params;
  for (auto& t : out) std::fill(t.values.begin(), t.values.end(), 0.0);
  return out;
}

const Tensor& NetworkState::param(const std::string& name) const {
  for (const auto& t : params)
    if (t.name == name) return t;
  fail(Errc::invalid_argument, "no parameter named '" + name + "'");
}

Tensor& NetworkState::param(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const NetworkState&>(*this).param(name));
}

NetworkState init_network(const NetConfig& cfg) {
  const Layout lay = make_layout(cfg);
  NetworkState st;
  st.config = cfg;
  SplitMix64 rng(cfg.seed);
  for (const auto& shape : lay.shapes) {
    Tensor t{shape.name, shape.shape, std::vector<double>(numel(shape.shape), 0.0)};
    const bool is_weight = t.name.size() > 7 && t.name.compare(t.name.size() - 7, 7, ".weight") == 0;
    if (is_weight) {
      const std::size_t fan_in = t.values.size() / static_cast<std::size_t>(t.shape[0]);
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (double& v : t.values) v = rng.uniform(-bound, bound);
    }
    st.params.push_back(std::move(t));
  }
  st.optimizer.m = zeros_like(st.params);
  st.optimizer.v = zeros_like(st.params);
  return st;
}

ForwardResult forward(const NetworkState& state, std::span<const RgbImage> rgb, std::span<const FreqInput> freq) {
  return forward_impl(state, rgb, freq, state.config.has_spatial_branch(), state.config.has_frequency_branch());
}

ParamSet backward(const NetworkState& state, const ForwardCache& cache, std::span<const HeadGrads> head_grads) {
  if (cache.revision != state.revision || !(cache.config == state.config))
    fail(Errc::stale_cache, "forward cache does not belong to the current parameters");
  if (head_grads.size() != cache.samples.size())
    fail(Errc::stale_cache, "head gradient count does not match the cached batch");

  const auto& cfg = state.config;
  const Layout& lay = layout_for(cfg);
  const auto& P = state.params;
  ParamSet G = zeros_like(P);
  const int e = cfg.embedding_dim();
  const bool has_s = cfg.has_spatial_branch(), has_f = cfg.has_frequency_branch();

  std::vector<double> d_es(e), d_ef(e), d_ej(2 * e);
  for (std::size_t i = 0; i < cache.samples.size(); ++i) {
    const auto& sc = cache.samples[i];
    const auto& h = sc.heads;
    const auto& g = head_grads[i];
    std::fill(d_es.begin(), d_es.end(), 0.0);
    std::fill(d_ef.begin(), d_ef.end(), 0.0);
    std::fill(d_ej.begin(), d_ej.end(), 0.0);
    if (cfg.spatial_head) head_backward(P, G, lay.head_s, sc.embeddings.spatial, g.ds * h.s * (1.0 - h.s), d_es);
    if (cfg.frequency_head)
      head_backward(P, G, lay.head_f, sc.embeddings.frequency, g.df * h.f * (1.0 - h.f), d_ef);
    if (cfg.joint_head) {
      head_backward(P, G, lay.head_j, sc.embeddings.joint, g.dr * h.r * (1.0 - h.r), d_ej);
      for (int k = 0; k < e; ++k) {
        d_es[k] += d_ej[k];
        d_ef[k] += d_ej[e + k];
      }
    }
    if (has_s) branch_backward(P, G, lay.s, sc.spatial, d_es);
    if (has_f) branch_backward(P, G, lay.f, sc.frequency, d_ef);
  }
  return G;
}

std::string_view to_string(PredictMode m) {
  switch (m) {
    case PredictMode::dual: return "dual";
    case PredictMode::rgb_only: return "rgb_only";
    case PredictMode::dft_only: return "dft_only";
  }
  return "?";
}

PredictMode default_mode(const NetConfig& cfg) {
  if (cfg.joint_head) return PredictMode::dual;
  return cfg.spatial_head ? PredictMode::rgb_only : PredictMode::dft_only;
}

std::vector<double> predict(const NetworkState& state, std::span<const RgbImage> rgb,
                            std::span<const FreqInput> freq, PredictMode mode) {
  const auto& cfg = state.config;
  const bool ok = (mode == PredictMode::dual && cfg.joint_head) ||
                  (mode == PredictMode::rgb_only && cfg.spatial_head) ||
                  (mode == PredictMode::dft_only && cfg.frequency_head);
  if (!ok) fail(Errc::invalid_argument, "predict mode '" + std::string(to_string(mode)) + "' needs a head the network lacks");
  const bool need_s = mode != PredictMode::dft_only;
  const bool need_f = mode != PredictMode::rgb_only;
  const auto res = forward_impl(state, rgb, freq, need_s, need_f);
  std::vector<double> out;
  out.reserve(res.heads.size());
  for (const auto& h : res.heads)
    out.push_back(mode == PredictMode::dual ? h.r : (mode == PredictMode::rgb_only ? h.s : h.f));
  return out;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& opt, const AdamConfig& cfg) {
  require(grads.size() == params.size(), "adam_step: gradient set does not match parameters");
  if (opt.m.empty()) opt.m = zeros_like(params);
  if (opt.v.empty()) opt.v = zeros_like(params);
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& theta = params[p].values;
    const auto& g = grads[p].values;
    auto& m = opt.m[p].values;
    auto& v = opt.v[p].values;
    require(g.size() == theta.size(), "adam_step: gradient shape mismatch for " + params[p].name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = cfg.decoupled ? g[i] : g[i] + cfg.weight_decay * theta[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      if (cfg.decoupled) theta[i] -= cfg.lr * cfg.weight_decay * theta[i];
      theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void adam_step(NetworkState& state, const ParamSet& grads, const AdamConfig& cfg) {
  adam_step(state.params, grads, state.optimizer, cfg);
  ++state.revision;
}

}  // namespace mccm
