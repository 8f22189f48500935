#include <bit>
#include <cstring>

#include "mccm/error.hpp"
#include "mccm/io.hpp"
#include "mccm/net.hpp"

// Layout (all integers little-endian):
//   "MCCM" u32 version
//   config: i32 input_size, stem_channels, blocks, layers_per_block, growth;
//           u32 head mask (1 spatial, 2 frequency, 4 joint); u64 seed
//   u32 tensor count, then per tensor: u32 name length, name bytes,
//           u32 ndim, u32 dims..., f64 values (row-major)
//   u64 optimizer step, then m and v values per tensor in the same order
//   i32 best epoch, f64 best value

namespace mccm {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'C', 'M'};

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(le(4))); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) fail(Errc::truncated, "checkpoint is truncated");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_values(Writer& w, const ParamSet& set) {
  for (const auto& t : set)
    for (double v : t.values) w.f64(v);
}

void read_values(Reader& r, ParamSet& set) {
  for (auto& t : set)
    for (double& v : t.values) v = r.f64();
}

}  // namespace

std::string serialize_checkpoint(const NetworkState& state) {
  Writer w;
  w.bytes({kMagic, 4});
  w.u32(kCheckpointVersion);
  const auto& c = state.config;
  w.i32(c.input_size);
  w.i32(c.stem_channels);
  w.i32(c.blocks);
  w.i32(c.layers_per_block);
  w.i32(c.growth);
  w.u32((c.spatial_head ? 1u : 0u) | (c.frequency_head ? 2u : 0u) | (c.joint_head ? 4u : 0u));
  w.u64(c.seed);

  w.u32(static_cast<std::uint32_t>(state.params.size()));
  for (const auto& t : state.params) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values) w.f64(v);
  }

  const ParamSet m = state.optimizer.m.empty() ? zeros_like(state.params) : state.optimizer.m;
  const ParamSet v = state.optimizer.v.empty() ? zeros_like(state.params) : state.optimizer.v;
  w.u64(state.optimizer.step);
  write_values(w, m);
  write_values(w, v);

  w.i32(state.best.epoch);
  w.f64(state.best.value);
  return w.take();
}

NetworkState deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(Errc::bad_magic, "not a checkpoint (bad magic)");
  r.bytes(4);
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    fail(Errc::version_mismatch, "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(kCheckpointVersion) + ")");
  NetConfig c;
  c.input_size = r.i32();
  c.stem_channels = r.i32();
  c.blocks = r.i32();
  c.layers_per_block = r.i32();
  c.growth = r.i32();
  const auto mask = r.u32();
  c.spatial_head = mask & 1u;
  c.frequency_head = mask & 2u;
  c.joint_head = mask & 4u;
  c.seed = r.u64();
  c.validate();

  // The expected names and shapes come from the config.
  NetworkState st = init_network(c);
  const auto count = r.u32();
  if (count != st.params.size()) fail(Errc::shape_mismatch, "checkpoint tensor count does not match its config");
  for (auto& t : st.params) {
    const auto len = r.u32();
    const auto name = r.bytes(len);
    if (name != t.name) fail(Errc::shape_mismatch, "unexpected tensor '" + std::string(name) + "', wanted " + t.name);
    const auto ndim = r.u32();
    if (ndim != t.shape.size()) fail(Errc::shape_mismatch, "rank mismatch for " + t.name);
    for (int d : t.shape)
      if (r.u32() != static_cast<std::uint32_t>(d)) fail(Errc::shape_mismatch, "shape mismatch for " + t.name);
    for (double& v : t.values) v = r.f64();
  }
  st.optimizer.step = r.u64();
  read_values(r, st.optimizer.m);
  read_values(r, st.optimizer.v);
  st.best.epoch = r.i32();
  st.best.value = r.f64();
  if (!r.done()) fail(Errc::shape_mismatch, "trailing bytes after checkpoint payload");
  return st;
}

void save_checkpoint(const NetworkState& state, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(state));
}

NetworkState load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace mccm
