#include "mccm/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "mccm/error.hpp"
#include "mccm/io.hpp"
#include "mccm/rng.hpp"

namespace mccm {

namespace {

constexpr std::string_view kManifestHeader = "id,file,label,generator,split";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  fail(Errc::invalid_argument, "unknown split '" + std::string(name) + "'");
}

DatasetManifest split_protocol(const DatasetManifest& manifest, const SplitRatios& ratios,
                               std::uint64_t seed) {
  require(ratios.train >= 0 && ratios.val >= 0 && ratios.test >= 0, "split ratios must be >= 0");
  require(std::abs(ratios.train + ratios.val + ratios.test - 1.0) < 1e-9,
          "split ratios must sum to 1");
  require(!manifest.records.empty(), "cannot split an empty manifest");

  DatasetManifest out;
  out.records = manifest.records;
  out.split.assign(out.records.size(), Split::test);

  for (Generator g : {Generator::pristine, Generator::freqfake, Generator::spatialfake}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < out.records.size(); ++i)
      if (out.records[i].generator == g) idx.push_back(i);
    if (idx.empty()) continue;

    SplitMix64 rng(seed ^ fnv1a64(to_string(g)));
    for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);

    const auto n = static_cast<double>(idx.size());
    const auto n_train = std::min(idx.size(), static_cast<std::size_t>(std::round(n * ratios.train)));
    const auto n_val =
        std::min(idx.size() - n_train, static_cast<std::size_t>(std::round(n * ratios.val)));
    for (std::size_t k = 0; k < idx.size(); ++k)
      out.split[idx[k]] = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
  }
  return out;
}

void write_manifest_csv(const DatasetManifest& manifest, const std::filesystem::path& path) {
  require(manifest.split.size() == manifest.records.size(), "manifest split/record size mismatch");
  std::string out(kManifestHeader);
  out += '\n';
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    out += r.id + ',' + r.file + ',' + std::to_string(r.label) + ',' +
           std::string(to_string(r.generator)) + ',' + std::string(to_string(manifest.split[i])) + '\n';
  }
  write_file_atomic(path, out);
}

DatasetManifest read_manifest_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader)
    fail(Errc::malformed_header, path.string() + ": expected header '" + std::string(kManifestHeader) + "'");

  DatasetManifest m;
  std::set<std::string> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    require(f.size() == 5, where + ": expected 5 columns");
    SampleRecord r;
    r.id = f[0];
    r.file = f[1];
    require(f[2] == "0" || f[2] == "1", where + ": label must be 0 or 1");
    r.label = f[2] == "1" ? 1 : 0;
    r.generator = parse_generator(f[3]);
    require(r.label == label_of(r.generator), where + ": label inconsistent with generator");
    require(seen.insert(r.id).second, where + ": duplicate id '" + r.id + "'");
    m.records.push_back(std::move(r));
    m.split.push_back(parse_split(f[4]));
  }
  return m;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.split.size(); ++i)
    if (manifest.split[i] == s) out.push_back(i);
  return out;
}

DatasetManifest write_dataset(const std::filesystem::path& dir, Generator g,
                              const std::vector<RgbImage>& images, const SplitRatios& ratios,
                              std::uint64_t split_seed) {
  DatasetManifest m;
  char name[64];
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::snprintf(name, sizeof(name), "%s_%06zu", std::string(to_string(g)).c_str(), i);
    SampleRecord r{name, label_of(g), g, std::string(name) + ".ppm"};
    m.records.push_back(std::move(r));
  }
  m = split_protocol(m, ratios, split_seed);
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < images.size(); ++i) write_ppm(images[i], dir / m.records[i].file);
  write_manifest_csv(m, dir / "manifest.csv");
  return m;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.root = dir;
  ds.manifest = read_manifest_csv(dir / "manifest.csv");
  ds.images.reserve(ds.manifest.records.size());
  for (const auto& r : ds.manifest.records) ds.images.push_back(read_ppm(dir / r.file));
  return ds;
}

}  // namespace mccm
