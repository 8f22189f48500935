#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mccm/image.hpp"
#include "mccm/rng.hpp"

namespace testing {

inline mccm::RgbImage random_image(std::uint64_t seed, int w, int h = 0) {
  mccm::RgbImage img(w, h ? h : w);
  mccm::SplitMix64 rng(seed);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

template <class Tag>
double max_abs_diff(const mccm::Raster<Tag>& a, const mccm::Raster<Tag>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mccm-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
