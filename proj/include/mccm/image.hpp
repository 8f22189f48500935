#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mccm {

/// Three-channel planar raster (channel-major, then row-major). The tag makes
/// spatial images, frequency inputs and residuals distinct types.
template <class Tag>
struct Raster {
  static constexpr int channels = 3;

  int width = 0;
  int height = 0;
  std::vector<double> data;

  Raster() = default;
  Raster(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(channels) * w * h, fill) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }

  double& at(int c, int y, int x) { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
  double at(int c, int y, int x) const {
    return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }

  std::span<double> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }

  bool operator==(const Raster&) const = default;
};

struct RgbTag;
struct FreqTag;
struct ResidualTag;
struct SpectrumTag;

/// Spatial-domain sample, values in [0,1].
using RgbImage = Raster<RgbTag>;
/// Shifted, normalized log-magnitude spectrum, values in [-1,1].
using FreqInput = Raster<FreqTag>;
/// Signed high-pass residual, values in [-1,1].
using ResidualImage = Raster<ResidualTag>;
/// Unnormalized real spectrum planes (log magnitudes, averages).
using SpectrumPlanes = Raster<SpectrumTag>;

}  // namespace mccm
