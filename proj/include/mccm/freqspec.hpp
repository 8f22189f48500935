#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mccm/image.hpp"

namespace mccm {

/// Unnormalized forward 2-D DFT of each color channel.
struct ComplexSpectrum {
  int width = 0;
  int height = 0;
  std::vector<std::complex<double>> data;  // channel-major, row-major within a channel

  std::complex<double> at(int c, int u, int v) const {
    return data[(static_cast<std::size_t>(c) * height + u) * width + v];
  }
};

ComplexSpectrum dft2_planes(std::span<const double> planes, int width, int height);

template <class Tag>
ComplexSpectrum dft2_per_channel(const Raster<Tag>& img) {
  return dft2_planes(img.data, img.width, img.height);
}

inline constexpr double kLogEps = 1e-8;

/// log(|F| + eps) per bin; phase is discarded.
SpectrumPlanes log_spectrum(const ComplexSpectrum& spec, double eps = kLogEps);

/// Per-channel min-max map to [-1,1]; a channel with range < 1e-12 maps to 0.
template <class Tag>
Raster<Tag> normalize_sym(Raster<Tag> x) {
  for (int c = 0; c < Raster<Tag>::channels; ++c) {
    auto p = x.plane(c);
    double lo = p[0], hi = p[0];
    for (double v : p) {
      lo = v < lo ? v : lo;
      hi = v > hi ? v : hi;
    }
    const double range = hi - lo;
    for (double& v : p) v = range < 1e-12 ? 0.0 : 2.0 * (v - lo) / range - 1.0;
  }
  return x;
}

void check_even(int width, int height);

/// Quadrant swap: bin (0,0) moves to (H/2, W/2). Even dimensions only.
template <class Tag>
Raster<Tag> fft_shift(const Raster<Tag>& x) {
  check_even(x.width, x.height);
  Raster<Tag> out(x.width, x.height);
  const int hh = x.height / 2, hw = x.width / 2;
  for (int c = 0; c < Raster<Tag>::channels; ++c)
    for (int y = 0; y < x.height; ++y)
      for (int v = 0; v < x.width; ++v) out.at(c, (y + hh) % x.height, (v + hw) % x.width) = x.at(c, y, v);
  return out;
}

/// DFT -> log magnitude -> [-1,1] per channel -> centered DC.
FreqInput to_freq_input(const RgbImage& img);

/// img - median_k(img) per channel with reflect padding. k must be odd.
ResidualImage highpass_median(const RgbImage& img, int k = 3);

/// Mean of shifted log spectra (optionally of median high-pass residuals)
/// over `sample_n` images drawn without replacement. No per-image normalization.
SpectrumPlanes average_spectrum(std::span<const RgbImage> images, std::size_t sample_n,
                                std::uint64_t seed, bool highpass = true);

/// Mean log-magnitude inside the Nyquist replica bands minus the mean of the
/// adjacent background along the same bands, on a shifted spectrum averaged over
/// channels. Bands: bins within `halfwidth` of a Nyquist row (column) and within
/// `halfwidth` of the orthogonal zero-frequency axis; background: same rows
/// (columns), offset (halfwidth, 4*halfwidth] from that axis.
double nyquist_band_margin(const SpectrumPlanes& shifted, int halfwidth = 2);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

/// Channel mean, min-max scaled to 0..255.
GrayImage spectrum_display(const SpectrumPlanes& spec);

void write_pgm(const GrayImage& img, const std::filesystem::path& path);

/// One channel, row-major, comma-separated values per row.
void write_spectrum_csv(const SpectrumPlanes& spec, int channel, const std::filesystem::path& path);

}  // namespace mccm
