#include "mccm/freqspec.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "mccm/error.hpp"
#include "mccm/io.hpp"
#include "mccm/rng.hpp"

namespace mccm {

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i >= n ? period - i : i;
}

// FFTW's planner is not thread-safe; plans are built once per shape under a
// lock and executed on caller-owned buffers afterwards.
fftw_plan plan_for(int width, int height) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(mu);
  auto it = plans.find({width, height});
  if (it != plans.end()) return it->second;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  auto* in = fftw_alloc_complex(n);
  auto* out = fftw_alloc_complex(n);
  const fftw_plan p = fftw_plan_dft_2d(height, width, in, out, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(in);
  fftw_free(out);
  require(p != nullptr, "FFTW could not plan a " + std::to_string(width) + "x" + std::to_string(height) + " transform");
  plans.emplace(std::pair{width, height}, p);
  return p;
}

}  // namespace

ComplexSpectrum dft2_planes(std::span<const double> planes, int width, int height) {
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  require(width >= 1 && height >= 1, "dft2: empty image");
  require(planes.size() == 3 * plane, "dft2: plane data does not match dimensions");
  const fftw_plan p = plan_for(width, height);
  ComplexSpectrum spec{width, height, std::vector<std::complex<double>>(3 * plane)};
  std::vector<std::complex<double>> in(plane);
  for (int c = 0; c < 3; ++c) {
    std::copy(planes.begin() + static_cast<std::ptrdiff_t>(c * plane),
              planes.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane), in.begin());
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(spec.data.data() + c * plane));
  }
  return spec;
}

SpectrumPlanes log_spectrum(const ComplexSpectrum& spec, double eps) {
  require(eps > 0.0, "log_spectrum: eps must be > 0");
  SpectrumPlanes out(spec.width, spec.height);
  for (std::size_t i = 0; i < spec.data.size(); ++i) out.data[i] = std::log(std::abs(spec.data[i]) + eps);
  return out;
}

void check_even(int width, int height) {
  require(width % 2 == 0 && height % 2 == 0,
          "fft_shift needs even dimensions, got " + std::to_string(width) + "x" + std::to_string(height));
}

FreqInput to_freq_input(const RgbImage& img) {
  auto shifted = fft_shift(normalize_sym(log_spectrum(dft2_per_channel(img))));
  FreqInput out;
  out.width = shifted.width;
  out.height = shifted.height;
  out.data = std::move(shifted.data);
  return out;
}

ResidualImage highpass_median(const RgbImage& img, int k) {
  require(k >= 1 && k % 2 == 1, "median kernel size must be odd, got " + std::to_string(k));
  const int r = k / 2;
  ResidualImage out(img.width, img.height);
  std::vector<double> window(static_cast<std::size_t>(k) * k);
  for (int c = 0; c < RgbImage::channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        std::size_t n = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            window[n++] = img.at(c, reflect(y + dy, img.height), reflect(x + dx, img.width));
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
        std::nth_element(window.begin(), mid, window.end());
        out.at(c, y, x) = img.at(c, y, x) - *mid;
      }
  return out;
}

SpectrumPlanes average_spectrum(std::span<const RgbImage> images, std::size_t sample_n,
                                std::uint64_t seed, bool highpass) {
  require(!images.empty(), "average_spectrum: empty dataset");
  require(sample_n >= 1 && sample_n <= images.size(),
          "average_spectrum: sample size must be in [1, dataset size]");

  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < sample_n; ++i) std::swap(order[i], order[i + rng.below(order.size() - i)]);

  const RgbImage& first = images[order[0]];
  SpectrumPlanes acc(first.width, first.height);
  for (std::size_t i = 0; i < sample_n; ++i) {
    const RgbImage& img = images[order[i]];
    require(img.width == first.width && img.height == first.height,
            "average_spectrum: images differ in size");
    const auto spec = highpass ? dft2_per_channel(highpass_median(img, 3)) : dft2_per_channel(img);
    const auto shifted = fft_shift(log_spectrum(spec));
    for (std::size_t j = 0; j < acc.data.size(); ++j) acc.data[j] += shifted.data[j];
  }
  for (double& v : acc.data) v /= static_cast<double>(sample_n);
  return acc;
}

double nyquist_band_margin(const SpectrumPlanes& shifted, int halfwidth) {
  const int h = shifted.height, w = shifted.width;
  require(halfwidth >= 1 && 4 * halfwidth < std::min(h, w) / 2, "band halfwidth too large for spectrum");
  auto mean_at = [&](int y, int x) {
    return (shifted.at(0, y, x) + shifted.at(1, y, x) + shifted.at(2, y, x)) / 3.0;
  };
  // Circular distance of a shifted index to the Nyquist index 0.
  auto edge_dist = [](int i, int n) { return std::min(i, n - i); };

  double band = 0.0, bg = 0.0;
  long n_band = 0, n_bg = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int dy_nyq = edge_dist(y, h), dx_nyq = edge_dist(x, w);
      const int dy_axis = std::abs(y - h / 2), dx_axis = std::abs(x - w / 2);
      const bool in_band = (dy_nyq <= halfwidth && dx_axis <= halfwidth) ||
                           (dx_nyq <= halfwidth && dy_axis <= halfwidth);
      const bool in_bg = !in_band && ((dy_nyq <= halfwidth && dx_axis <= 4 * halfwidth) ||
                                      (dx_nyq <= halfwidth && dy_axis <= 4 * halfwidth));
      if (in_band) {
        band += mean_at(y, x);
        ++n_band;
      } else if (in_bg) {
        bg += mean_at(y, x);
        ++n_bg;
      }
    }
  return band / static_cast<double>(n_band) - bg / static_cast<double>(n_bg);
}

GrayImage spectrum_display(const SpectrumPlanes& spec) {
  GrayImage g{spec.width, spec.height, std::vector<std::uint8_t>(spec.plane_size())};
  std::vector<double> mean(spec.plane_size());
  for (std::size_t i = 0; i < mean.size(); ++i)
    mean[i] = (spec.data[i] + spec.data[i + mean.size()] + spec.data[i + 2 * mean.size()]) / 3.0;
  const auto [lo, hi] = std::minmax_element(mean.begin(), mean.end());
  const double range = *hi - *lo;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double t = range < 1e-12 ? 0.0 : (mean[i] - *lo) / range;
    g.data[i] = static_cast<std::uint8_t>(std::clamp(std::round(t * 255.0), 0.0, 255.0));
  }
  return g;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::string buf = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  buf.append(img.data.begin(), img.data.end());
  write_file_atomic(path, buf);
}

void write_spectrum_csv(const SpectrumPlanes& spec, int channel, const std::filesystem::path& path) {
  require(channel >= 0 && channel < 3, "channel must be 0..2");
  std::string out;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      if (x) out += ',';
      out += format_double(spec.at(channel, y, x));
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace mccm
