#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mccm/image.hpp"

namespace mccm {

enum class Generator { pristine, freqfake, spatialfake };

std::string_view to_string(Generator g);
Generator parse_generator(std::string_view name);

/// Class convention: pristine = 1, synthetic = 0.
inline int label_of(Generator g) { return g == Generator::pristine ? 1 : 0; }

// Procedural toy data. Image i of a call depends only on (seed, i, size), so a
// longer run extends a shorter one.

/// Blurred noise fields normalized to [0.1,0.9] per channel, plus a linear
/// color gradient and fine noise.
std::vector<RgbImage> gen_pristine(std::uint64_t seed, int n, int size);

/// Pristine recipe rendered at half size, nearest-neighbor upsampled x2, light
/// noise on top. Leaves baseband replicas around the Nyquist frequencies.
std::vector<RgbImage> gen_freqfake(std::uint64_t seed, int n, int size);

/// Pristine recipe with the hue of one random ellipse rotated and blended in.
/// Pixels outside the ellipse are identical to gen_pristine with the same seed.
std::vector<RgbImage> gen_spatialfake(std::uint64_t seed, int n, int size);

std::vector<RgbImage> generate(Generator g, std::uint64_t seed, int n, int size);

/// Normalized 1-D Gaussian taps for radius ceil(3*sigma); {1} for sigma == 0.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with reflect padding. sigma must lie in [0,2].
RgbImage gaussian_blur(const RgbImage& img, double sigma);

inline constexpr std::array<int, 5> kJpegQualities{60, 70, 80, 90, 100};

/// IJG-scaled Annex K table (luminance or chrominance), natural row-major order.
std::array<int, 64> jpeg_quant_table(int quality, bool chroma);

/// Block-DCT JPEG simulation: BT.601 full-range YCbCr, no subsampling,
/// quantize/dequantize per 8x8 block, no entropy coding.
RgbImage jpeg_sim(const RgbImage& img, int quality);

RgbImage hflip(const RgbImage& img);

struct AugmentSpec {
  double sigma = 0.0;
  int quality = 100;

  bool operator==(const AugmentSpec&) const = default;
};

/// Blur first, then JPEG.
RgbImage apply_augment(const RgbImage& img, const AugmentSpec& spec);

/// Per-image augmentation that depends only on (image_id, eval_seed), so every
/// model sees the same degraded test images.
AugmentSpec deterministic_eval_aug(std::string_view image_id, std::uint64_t eval_seed);

/// round-half-away-from-zero of v*255, clamped to a byte.
std::uint8_t quantize_byte(double v);

void write_ppm(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

}  // namespace mccm
