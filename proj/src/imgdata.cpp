#include "mccm/imgdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mccm/error.hpp"
#include "mccm/io.hpp"
#include "mccm/rng.hpp"

namespace mccm {

namespace {

constexpr double kFieldSigma = 3.0;
constexpr double kGradientAmplitude = 0.1;
constexpr double kFineNoise = 0.02;
constexpr double kUpsampleNoise = 0.005;
constexpr double kBlendWeight = 0.8;

// Mirror about the edge sample without repeating it (…2 1 | 0 1 2 … n-1 | n-2 …).
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i >= n ? period - i : i;
}

void check_size(int n, int size) {
  require(n >= 1, "image count must be >= 1, got " + std::to_string(n));
  require(size >= 16 && size % 2 == 0,
          "image size must be even and >= 16, got " + std::to_string(size));
}

template <class Tag>
void blur_in_place(Raster<Tag>& img, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  const int r = static_cast<int>(taps.size() / 2);
  if (r == 0) return;
  const int w = img.width, h = img.height;
  std::vector<double> tmp(img.plane_size());
  for (int c = 0; c < Raster<Tag>::channels; ++c) {
    auto p = img.plane(c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) acc += taps[k + r] * p[y * w + reflect(x + k, w)];
        tmp[y * w + x] = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) acc += taps[k + r] * tmp[reflect(y + k, h) * w + x];
        p[y * w + x] = acc;
      }
  }
}

void clamp01(RgbImage& img) {
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

// Draw order: three noise fields (channel, row, column), three gradient
// angles, then fine noise (channel, row, column).
RgbImage render_pristine(SplitMix64& rng, int size) {
  RgbImage img(size, size);
  for (double& v : img.data) v = rng.normal();
  blur_in_place(img, kFieldSigma);
  for (int c = 0; c < RgbImage::channels; ++c) {
    auto p = img.plane(c);
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    const double mn = *lo, range = *hi - *lo;
    for (double& v : p) v = range > 1e-12 ? 0.1 + 0.8 * (v - mn) / range : 0.5;
  }
  const double denom = static_cast<double>(size - 1);
  for (int c = 0; c < RgbImage::channels; ++c) {
    const double theta = rng.uniform() * 2.0 * std::numbers::pi;
    const double cx = std::cos(theta), sy = std::sin(theta);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        img.at(c, y, x) += kGradientAmplitude * ((x / denom - 0.5) * cx + (y / denom - 0.5) * sy);
  }
  for (double& v : img.data) v += kFineNoise * rng.normal();
  clamp01(img);
  return img;
}

RgbImage upsample_nearest2(const RgbImage& src) {
  RgbImage out(src.width * 2, src.height * 2);
  for (int c = 0; c < RgbImage::channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = src.at(c, y / 2, x / 2);
  return out;
}

// Rotation about the gray axis (1,1,1)/sqrt(3).
void rotate_hue_in_ellipse(RgbImage& img, SplitMix64& rng) {
  const double s = img.width;
  const double cx = rng.uniform(s / 4, 3 * s / 4);
  const double cy = rng.uniform(s / 4, 3 * s / 4);
  const double ax = rng.uniform(s / 8, s / 4);
  const double ay = rng.uniform(s / 8, s / 4);
  const double phi = rng.uniform() * std::numbers::pi;
  const double angle = rng.uniform(60.0, 120.0) * std::numbers::pi / 180.0;

  const double ca = std::cos(angle), sa = std::sin(angle);
  const double a = ca + (1.0 - ca) / 3.0;
  const double b = (1.0 - ca) / 3.0 - std::sqrt(1.0 / 3.0) * sa;
  const double d = (1.0 - ca) / 3.0 + std::sqrt(1.0 / 3.0) * sa;
  const double cp = std::cos(phi), sp = std::sin(phi);

  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = (dx * cp + dy * sp) / ax;
      const double v = (-dx * sp + dy * cp) / ay;
      if (u * u + v * v > 1.0) continue;
      const double r = img.at(0, y, x), g = img.at(1, y, x), bl = img.at(2, y, x);
      const double rr = a * r + b * g + d * bl;
      const double gg = d * r + a * g + b * bl;
      const double bb = b * r + d * g + a * bl;
      img.at(0, y, x) = std::clamp(kBlendWeight * rr + (1 - kBlendWeight) * r, 0.0, 1.0);
      img.at(1, y, x) = std::clamp(kBlendWeight * gg + (1 - kBlendWeight) * g, 0.0, 1.0);
      img.at(2, y, x) = std::clamp(kBlendWeight * bb + (1 - kBlendWeight) * bl, 0.0, 1.0);
    }
}

template <class Render>
std::vector<RgbImage> generate_with(std::uint64_t seed, int n, Render render) {
  SplitMix64 master(seed);
  std::vector<RgbImage> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    SplitMix64 rng(master.next());
    out.push_back(render(rng));
  }
  return out;
}

constexpr std::array<int, 64> kLumaBase{
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChromaBase{
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

double round_half_away(double v) { return std::round(v); }

struct DctBasis {
  // basis[u][x] = C(u)/2 * cos((2x+1) u pi / 16)
  double basis[8][8];
  DctBasis() {
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x) {
        const double cu = u == 0 ? std::sqrt(0.5) : 1.0;
        basis[u][x] = 0.5 * cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
  }
};

const DctBasis& dct_basis() {
  static const DctBasis b;
  return b;
}

void quantize_block(double block[8][8], const std::array<int, 64>& q) {
  const auto& B = dct_basis().basis;
  double tmp[8][8];
  double coef[8][8];
  // rows then columns
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int x = 0; x < 8; ++x) acc += B[u][x] * block[y][x];
      tmp[y][u] = acc;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y) acc += B[v][y] * tmp[y][u];
      coef[v][u] = acc;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      const double step = q[v * 8 + u];
      coef[v][u] = round_half_away(coef[v][u] / step) * step;
    }
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) acc += B[u][x] * coef[v][u];
      tmp[v][x] = acc;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) acc += B[v][y] * tmp[v][x];
      block[y][x] = acc;
    }
}

}  // namespace

std::string_view to_string(Generator g) {
  switch (g) {
    case Generator::pristine: return "pristine";
    case Generator::freqfake: return "freqfake";
    case Generator::spatialfake: return "spatialfake";
  }
  return "?";
}

Generator parse_generator(std::string_view name) {
  if (name == "pristine") return Generator::pristine;
  if (name == "freqfake") return Generator::freqfake;
  if (name == "spatialfake") return Generator::spatialfake;
  fail(Errc::invalid_argument, "unknown generator '" + std::string(name) + "'");
}

std::vector<RgbImage> gen_pristine(std::uint64_t seed, int n, int size) {
  check_size(n, size);
  return generate_with(seed, n, [size](SplitMix64& rng) { return render_pristine(rng, size); });
}

std::vector<RgbImage> gen_freqfake(std::uint64_t seed, int n, int size) {
  check_size(n, size);
  return generate_with(seed, n, [size](SplitMix64& rng) {
    RgbImage img = upsample_nearest2(render_pristine(rng, size / 2));
    for (double& v : img.data) v += kUpsampleNoise * rng.normal();
    clamp01(img);
    return img;
  });
}

std::vector<RgbImage> gen_spatialfake(std::uint64_t seed, int n, int size) {
  check_size(n, size);
  return generate_with(seed, n, [size](SplitMix64& rng) {
    RgbImage img = render_pristine(rng, size);
    rotate_hue_in_ellipse(img, rng);
    return img;
  });
}

std::vector<RgbImage> generate(Generator g, std::uint64_t seed, int n, int size) {
  switch (g) {
    case Generator::pristine: return gen_pristine(seed, n, size);
    case Generator::freqfake: return gen_freqfake(seed, n, size);
    case Generator::spatialfake: return gen_spatialfake(seed, n, size);
  }
  fail(Errc::invalid_argument, "unknown generator");
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma == 0.0) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * r + 1);
  double sum = 0.0;
  for (int k = -r; k <= r; ++k) {
    taps[k + r] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    sum += taps[k + r];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

RgbImage gaussian_blur(const RgbImage& img, double sigma) {
  require(sigma >= 0.0 && sigma <= 2.0, "blur sigma must be in [0,2], got " + format_double(sigma));
  RgbImage out = img;
  blur_in_place(out, sigma);
  return out;
}

std::array<int, 64> jpeg_quant_table(int quality, bool chroma) {
  require(quality >= 1 && quality <= 100, "JPEG quality must be in [1,100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  const auto& base = chroma ? kChromaBase : kLumaBase;
  std::array<int, 64> q{};
  for (int i = 0; i < 64; ++i) q[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return q;
}

RgbImage jpeg_sim(const RgbImage& img, int quality) {
  require(std::find(kJpegQualities.begin(), kJpegQualities.end(), quality) != kJpegQualities.end(),
          "JPEG quality must be one of 60,70,80,90,100, got " + std::to_string(quality));
  const auto q_luma = jpeg_quant_table(quality, false);
  const auto q_chroma = jpeg_quant_table(quality, true);

  const int w = img.width, h = img.height;
  const int pw = (w + 7) / 8 * 8, ph = (h + 7) / 8 * 8;

  // YCbCr planes on the 0..255 scale, edge-replicated to the padded size.
  std::vector<double> ycc[3];
  for (auto& p : ycc) p.assign(static_cast<std::size_t>(pw) * ph, 0.0);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x) {
      const int sy = std::min(y, h - 1), sx = std::min(x, w - 1);
      const double r = img.at(0, sy, sx) * 255.0;
      const double g = img.at(1, sy, sx) * 255.0;
      const double b = img.at(2, sy, sx) * 255.0;
      const std::size_t i = static_cast<std::size_t>(y) * pw + x;
      ycc[0][i] = 0.299 * r + 0.587 * g + 0.114 * b;
      ycc[1][i] = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
      ycc[2][i] = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    }

  double block[8][8];
  for (int c = 0; c < 3; ++c) {
    const auto& q = c == 0 ? q_luma : q_chroma;
    for (int by = 0; by < ph; by += 8)
      for (int bx = 0; bx < pw; bx += 8) {
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) block[y][x] = ycc[c][(by + y) * pw + bx + x] - 128.0;
        quantize_block(block, q);
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            ycc[c][(by + y) * pw + bx + x] = std::clamp(block[y][x] + 128.0, 0.0, 255.0);
      }
  }

  RgbImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * pw + x;
      const double yy = ycc[0][i], cb = ycc[1][i] - 128.0, cr = ycc[2][i] - 128.0;
      out.at(0, y, x) = std::clamp((yy + 1.402 * cr) / 255.0, 0.0, 1.0);
      out.at(1, y, x) = std::clamp((yy - 0.344136 * cb - 0.714136 * cr) / 255.0, 0.0, 1.0);
      out.at(2, y, x) = std::clamp((yy + 1.772 * cb) / 255.0, 0.0, 1.0);
    }
  return out;
}

RgbImage hflip(const RgbImage& img) {
  RgbImage out(img.width, img.height);
  for (int c = 0; c < RgbImage::channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

RgbImage apply_augment(const RgbImage& img, const AugmentSpec& spec) {
  return jpeg_sim(gaussian_blur(img, spec.sigma), spec.quality);
}

AugmentSpec deterministic_eval_aug(std::string_view image_id, std::uint64_t eval_seed) {
  SplitMix64 rng(eval_seed ^ fnv1a64(image_id));
  AugmentSpec spec;
  spec.sigma = rng.uniform() * 2.0;
  spec.quality = kJpegQualities[rng.below(kJpegQualities.size())];
  return spec;
}

std::uint8_t quantize_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(round_half_away(v * 255.0), 0.0, 255.0));
}

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
  std::string buf = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  const std::size_t header = buf.size();
  buf.resize(header + img.plane_size() * 3);
  std::size_t k = header;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < RgbImage::channels; ++c)
        buf[k++] = static_cast<char>(quantize_byte(img.at(c, y, x)));
  write_file_atomic(path, buf);
}

RgbImage read_ppm(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  std::size_t pos = 0;
  auto bad = [&](const std::string& why) -> void {
    fail(Errc::malformed_header, path.string() + ": malformed PPM header (" + why + ")");
  };
  auto skip_space = [&] {
    while (pos < raw.size()) {
      if (raw[pos] == '#') {
        while (pos < raw.size() && raw[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(raw[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    const std::size_t start = pos;
    while (pos < raw.size() && std::isdigit(static_cast<unsigned char>(raw[pos]))) ++pos;
    if (pos == start || pos - start > 9) bad("expected a positive integer");
    return std::stol(raw.substr(start, pos - start));
  };

  if (raw.size() < 2 || raw[0] != 'P' || raw[1] != '6') bad("missing P6 magic");
  pos = 2;
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (w <= 0 || h <= 0) bad("non-positive dimensions");
  if (maxval != 255) bad("only maxval 255 is supported");
  if (pos >= raw.size() || !std::isspace(static_cast<unsigned char>(raw[pos]))) bad("missing separator");
  ++pos;

  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (raw.size() - pos < need)
    fail(Errc::truncated_payload, path.string() + ": truncated PPM payload (" +
                                      std::to_string(raw.size() - pos) + " of " +
                                      std::to_string(need) + " bytes)");
  RgbImage img(static_cast<int>(w), static_cast<int>(h));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < RgbImage::channels; ++c)
        img.at(c, y, x) = static_cast<unsigned char>(raw[pos++]) / 255.0;
  return img;
}

}  // namespace mccm
