#include <algorithm>
#include <cmath>

#include "threer/config.hpp"
#include "threer/image.hpp"

namespace threer {

namespace {

// Raster-causal neighbor offsets matching GrainConfig::ar_coefficients.
constexpr int kMaxLags = 4;
constexpr int kLagDy[kMaxLags] = {0, -1, -1, -1};
constexpr int kLagDx[kMaxLags] = {-1, 0, -1, 1};

}  // namespace

void GrainConfig::validate() const {
  if (ar_coefficients.size() > kMaxLags) {
    throw ConfigError("grain: at most " + std::to_string(kMaxLags) + " AR coefficients");
  }
  double mag = 0.0;
  for (double c : ar_coefficients) mag += std::abs(c);
  if (mag >= 1.0) {
    throw ConfigError("grain: unstable AR coefficients (|sum| = " + std::to_string(mag) + ")");
  }
  if (intensity_scale.empty()) throw ConfigError("grain: empty intensity table");
  for (double s : intensity_scale) {
    if (s < 0.0) throw ConfigError("grain: negative intensity value");
  }
}

std::vector<float> ar_noise_field(int width, int height, const std::vector<double>& coeffs,
                                  Rng& rng) {
  if (coeffs.size() > kMaxLags) {
    throw ConfigError("grain: at most " + std::to_string(kMaxLags) + " AR coefficients");
  }
  std::vector<float> field(static_cast<size_t>(width) * height);
  std::vector<double> row_buf(static_cast<size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = rng.normal();
      for (size_t k = 0; k < coeffs.size(); ++k) {
        const int ny = y + kLagDy[k];
        const int nx = x + kLagDx[k];
        if (ny < 0 || nx < 0 || nx >= width) continue;
        v += coeffs[k] * row_buf[static_cast<size_t>(ny) * width + nx];
      }
      row_buf[static_cast<size_t>(y) * width + x] = v;
      field[static_cast<size_t>(y) * width + x] = static_cast<float>(v);
    }
  }
  return field;
}

Image synthesize_grain(const Image& clean, const GrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto field = ar_noise_field(clean.width, clean.height, cfg.ar_coefficients, rng);
  const int bins = static_cast<int>(cfg.intensity_scale.size());

  Image out = Image::create(clean.width, clean.height);
  for (int y = 0; y < clean.height; ++y) {
    for (int x = 0; x < clean.width; ++x) {
      const float luma = luma601(clean.at(0, y, x), clean.at(1, y, x), clean.at(2, y, x));
      const int bin = std::min(bins - 1, std::max(0, static_cast<int>(luma * bins)));
      const float s = static_cast<float>(cfg.intensity_scale[bin]);
      const float g = s * field[static_cast<size_t>(y) * clean.width + x];
      for (int c = 0; c < 3; ++c) {
        out.at(c, y, x) = std::min(1.0f, std::max(0.0f, clean.at(c, y, x) + g));
      }
    }
  }
  return out;
}

GrainConfig load_grain_config(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::parse_file(path);
  GrainConfig cfg;
  cfg.ar_coefficients = kv.get_list("ar_coefficients", cfg.ar_coefficients);
  cfg.intensity_scale = kv.get_list("intensity_scale", cfg.intensity_scale);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

void save_grain_config(const GrainConfig& cfg, const std::string& path) {
  KeyValueFile kv;
  kv.set_list("ar_coefficients", cfg.ar_coefficients);
  kv.set_list("intensity_scale", cfg.intensity_scale);
  kv.set("seed", std::to_string(cfg.seed));
  kv.write_file(path);
}

}  // namespace threer
