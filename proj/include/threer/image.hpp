#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "threer/errors.hpp"
#include "threer/rng.hpp"

namespace threer {

// Planar RGB raster with display-referred values in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 planes of height*width

  static Image create(int width, int height, float fill = 0.0f);

  size_t plane() const { return static_cast<size_t>(width) * height; }
  float& at(int c, int y, int x) { return data[c * plane() + static_cast<size_t>(y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[c * plane() + static_cast<size_t>(y) * width + x];
  }
};

// BT.601 luma on display-referred values; shared by grain lookup and PSNR-Y.
inline float luma601(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

// 8- or 16-bit RGB PNG only. Loaded values are scaled to [0,1]; saving
// quantizes to 8-bit with round-half-away-from-zero.
Image load_png(const std::string& path);
void save_png(const Image& img, const std::string& path);

// Half-resolution downscale with the a = -0.5 (Catmull-Rom family) bicubic
// kernel, stretched 2x for antialiasing, edge-clamped, output in [0,1].
Image bicubic_downscale_x2(const Image& img);

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);

// Autoregressive film-grain model: seeded white Gaussian noise run through a
// causal 2-D AR recursion, scaled per pixel by a luminance-indexed strength
// table and added to the clean image.
struct GrainConfig {
  // Weights for the raster-causal neighbors, in this fixed order:
  //   [ (y, x-1), (y-1, x), (y-1, x-1), (y-1, x+1) ]
  // A single coefficient is a per-row AR(1) process.
  std::vector<double> ar_coefficients{0.35, 0.25, 0.15};
  // Grain strength per equal-width luminance bin over [0,1].
  std::vector<double> intensity_scale{0.06, 0.08, 0.08, 0.06};
  std::uint64_t seed = 0;

  void validate() const;  // stability (sum |coef| < 1), nonnegative strengths
};

GrainConfig load_grain_config(const std::string& path);
void save_grain_config(const GrainConfig& cfg, const std::string& path);

Image synthesize_grain(const Image& clean, const GrainConfig& cfg);

// The raw stationary field driven by unit-variance noise, exposed so its
// statistics can be checked against the analytic AR variance.
std::vector<float> ar_noise_field(int width, int height, const std::vector<double>& coeffs,
                                  Rng& rng);

struct TrainingPair {
  Image grainy_hr;
  Image clean_hr;
  Image clean_lr;  // bicubic half-scale of clean_hr
};

// Builds the pair from a clean image (even dims required).
TrainingPair make_training_pair(const Image& clean, const GrainConfig& cfg);

// Identical crop window and flip decisions for grainy/clean; clean_lr is
// re-derived from the cropped clean so the half-scale correspondence is exact.
TrainingPair random_crop_flip(const TrainingPair& pair, int size, Rng& rng);

Image crop(const Image& img, int x0, int y0, int w, int h);

}  // namespace threer
