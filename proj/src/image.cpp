#include <algorithm>
#include <array>
#include <cmath>

#include "threer/image.hpp"

namespace threer {

namespace {

// a = -0.5 cubic, stretched by the scale factor 2 and pre-normalized: the
// eight tap weights sum to exactly 1.
constexpr int kTaps = 8;

std::array<double, kTaps> compute_bicubic_weights() {
  auto kernel = [](double t) {
    const double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * (t * t * t - 5.0 * t * t + 8.0 * t - 4.0);
    return 0.0;
  };
  std::array<double, kTaps> v{};
  double sum = 0.0;
  for (int k = 0; k < kTaps; ++k) {
    v[k] = kernel((k - 3.5) / 2.0) / 2.0;
    sum += v[k];
  }
  for (auto& x : v) x /= sum;
  return v;
}

const double* bicubic_weights() {
  static const std::array<double, kTaps> w = compute_bicubic_weights();
  return w.data();
}

}  // namespace

Image bicubic_downscale_x2(const Image& img) {
  if (img.width % 2 != 0 || img.height % 2 != 0) {
    throw ShapeError("bicubic_downscale_x2: odd dimensions " + std::to_string(img.width) + "x" +
                     std::to_string(img.height));
  }
  const int w = img.width, h = img.height;
  const int w2 = w / 2, h2 = h / 2;
  const double* wt = bicubic_weights();

  Image out = Image::create(w2, h2);
  std::vector<double> tmp(3 * static_cast<size_t>(w2) * h);  // rows filtered, columns pending
  for (int c = 0; c < 3; ++c) {
    const float* src = img.data.data() + c * img.plane();
    double* mid = tmp.data() + c * static_cast<size_t>(w2) * h;
    for (int y = 0; y < h; ++y) {
      const float* row = src + static_cast<size_t>(y) * w;
      for (int i = 0; i < w2; ++i) {
        double acc = 0.0;
        for (int k = 0; k < kTaps; ++k) {
          const int j = std::clamp(2 * i - 3 + k, 0, w - 1);
          acc += wt[k] * row[j];
        }
        mid[static_cast<size_t>(y) * w2 + i] = acc;
      }
    }
    float* dst = out.data.data() + c * out.plane();
    for (int i = 0; i < h2; ++i) {
      for (int x = 0; x < w2; ++x) {
        double acc = 0.0;
        for (int k = 0; k < kTaps; ++k) {
          const int j = std::clamp(2 * i - 3 + k, 0, h - 1);
          acc += wt[k] * mid[static_cast<size_t>(j) * w2 + x];
        }
        dst[static_cast<size_t>(i) * w2 + x] =
            static_cast<float>(std::min(1.0, std::max(0.0, acc)));
      }
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out = Image::create(img.width, img.height);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
      }
    }
  }
  return out;
}

Image flip_vertical(const Image& img) {
  Image out = Image::create(img.width, img.height);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        out.at(c, y, x) = img.at(c, img.height - 1 - y, x);
      }
    }
  }
  return out;
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height) {
    throw ShapeError("crop: window exceeds image bounds");
  }
  Image out = Image::create(w, h);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
      }
    }
  }
  return out;
}

TrainingPair make_training_pair(const Image& clean, const GrainConfig& cfg) {
  if (clean.width % 2 != 0 || clean.height % 2 != 0) {
    throw ShapeError("make_training_pair: dimensions must be even");
  }
  TrainingPair pair;
  pair.clean_hr = clean;
  pair.grainy_hr = synthesize_grain(clean, cfg);
  pair.clean_lr = bicubic_downscale_x2(clean);
  return pair;
}

TrainingPair random_crop_flip(const TrainingPair& pair, int size, Rng& rng) {
  const Image& g = pair.grainy_hr;
  const Image& c = pair.clean_hr;
  if (g.width != c.width || g.height != c.height) {
    throw ShapeError("random_crop_flip: grainy/clean dimensions differ");
  }
  if (size % 2 != 0) throw ShapeError("random_crop_flip: crop size must be even");
  if (g.width < size || g.height < size) {
    throw ShapeError("random_crop_flip: image " + std::to_string(g.width) + "x" +
                     std::to_string(g.height) + " smaller than crop " + std::to_string(size));
  }
  const int x0 = static_cast<int>(rng.uniform_int(0, g.width - size));
  const int y0 = static_cast<int>(rng.uniform_int(0, g.height - size));
  const bool fh = rng.coin();
  const bool fv = rng.coin();

  auto apply = [&](const Image& img) {
    Image out = crop(img, x0, y0, size, size);
    if (fh) out = flip_horizontal(out);
    if (fv) out = flip_vertical(out);
    return out;
  };

  TrainingPair out;
  out.grainy_hr = apply(g);
  out.clean_hr = apply(c);
  out.clean_lr = bicubic_downscale_x2(out.clean_hr);
  return out;
}

}  // namespace threer
