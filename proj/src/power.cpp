#include <cmath>

#include "threer/losses.hpp"
#include "threer/network.hpp"

namespace threer {

void PowerModelConfig::validate() const {
  if (gamma <= 0.0) throw ConfigError("power: gamma must be positive");
  const double sum = k_r + k_g + k_b + k_w;
  for (double k : {k_r, k_g, k_b, k_w}) {
    if (k < 0.0) throw ConfigError("power: RGBW coefficients must be nonnegative");
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("power: RGBW coefficients must sum to 1, got " + std::to_string(sum));
  }
}

PowerModelConfig PowerModelConfig::from_config(const KeyValueFile& kv) {
  PowerModelConfig cfg;
  const std::string model = kv.get_string("power_model", "rgbw");
  if (model == "rgbw") {
    cfg.model = PowerModel::Rgbw;
  } else if (model == "luminance") {
    cfg.model = PowerModel::Luminance;
  } else {
    throw ConfigError("power: unknown power_model '" + model + "'");
  }
  cfg.gamma = kv.get_double("gamma", cfg.gamma);
  cfg.k_r = kv.get_double("k_r", cfg.k_r);
  cfg.k_g = kv.get_double("k_g", cfg.k_g);
  cfg.k_b = kv.get_double("k_b", cfg.k_b);
  cfg.k_w = kv.get_double("k_w", cfg.k_w);
  cfg.validate();
  return cfg;
}

template <class T>
Tensor<T> power_of(const Tensor<T>& img, const PowerModelConfig& cfg) {
  cfg.validate();
  if (img.shape().size() != 4 || img.dim(1) != 3) {
    throw ShapeError("power: expected [B,3,H,W], got " + shape_str(img.shape()));
  }
  for (T v : img.data()) {
    const double d = static_cast<double>(v);
    if (d < -1e-6 || d > 1.0 + 1e-6) {
      throw NumericError("power: value " + std::to_string(d) + " outside [0,1]");
    }
  }
  // Tolerated off-by-epsilon values are snapped into range before the
  // fractional power.
  Tensor<T> lin = pow_scalar(clamp(img, T(0), T(1)), static_cast<T>(cfg.gamma));
  auto rgb = split(lin, {1, 1, 1});
  if (cfg.model == PowerModel::Luminance) {
    Tensor<T> y = add(add(mul_scalar(rgb[0], T(0.2126)), mul_scalar(rgb[1], T(0.7152))),
                      mul_scalar(rgb[2], T(0.0722)));
    return mean(y);
  }
  // White extraction: the W subpixel carries the common component at the
  // full normalized drive (a white image consumes 1), the color subpixels
  // only their residuals.
  Tensor<T> white = minimum(minimum(rgb[0], rgb[1]), rgb[2]);
  const double white_weight = cfg.k_r + cfg.k_g + cfg.k_b + cfg.k_w;
  Tensor<T> p = mul_scalar(sub(rgb[0], white), static_cast<T>(cfg.k_r));
  p = add(p, mul_scalar(sub(rgb[1], white), static_cast<T>(cfg.k_g)));
  p = add(p, mul_scalar(sub(rgb[2], white), static_cast<T>(cfg.k_b)));
  p = add(p, mul_scalar(white, static_cast<T>(white_weight)));
  return mean(p);
}

double power(const Image& img, const PowerModelConfig& cfg) {
  return static_cast<double>(power_of(to_tensor<double>(img), cfg).item());
}

template Tensor<float> power_of(const Tensor<float>&, const PowerModelConfig&);
template Tensor<double> power_of(const Tensor<double>&, const PowerModelConfig&);

}  // namespace threer
