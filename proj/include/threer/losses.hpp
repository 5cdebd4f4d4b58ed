#pragma once

#include <string>

#include "threer/config.hpp"
#include "threer/image.hpp"
#include "threer/tensor.hpp"

namespace threer {

// The six loss coefficients plus the target reduction rate.
struct LossWeights {
  double lambda1 = 40.0;   // forward fidelity
  double lambda2 = 1.0;    // latent regularization
  double lambda3 = 1.0;    // clean reconstruction
  double lambda4 = 1.0;    // grainy reconstruction
  double lambda5 = 1e10;   // power
  double lambda6 = 1e4;    // SSIM
  double R = 0.0;          // target reduction rate in [0,1]

  void validate() const;
  static LossWeights from_config(const KeyValueFile& kv);
};

enum class PowerModel { Luminance, Rgbw };

struct PowerModelConfig {
  PowerModel model = PowerModel::Rgbw;
  double gamma = 2.2;
  // RGBW coefficients, normalized so they sum to 1.
  double k_r = 0.25, k_g = 0.25, k_b = 0.25, k_w = 0.25;

  void validate() const;
  static PowerModelConfig from_config(const KeyValueFile& kv);
};

// Batch mean of per-sample RMS differences; 1.0 for a constant offset of 1.
template <class T>
Tensor<T> loss_forward(const Tensor<T>& lr_pred, const Tensor<T>& lr_gt);

// Per-element Gaussian negative log-likelihood with the constant dropped:
// 0.5 * mean(z^2).
template <class T>
Tensor<T> loss_reg(const Tensor<T>& z);

// Batch mean of per-element L1 distances.
template <class T>
Tensor<T> loss_back_grainy(const Tensor<T>& reconstructed, const Tensor<T>& grainy_gt);
template <class T>
Tensor<T> loss_back_clean(const Tensor<T>& reconstructed, const Tensor<T>& clean_gt);

// Differentiable per-pixel mean power of a [B,3,H,W] tensor in [0,1].
// Channels are linearized with the display gamma first; the RGBW model
// extracts the white subpixel as min(R',G',B').
template <class T>
Tensor<T> power_of(const Tensor<T>& img, const PowerModelConfig& cfg);

// Metric flavor on an image; validates the [0,1] range (1e-6 tolerance).
double power(const Image& img, const PowerModelConfig& cfg);

// | power(pred) - (1-R) * power(ref) |.
template <class T>
Tensor<T> loss_power(const Tensor<T>& lr_pred, const Tensor<T>& lr_ref, double R,
                     const PowerModelConfig& cfg);

// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), C1=0.01^2, C2=0.03^2
// on the [0,1] range, valid-mode windows, averaged over channels.
template <class T>
Tensor<T> ssim_tensor(const Tensor<T>& a, const Tensor<T>& b);

double ssim(const Image& a, const Image& b);

template <class T>
Tensor<T> loss_ssim(const Tensor<T>& lr_pred, const Tensor<T>& lr_ref);

template <class T>
struct LossParts {
  Tensor<T> forward;
  Tensor<T> reg;
  Tensor<T> back_clean;
  Tensor<T> back_grainy;
  Tensor<T> power;  // stage 2 only
  Tensor<T> ssim;   // stage 2 only
};

// stage1 = l1*L_forw + l2*L_reg + l3*L_back_C + l4*L_back_G;
// stage2 adds l5*L_pow + l6*L_SSIM. A non-finite part raises an error
// naming the term.
template <class T>
Tensor<T> total_loss_stage1(const LossParts<T>& parts, const LossWeights& w);
template <class T>
Tensor<T> total_loss_stage2(const LossParts<T>& parts, const LossWeights& w);

}  // namespace threer
