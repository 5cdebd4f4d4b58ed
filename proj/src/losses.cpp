#include "threer/losses.hpp"

#include <cmath>

namespace threer {

void LossWeights::validate() const {
  for (double l : {lambda1, lambda2, lambda3, lambda4, lambda5, lambda6}) {
    if (l < 0.0 || !std::isfinite(l)) throw ConfigError("loss weights must be nonnegative");
  }
  if (R < 0.0 || R > 1.0) throw ConfigError("R must be in [0,1]");
}

LossWeights LossWeights::from_config(const KeyValueFile& kv) {
  LossWeights w;
  w.lambda1 = kv.get_double("lambda1", w.lambda1);
  w.lambda2 = kv.get_double("lambda2", w.lambda2);
  w.lambda3 = kv.get_double("lambda3", w.lambda3);
  w.lambda4 = kv.get_double("lambda4", w.lambda4);
  w.lambda5 = kv.get_double("lambda5", w.lambda5);
  w.lambda6 = kv.get_double("lambda6", w.lambda6);
  w.R = kv.get_double("R", w.R);
  w.validate();
  return w;
}

template <class T>
Tensor<T> loss_forward(const Tensor<T>& lr_pred, const Tensor<T>& lr_gt) {
  if (lr_pred.shape() != lr_gt.shape()) {
    throw ShapeError("loss_forward: shape mismatch " + shape_str(lr_pred.shape()) + " vs " +
                     shape_str(lr_gt.shape()));
  }
  Tensor<T> d = sub(lr_pred, lr_gt);
  return mean(sqrt(per_sample_mean(square(d))));
}

template <class T>
Tensor<T> loss_reg(const Tensor<T>& z) {
  return mul_scalar(mean(square(z)), T(0.5));
}

namespace {

template <class T>
Tensor<T> l1_loss(const char* name, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  return mean(abs(sub(a, b)));
}

template <class T>
void check_part(const Tensor<T>& part, const char* name) {
  if (!part.defined()) throw NumericError(std::string(name) + " missing");
  if (!std::isfinite(static_cast<double>(part.item()))) {
    throw NumericError(std::string(name) + " non-finite");
  }
}

}  // namespace

template <class T>
Tensor<T> loss_back_grainy(const Tensor<T>& reconstructed, const Tensor<T>& grainy_gt) {
  return l1_loss("loss_back_grainy", reconstructed, grainy_gt);
}

template <class T>
Tensor<T> loss_back_clean(const Tensor<T>& reconstructed, const Tensor<T>& clean_gt) {
  return l1_loss("loss_back_clean", reconstructed, clean_gt);
}

template <class T>
Tensor<T> loss_power(const Tensor<T>& lr_pred, const Tensor<T>& lr_ref, double R,
                     const PowerModelConfig& cfg) {
  if (R < 0.0 || R > 1.0) throw ConfigError("loss_power: R must be in [0,1]");
  Tensor<T> p_pred = power_of(lr_pred, cfg);
  Tensor<T> p_target = mul_scalar(power_of(lr_ref, cfg), static_cast<T>(1.0 - R));
  return abs(sub(p_pred, p_target));
}

template <class T>
Tensor<T> loss_ssim(const Tensor<T>& lr_pred, const Tensor<T>& lr_ref) {
  return add_scalar(mul_scalar(ssim_tensor(lr_pred, lr_ref), T(-1)), T(1));
}

template <class T>
Tensor<T> total_loss_stage1(const LossParts<T>& parts, const LossWeights& w) {
  check_part(parts.forward, "loss_forward");
  check_part(parts.reg, "loss_reg");
  check_part(parts.back_clean, "loss_back_clean");
  check_part(parts.back_grainy, "loss_back_grainy");
  Tensor<T> total = mul_scalar(parts.forward, static_cast<T>(w.lambda1));
  total = add(total, mul_scalar(parts.reg, static_cast<T>(w.lambda2)));
  total = add(total, mul_scalar(parts.back_clean, static_cast<T>(w.lambda3)));
  total = add(total, mul_scalar(parts.back_grainy, static_cast<T>(w.lambda4)));
  return total;
}

template <class T>
Tensor<T> total_loss_stage2(const LossParts<T>& parts, const LossWeights& w) {
  Tensor<T> total = total_loss_stage1(parts, w);
  check_part(parts.power, "loss_power");
  check_part(parts.ssim, "loss_ssim");
  total = add(total, mul_scalar(parts.power, static_cast<T>(w.lambda5)));
  total = add(total, mul_scalar(parts.ssim, static_cast<T>(w.lambda6)));
  return total;
}

#define THREER_INSTANTIATE_LOSSES(T)                                                   \
  template Tensor<T> loss_forward(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> loss_reg(const Tensor<T>&);                                       \
  template Tensor<T> loss_back_grainy(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> loss_back_clean(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> loss_power(const Tensor<T>&, const Tensor<T>&, double,            \
                                const PowerModelConfig&);                              \
  template Tensor<T> loss_ssim(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> total_loss_stage1(const LossParts<T>&, const LossWeights&);       \
  template Tensor<T> total_loss_stage2(const LossParts<T>&, const LossWeights&);

THREER_INSTANTIATE_LOSSES(float)
THREER_INSTANTIATE_LOSSES(double)

#undef THREER_INSTANTIATE_LOSSES

}  // namespace threer
