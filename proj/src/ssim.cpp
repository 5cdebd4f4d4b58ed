#include <cmath>

#include "threer/losses.hpp"
#include "threer/network.hpp"

namespace threer {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

template <class T>
const std::vector<T>& gaussian_window() {
  static const std::vector<T> kernel = [] {
    std::vector<double> g(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - (kWindow - 1) / 2.0;
      g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += g[i];
    }
    for (auto& v : g) v /= sum;
    std::vector<T> k2(kWindow * kWindow);
    for (int y = 0; y < kWindow; ++y) {
      for (int x = 0; x < kWindow; ++x) k2[y * kWindow + x] = static_cast<T>(g[y] * g[x]);
    }
    return k2;
  }();
  return kernel;
}

}  // namespace

template <class T>
Tensor<T> ssim_tensor(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("ssim: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  if (a.shape().size() != 4 || a.dim(2) < kWindow || a.dim(3) < kWindow) {
    throw ShapeError("ssim: input " + shape_str(a.shape()) + " smaller than the 11x11 window");
  }
  const auto& win = gaussian_window<T>();
  Tensor<T> mu_a = window_filter(a, win, kWindow);
  Tensor<T> mu_b = window_filter(b, win, kWindow);
  Tensor<T> var_a = sub(window_filter(square(a), win, kWindow), square(mu_a));
  Tensor<T> var_b = sub(window_filter(square(b), win, kWindow), square(mu_b));
  Tensor<T> cov = sub(window_filter(mul(a, b), win, kWindow), mul(mu_a, mu_b));

  Tensor<T> num = mul(add_scalar(mul_scalar(mul(mu_a, mu_b), T(2)), static_cast<T>(kC1)),
                      add_scalar(mul_scalar(cov, T(2)), static_cast<T>(kC2)));
  Tensor<T> den = mul(add_scalar(add(square(mu_a), square(mu_b)), static_cast<T>(kC1)),
                      add_scalar(add(var_a, var_b), static_cast<T>(kC2)));
  return mean(div(num, den));
}

double ssim(const Image& a, const Image& b) {
  return static_cast<double>(ssim_tensor(to_tensor<double>(a), to_tensor<double>(b)).item());
}

template Tensor<float> ssim_tensor(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> ssim_tensor(const Tensor<double>&, const Tensor<double>&);

}  // namespace threer
