#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "threer/errors.hpp"

namespace threer {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <class T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until backward touches this node
  bool requires_grad = false;
};

// Dense N-D tensor handle with value semantics on the handle and shared
// storage underneath. 4-D use is (batch, channels, height, width).
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor from_data(Shape shape, std::vector<T> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::vector<T>& data() { return impl_->data; }
  const std::vector<T>& data() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Accumulator with the same shape as data; zero-initialized on first use.
  std::vector<T>& grad();
  const std::vector<T>& grad() const;
  void zero_grad() { impl_->grad.clear(); }

  // Same storage, detached from gradient tracking.
  Tensor detach() const;
  // Deep copy of the values (no grad, no tracking).
  Tensor clone() const;

  // Value of a single-element tensor.
  T item() const;

  std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl<T>> impl_;

  template <class U>
  friend class Tensor;
  template <class U>
  friend Tensor<U> wrap_impl(std::shared_ptr<TensorImpl<U>> impl);
};

template <class T>
Tensor<T> wrap_impl(std::shared_ptr<TensorImpl<T>> impl) {
  return Tensor<T>(std::move(impl));
}

// Reverse-mode tape. Constructing a Tape makes it the recording target for
// the current thread (RAII, nestable); ops record themselves when an input
// requires grad. One graph is single-threaded; independent graphs on
// separate threads each see their own tape.
template <class T>
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::function<void()> backfn) { records_.push_back(std::move(backfn)); }
  size_t size() const { return records_.size(); }

  // Populates grads of every reachable requires_grad tensor, then clears the
  // tape. A second call without a fresh forward is an error.
  void backward(const Tensor<T>& loss);

 private:
  std::vector<std::function<void()>> records_;
  Tape* previous_ = nullptr;
  bool spent_ = false;
};

// ---- differentiable operations ------------------------------------------

// 3x3 cross-correlation, stride 1, zero padding 1. weight is [Cout,Cin,3,3],
// bias is [Cout].
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T negative_slope);

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
// Errors on a zero anywhere in the denominator.
template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <class T>
Tensor<T> add_scalar(const Tensor<T>& x, T s);
template <class T>
Tensor<T> mul_scalar(const Tensor<T>& x, T s);
// x^p for x >= 0.
template <class T>
Tensor<T> pow_scalar(const Tensor<T>& x, T p);

template <class T>
Tensor<T> exp(const Tensor<T>& x);
template <class T>
Tensor<T> log(const Tensor<T>& x);
template <class T>
Tensor<T> abs(const Tensor<T>& x);
template <class T>
Tensor<T> square(const Tensor<T>& x);
template <class T>
Tensor<T> sqrt(const Tensor<T>& x);
template <class T>
Tensor<T> tanh(const Tensor<T>& x);
template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);
// Elementwise minimum; ties route their gradient to a.
template <class T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b);

// Full reduction to a single-element tensor. Accumulates in double.
template <class T>
Tensor<T> sum(const Tensor<T>& x);
template <class T>
Tensor<T> mean(const Tensor<T>& x);
// Mean over all non-batch axes; result shape is [B].
template <class T>
Tensor<T> per_sample_mean(const Tensor<T>& x);

// Channel-axis concat/split for 4-D tensors. split(concat(parts)) == parts.
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts);
template <class T>
std::vector<Tensor<T>> split(const Tensor<T>& x, const std::vector<int>& sizes);

// Per-channel valid-mode correlation with one fixed (non-learnable) KxK
// window; output is [B,C,H-K+1,W-K+1]. Used by the SSIM window statistics.
template <class T>
Tensor<T> window_filter(const Tensor<T>& x, const std::vector<T>& kernel, int k);

template <class T>
void backward(const Tensor<T>& loss);

}  // namespace threer
