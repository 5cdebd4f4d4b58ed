#include "threer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace threer {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

namespace {

template <class T>
std::vector<T>& ensure_grad(TensorImpl<T>& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), T(0));
  return t.grad;
}

template <class T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

template <class T>
thread_local Tape<T>* g_active_tape = nullptr;

// Elementwise unary: fwd(x) -> y, bwd(x, y) -> dy/dx.
template <class T, class Fwd, class Bwd>
Tensor<T> unary(const Tensor<T>& x, Fwd fwd, Bwd bwd) {
  auto out = Tensor<T>::zeros(x.shape());
  const auto& xd = x.data();
  auto& od = out.data();
  for (size_t i = 0; i < xd.size(); ++i) od[i] = fwd(xd[i]);
  auto* tape = Tape<T>::active();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    tape->record([xi, oi, bwd] {
      if (oi->grad.empty()) return;
      auto& g = ensure_grad(*xi);
      for (size_t i = 0; i < g.size(); ++i) {
        g[i] += bwd(xi->data[i], oi->data[i]) * oi->grad[i];
      }
    });
  }
  return out;
}

// Elementwise binary: fwd(a, b) -> y; da/db give the local derivatives.
template <class T, class Fwd, class Da, class Db>
Tensor<T> binary(const char* name, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd, Da da,
                 Db db) {
  check_same_shape(name, a, b);
  auto out = Tensor<T>::zeros(a.shape());
  const auto& ad = a.data();
  const auto& bd = b.data();
  auto& od = out.data();
  for (size_t i = 0; i < ad.size(); ++i) od[i] = fwd(ad[i], bd[i]);
  auto* tape = Tape<T>::active();
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    auto ai = a.impl();
    auto bi = b.impl();
    auto oi = out.impl();
    tape->record([ai, bi, oi, da, db] {
      if (oi->grad.empty()) return;
      if (ai->requires_grad) {
        auto& g = ensure_grad(*ai);
        for (size_t i = 0; i < g.size(); ++i) {
          g[i] += da(ai->data[i], bi->data[i]) * oi->grad[i];
        }
      }
      if (bi->requires_grad) {
        auto& g = ensure_grad(*bi);
        for (size_t i = 0; i < g.size(); ++i) {
          g[i] += db(ai->data[i], bi->data[i]) * oi->grad[i];
        }
      }
    });
  }
  return out;
}

// out_plane += cross-correlation of in_plane with one 3x3 kernel, padding 1.
template <class T>
void correlate_add_3x3(T* out_plane, const T* in_plane, const T* k, int h, int w) {
  for (int y = 0; y < h; ++y) {
    T* orow = out_plane + static_cast<size_t>(y) * w;
    for (int ky = 0; ky < 3; ++ky) {
      const int sy = y + ky - 1;
      if (sy < 0 || sy >= h) continue;
      const T* row = in_plane + static_cast<size_t>(sy) * w;
      const T k0 = k[ky * 3 + 0], k1 = k[ky * 3 + 1], k2 = k[ky * 3 + 2];
      orow[0] += k1 * row[0];
      if (w > 1) orow[0] += k2 * row[1];
      for (int x = 1; x < w - 1; ++x) {
        orow[x] += k0 * row[x - 1] + k1 * row[x] + k2 * row[x + 1];
      }
      if (w > 1) orow[w - 1] += k0 * row[w - 2] + k1 * row[w - 1];
    }
  }
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  auto impl = std::make_shared<TensorImpl<T>>();
  const std::int64_t n = numel(shape);
  if (n <= 0) throw ShapeError("tensor: empty or non-positive shape " + shape_str(shape));
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<size_t>(n), T(0));
  return wrap_impl(std::move(impl));
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  auto t = zeros(std::move(shape));
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

template <class T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> values) {
  if (numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("tensor: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return wrap_impl(std::move(impl));
}

template <class T>
std::vector<T>& Tensor<T>::grad() {
  return ensure_grad(*impl_);
}

template <class T>
const std::vector<T>& Tensor<T>::grad() const {
  if (impl_->grad.empty()) throw NumericError("grad accessed before backward populated it");
  return impl_->grad;
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;  // copy keeps the detached view immune to later grads
  return wrap_impl(std::move(impl));
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return wrap_impl(std::move(impl));
}

template <class T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item: tensor has shape " + shape_str(shape()));
  return impl_->data[0];
}

// ---- Tape -----------------------------------------------------------------

template <class T>
Tape<T>::Tape() {
  previous_ = g_active_tape<T>;
  g_active_tape<T> = this;
}

template <class T>
Tape<T>::~Tape() {
  g_active_tape<T> = previous_;
}

template <class T>
Tape<T>* Tape<T>::active() {
  return g_active_tape<T>;
}

template <class T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (spent_ || records_.empty()) throw NumericError("backward: empty tape");
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be a single element, got " + shape_str(loss.shape()));
  }
  ensure_grad(*loss.impl())[0] = T(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  records_.clear();
  spent_ = true;
}

template <class T>
void backward(const Tensor<T>& loss) {
  auto* tape = Tape<T>::active();
  if (!tape) throw NumericError("backward: no active tape");
  tape->backward(loss);
}

// ---- convolution ------------------------------------------------------------

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (input.shape().size() != 4 || weight.shape().size() != 4) {
    throw ShapeError("conv2d: expected 4-D input and weight, got " + shape_str(input.shape()) +
                     " and " + shape_str(weight.shape()));
  }
  const int b = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = weight.dim(0);
  if (weight.dim(1) != cin) {
    throw ShapeError("conv2d: input channels " + std::to_string(cin) +
                     " (input " + shape_str(input.shape()) + ") do not match weight channels " +
                     std::to_string(weight.dim(1)) + " (weight " + shape_str(weight.shape()) + ")");
  }
  if (weight.dim(2) != 3 || weight.dim(3) != 3) {
    throw ShapeError("conv2d: kernel must be 3x3, got " + shape_str(weight.shape()));
  }
  if (bias.shape() != Shape{cout}) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match Cout " +
                     std::to_string(cout));
  }

  auto out = Tensor<T>::zeros({b, cout, h, w});
  const size_t plane = static_cast<size_t>(h) * w;
  const T* x = input.data().data();
  const T* wt = weight.data().data();
  const T* bs = bias.data().data();
  T* o = out.data().data();

  for (int n = 0; n < b; ++n) {
    for (int co = 0; co < cout; ++co) {
      T* out_plane = o + (static_cast<size_t>(n) * cout + co) * plane;
      std::fill(out_plane, out_plane + plane, bs[co]);
      for (int ci = 0; ci < cin; ++ci) {
        const T* in_plane = x + (static_cast<size_t>(n) * cin + ci) * plane;
        const T* k = wt + (static_cast<size_t>(co) * cin + ci) * 9;
        correlate_add_3x3(out_plane, in_plane, k, h, w);
      }
    }
  }

  auto* tape = Tape<T>::active();
  if (tape && (input.requires_grad() || weight.requires_grad() || bias.requires_grad())) {
    out.set_requires_grad(true);
    auto xi = input.impl();
    auto wi = weight.impl();
    auto bi = bias.impl();
    auto oi = out.impl();
    tape->record([xi, wi, bi, oi, b, cin, cout, h, w, plane] {
      if (oi->grad.empty()) return;
      const T* go = oi->grad.data();
      if (xi->requires_grad) {
        auto& gx = ensure_grad(*xi);
        // Gradient w.r.t. input is the correlation with the 180-degree
        // rotated kernel, channels transposed.
        for (int n = 0; n < b; ++n) {
          for (int ci = 0; ci < cin; ++ci) {
            T* gx_plane = gx.data() + (static_cast<size_t>(n) * cin + ci) * plane;
            for (int co = 0; co < cout; ++co) {
              const T* go_plane = go + (static_cast<size_t>(n) * cout + co) * plane;
              const T* k = wi->data.data() + (static_cast<size_t>(co) * cin + ci) * 9;
              const T kr[9] = {k[8], k[7], k[6], k[5], k[4], k[3], k[2], k[1], k[0]};
              correlate_add_3x3(gx_plane, go_plane, kr, h, w);
            }
          }
        }
      }
      if (wi->requires_grad) {
        auto& gw = ensure_grad(*wi);
        for (int n = 0; n < b; ++n) {
          for (int co = 0; co < cout; ++co) {
            const T* go_plane = go + (static_cast<size_t>(n) * cout + co) * plane;
            for (int ci = 0; ci < cin; ++ci) {
              const T* in_plane = xi->data.data() + (static_cast<size_t>(n) * cin + ci) * plane;
              T* gk = gw.data() + (static_cast<size_t>(co) * cin + ci) * 9;
              for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                  T acc = T(0);
                  const int y0 = std::max(0, 1 - ky), y1 = std::min(h, h + 1 - ky);
                  const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
                  for (int y = y0; y < y1; ++y) {
                    const T* gr = go_plane + static_cast<size_t>(y) * w;
                    const T* ir = in_plane + static_cast<size_t>(y + ky - 1) * w + (kx - 1);
                    for (int xx = x0; xx < x1; ++xx) acc += gr[xx] * ir[xx];
                  }
                  gk[ky * 3 + kx] += acc;
                }
              }
            }
          }
        }
      }
      if (bi->requires_grad) {
        auto& gb = ensure_grad(*bi);
        for (int n = 0; n < b; ++n) {
          for (int co = 0; co < cout; ++co) {
            const T* go_plane = go + (static_cast<size_t>(n) * cout + co) * plane;
            T acc = T(0);
            for (size_t i = 0; i < plane; ++i) acc += go_plane[i];
            gb[co] += acc;
          }
        }
      }
    });
  }
  return out;
}

// ---- elementwise ------------------------------------------------------------

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T negative_slope) {
  const T s = negative_slope;
  // Subgradient at 0 is the negative-branch slope.
  return unary(
      x, [s](T v) { return v > T(0) ? v : s * v; },
      [s](T v, T) { return v > T(0) ? T(1) : s; });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  for (T v : b.data()) {
    if (v == T(0)) throw NumericError("div: denominator contains zero");
  }
  return binary(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
  return unary(
      x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> mul_scalar(const Tensor<T>& x, T s) {
  return unary(
      x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <class T>
Tensor<T> pow_scalar(const Tensor<T>& x, T p) {
  for (T v : x.data()) {
    if (v < T(0)) throw NumericError("pow_scalar: negative base");
  }
  return unary(
      x, [p](T v) { return std::pow(v, p); },
      [p](T v, T) { return v == T(0) ? T(0) : p * std::pow(v, p - T(1)); });
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
  for (T v : x.data()) {
    if (v <= T(0)) throw NumericError("log: non-positive input");
  }
  return unary(
      x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
Tensor<T> abs(const Tensor<T>& x) {
  // Subgradient 0 at the kink.
  return unary(
      x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <class T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <class T>
Tensor<T> sqrt(const Tensor<T>& x) {
  for (T v : x.data()) {
    if (v < T(0)) throw NumericError("sqrt: negative input");
  }
  // Derivative at exactly 0 is pinned to 0 so losses of identical inputs
  // backpropagate cleanly.
  return unary(
      x, [](T v) { return std::sqrt(v); },
      [](T, T y) { return y == T(0) ? T(0) : T(1) / (T(2) * y); });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  if (lo > hi) throw NumericError("clamp: lo > hi");
  return unary(
      x, [lo, hi](T v) { return std::min(hi, std::max(lo, v)); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <class T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      "minimum", a, b, [](T x, T y) { return std::min(x, y); },
      [](T x, T y) { return x <= y ? T(1) : T(0); },
      [](T x, T y) { return x > y ? T(1) : T(0); });
}

// ---- reductions -------------------------------------------------------------

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0.0;
  for (T v : x.data()) acc += static_cast<double>(v);
  auto out = Tensor<T>::from_data({1}, {static_cast<T>(acc)});
  auto* tape = Tape<T>::active();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    tape->record([xi, oi] {
      if (oi->grad.empty()) return;
      const T g = oi->grad[0];
      auto& gx = ensure_grad(*xi);
      for (auto& v : gx) v += g;
    });
  }
  return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (T v : x.data()) acc += static_cast<double>(v);
  auto out = Tensor<T>::from_data({1}, {static_cast<T>(acc / n)});
  auto* tape = Tape<T>::active();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    tape->record([xi, oi] {
      if (oi->grad.empty()) return;
      const T g = static_cast<T>(static_cast<double>(oi->grad[0]) / xi->data.size());
      auto& gx = ensure_grad(*xi);
      for (auto& v : gx) v += g;
    });
  }
  return out;
}

template <class T>
Tensor<T> per_sample_mean(const Tensor<T>& x) {
  if (x.shape().empty()) throw ShapeError("per_sample_mean: scalar input");
  const int b = x.dim(0);
  const size_t per = x.data().size() / static_cast<size_t>(b);
  auto out = Tensor<T>::zeros({b});
  for (int n = 0; n < b; ++n) {
    double acc = 0.0;
    const T* p = x.data().data() + n * per;
    for (size_t i = 0; i < per; ++i) acc += static_cast<double>(p[i]);
    out.data()[n] = static_cast<T>(acc / static_cast<double>(per));
  }
  auto* tape = Tape<T>::active();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    tape->record([xi, oi, b, per] {
      if (oi->grad.empty()) return;
      auto& gx = ensure_grad(*xi);
      for (int n = 0; n < b; ++n) {
        const T g = static_cast<T>(static_cast<double>(oi->grad[n]) / per);
        T* p = gx.data() + n * per;
        for (size_t i = 0; i < per; ++i) p[i] += g;
      }
    });
  }
  return out;
}

// ---- concat / split ---------------------------------------------------------

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const auto& first = parts.front().shape();
  if (first.size() != 4) throw ShapeError("concat: expects 4-D tensors");
  int channels = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != 4 || s[0] != first[0] || s[2] != first[2] || s[3] != first[3]) {
      throw ShapeError("concat: incompatible shape " + shape_str(s) + " vs " + shape_str(first));
    }
    channels += s[1];
  }
  const int b = first[0], h = first[2], w = first[3];
  const size_t plane = static_cast<size_t>(h) * w;
  auto out = Tensor<T>::zeros({b, channels, h, w});
  T* o = out.data().data();
  for (int n = 0; n < b; ++n) {
    size_t co = 0;
    for (const auto& p : parts) {
      const int pc = p.dim(1);
      const T* src = p.data().data() + static_cast<size_t>(n) * pc * plane;
      std::copy(src, src + static_cast<size_t>(pc) * plane,
                o + (static_cast<size_t>(n) * channels + co) * plane);
      co += static_cast<size_t>(pc);
    }
  }
  auto* tape = Tape<T>::active();
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  if (tape && needs) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorImpl<T>>> impls;
    impls.reserve(parts.size());
    for (const auto& p : parts) impls.push_back(p.impl());
    auto oi = out.impl();
    tape->record([impls, oi, b, channels, plane] {
      if (oi->grad.empty()) return;
      const T* go = oi->grad.data();
      for (int n = 0; n < b; ++n) {
        size_t co = 0;
        for (const auto& pi : impls) {
          const size_t pc = static_cast<size_t>(pi->shape[1]);
          if (pi->requires_grad) {
            auto& g = ensure_grad(*pi);
            const T* src = go + (static_cast<size_t>(n) * channels + co) * plane;
            T* dst = g.data() + static_cast<size_t>(n) * pc * plane;
            for (size_t i = 0; i < pc * plane; ++i) dst[i] += src[i];
          }
          co += pc;
        }
      }
    });
  }
  return out;
}

template <class T>
std::vector<Tensor<T>> split(const Tensor<T>& x, const std::vector<int>& sizes) {
  if (x.shape().size() != 4) throw ShapeError("split: expects a 4-D tensor");
  int total = 0;
  for (int s : sizes) total += s;
  if (total != x.dim(1)) {
    throw ShapeError("split: sizes sum to " + std::to_string(total) + " but tensor has " +
                     std::to_string(x.dim(1)) + " channels");
  }
  const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
  const size_t plane = static_cast<size_t>(h) * w;
  const int channels = x.dim(1);
  std::vector<Tensor<T>> outs;
  outs.reserve(sizes.size());
  auto* tape = Tape<T>::active();
  int c0 = 0;
  for (int s : sizes) {
    auto part = Tensor<T>::zeros({b, s, h, w});
    T* dst = part.data().data();
    const T* src = x.data().data();
    for (int n = 0; n < b; ++n) {
      std::copy(src + (static_cast<size_t>(n) * channels + c0) * plane,
                src + (static_cast<size_t>(n) * channels + c0 + s) * plane,
                dst + static_cast<size_t>(n) * s * plane);
    }
    if (tape && x.requires_grad()) {
      part.set_requires_grad(true);
      auto xi = x.impl();
      auto pi = part.impl();
      const int offset = c0;
      tape->record([xi, pi, offset, b, s, channels, plane] {
        if (pi->grad.empty()) return;
        auto& gx = ensure_grad(*xi);
        const T* gp = pi->grad.data();
        for (int n = 0; n < b; ++n) {
          T* dst = gx.data() + (static_cast<size_t>(n) * channels + offset) * plane;
          const T* src = gp + static_cast<size_t>(n) * s * plane;
          for (size_t i = 0; i < static_cast<size_t>(s) * plane; ++i) dst[i] += src[i];
        }
      });
    }
    outs.push_back(std::move(part));
    c0 += s;
  }
  return outs;
}

// ---- fixed-window filtering --------------------------------------------------

template <class T>
Tensor<T> window_filter(const Tensor<T>& x, const std::vector<T>& kernel, int k) {
  if (x.shape().size() != 4) throw ShapeError("window_filter: expects a 4-D tensor");
  if (static_cast<int>(kernel.size()) != k * k) {
    throw ShapeError("window_filter: kernel size mismatch");
  }
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < k || w < k) {
    throw ShapeError("window_filter: input " + shape_str(x.shape()) +
                     " smaller than window " + std::to_string(k));
  }
  const int oh = h - k + 1, ow = w - k + 1;
  auto out = Tensor<T>::zeros({b, c, oh, ow});
  const size_t in_plane = static_cast<size_t>(h) * w;
  const size_t out_plane = static_cast<size_t>(oh) * ow;
  for (int p = 0; p < b * c; ++p) {
    const T* src = x.data().data() + p * in_plane;
    T* dst = out.data().data() + p * out_plane;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        T acc = T(0);
        for (int dy = 0; dy < k; ++dy) {
          const T* row = src + static_cast<size_t>(y + dy) * w + xx;
          const T* kr = kernel.data() + static_cast<size_t>(dy) * k;
          for (int dx = 0; dx < k; ++dx) acc += kr[dx] * row[dx];
        }
        dst[y * ow + xx] = acc;
      }
    }
  }
  auto* tape = Tape<T>::active();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    auto kcopy = kernel;
    tape->record([xi, oi, kcopy, b, c, h, w, oh, ow, k, in_plane, out_plane] {
      if (oi->grad.empty()) return;
      auto& gx = ensure_grad(*xi);
      const T* go = oi->grad.data();
      for (int p = 0; p < b * c; ++p) {
        T* dst = gx.data() + p * in_plane;
        const T* src = go + p * out_plane;
        for (int y = 0; y < oh; ++y) {
          for (int xx = 0; xx < ow; ++xx) {
            const T g = src[y * ow + xx];
            for (int dy = 0; dy < k; ++dy) {
              T* row = dst + static_cast<size_t>(y + dy) * w + xx;
              const T* kr = kcopy.data() + static_cast<size_t>(dy) * k;
              for (int dx = 0; dx < k; ++dx) row[dx] += kr[dx] * g;
            }
          }
        }
      }
    });
  }
  return out;
}

// ---- explicit instantiations --------------------------------------------------

#define THREER_INSTANTIATE_TENSOR(T)                                                          \
  template class Tensor<T>;                                                                   \
  template class Tape<T>;                                                                     \
  template void backward(const Tensor<T>&);                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                         \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                         \
  template Tensor<T> pow_scalar(const Tensor<T>&, T);                                         \
  template Tensor<T> exp(const Tensor<T>&);                                                   \
  template Tensor<T> log(const Tensor<T>&);                                                   \
  template Tensor<T> abs(const Tensor<T>&);                                                   \
  template Tensor<T> square(const Tensor<T>&);                                                \
  template Tensor<T> sqrt(const Tensor<T>&);                                                  \
  template Tensor<T> tanh(const Tensor<T>&);                                                  \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                           \
  template Tensor<T> minimum(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sum(const Tensor<T>&);                                                   \
  template Tensor<T> mean(const Tensor<T>&);                                                  \
  template Tensor<T> per_sample_mean(const Tensor<T>&);                                       \
  template Tensor<T> concat(const std::vector<Tensor<T>>&);                                   \
  template std::vector<Tensor<T>> split(const Tensor<T>&, const std::vector<int>&);           \
  template Tensor<T> window_filter(const Tensor<T>&, const std::vector<T>&, int);

THREER_INSTANTIATE_TENSOR(float)
THREER_INSTANTIATE_TENSOR(double)

#undef THREER_INSTANTIATE_TENSOR

}  // namespace threer
