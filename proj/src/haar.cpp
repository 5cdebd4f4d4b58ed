#include "threer/haar.hpp"

namespace threer {

namespace {

// src is one HxW plane; outputs are four (H/2)x(W/2) planes.
template <class T>
void analyze_plane(const T* src, int h, int w, T* low, T* dh, T* dv, T* dd) {
  const int h2 = h / 2, w2 = w / 2;
  const T half = T(0.5);
  for (int y = 0; y < h2; ++y) {
    const T* r0 = src + static_cast<size_t>(2 * y) * w;
    const T* r1 = r0 + w;
    for (int x = 0; x < w2; ++x) {
      const T a = r0[2 * x], b = r0[2 * x + 1];
      const T c = r1[2 * x], d = r1[2 * x + 1];
      const size_t i = static_cast<size_t>(y) * w2 + x;
      low[i] = ((a + b) + (c + d)) * half;
      dh[i] = ((a - b) + (c - d)) * half;
      dv[i] = ((a + b) - (c + d)) * half;
      dd[i] = ((a - b) - (c - d)) * half;
    }
  }
}

template <class T>
void synthesize_plane(const T* low, const T* dh, const T* dv, const T* dd, int h, int w,
                      T* dst) {
  const int h2 = h / 2, w2 = w / 2;
  const T half = T(0.5);
  for (int y = 0; y < h2; ++y) {
    T* r0 = dst + static_cast<size_t>(2 * y) * w;
    T* r1 = r0 + w;
    for (int x = 0; x < w2; ++x) {
      const size_t i = static_cast<size_t>(y) * w2 + x;
      const T l = low[i], hh = dh[i], vv = dv[i], di = dd[i];
      r0[2 * x] = ((l + hh) + (vv + di)) * half;
      r0[2 * x + 1] = ((l - hh) + (vv - di)) * half;
      r1[2 * x] = ((l + hh) - (vv + di)) * half;
      r1[2 * x + 1] = ((l - hh) - (vv - di)) * half;
    }
  }
}

template <class T>
void analyze_all(const T* src, int bc, int h, int w, T* low, T* high) {
  const size_t in_plane = static_cast<size_t>(h) * w;
  const size_t out_plane = in_plane / 4;
  for (int p = 0; p < bc; ++p) {
    analyze_plane(src + p * in_plane, h, w, low + p * out_plane,
                  high + static_cast<size_t>(3 * p) * out_plane,
                  high + static_cast<size_t>(3 * p + 1) * out_plane,
                  high + static_cast<size_t>(3 * p + 2) * out_plane);
  }
}

template <class T>
void synthesize_all(const T* low, const T* high, int bc, int h, int w, T* dst) {
  const size_t out_plane = static_cast<size_t>(h) * w;
  const size_t in_plane = out_plane / 4;
  for (int p = 0; p < bc; ++p) {
    synthesize_plane(low + p * in_plane, high + static_cast<size_t>(3 * p) * in_plane,
                     high + static_cast<size_t>(3 * p + 1) * in_plane,
                     high + static_cast<size_t>(3 * p + 2) * in_plane, h, w,
                     dst + p * out_plane);
  }
}

}  // namespace

template <class T>
SubbandTensor<T> haar_forward(const Tensor<T>& img) {
  if (img.shape().size() != 4) throw ShapeError("haar_forward: expects a 4-D tensor");
  const int b = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("haar_forward: odd spatial dims " + shape_str(img.shape()));
  }
  // Per-batch channel grouping: analyze each (b,c) plane independently; the
  // high tensor interleaves h/v/d per channel, so batches need separate runs.
  auto low = Tensor<T>::zeros({b, c, h / 2, w / 2});
  auto high = Tensor<T>::zeros({b, 3 * c, h / 2, w / 2});
  const size_t in_stride = static_cast<size_t>(c) * h * w;
  const size_t low_stride = in_stride / 4;
  const size_t high_stride = 3 * low_stride;
  for (int n = 0; n < b; ++n) {
    analyze_all(img.data().data() + n * in_stride, c, h, w,
                low.data().data() + n * low_stride, high.data().data() + n * high_stride);
  }
  auto* tape = Tape<T>::active();
  if (tape && img.requires_grad()) {
    low.set_requires_grad(true);
    high.set_requires_grad(true);
    auto xi = img.impl();
    auto li = low.impl();
    auto hi = high.impl();
    tape->record([xi, li, hi, b, c, h, w, in_stride, low_stride, high_stride] {
      if (li->grad.empty() && hi->grad.empty()) return;
      // The transform is orthogonal, so the adjoint is the inverse.
      if (li->grad.empty()) li->grad.assign(li->data.size(), T(0));
      if (hi->grad.empty()) hi->grad.assign(hi->data.size(), T(0));
      std::vector<T> gx(xi->data.size());
      for (int n = 0; n < b; ++n) {
        synthesize_all(li->grad.data() + n * low_stride, hi->grad.data() + n * high_stride, c,
                       h, w, gx.data() + n * in_stride);
      }
      if (xi->grad.empty()) {
        xi->grad = std::move(gx);
      } else {
        for (size_t i = 0; i < gx.size(); ++i) xi->grad[i] += gx[i];
      }
    });
  }
  return {low, high};
}

template <class T>
Tensor<T> haar_inverse(const Tensor<T>& low, const Tensor<T>& high) {
  if (low.shape().size() != 4 || high.shape().size() != 4) {
    throw ShapeError("haar_inverse: expects 4-D tensors");
  }
  const int b = low.dim(0), c = low.dim(1), h2 = low.dim(2), w2 = low.dim(3);
  if (high.dim(0) != b || high.dim(1) != 3 * c || high.dim(2) != h2 || high.dim(3) != w2) {
    throw ShapeError("haar_inverse: high bands " + shape_str(high.shape()) +
                     " do not match low bands " + shape_str(low.shape()) +
                     " (need 3x channels, same spatial dims)");
  }
  const int h = 2 * h2, w = 2 * w2;
  auto out = Tensor<T>::zeros({b, c, h, w});
  const size_t out_stride = static_cast<size_t>(c) * h * w;
  const size_t low_stride = out_stride / 4;
  const size_t high_stride = 3 * low_stride;
  for (int n = 0; n < b; ++n) {
    synthesize_all(low.data().data() + n * low_stride, high.data().data() + n * high_stride, c,
                   h, w, out.data().data() + n * out_stride);
  }
  auto* tape = Tape<T>::active();
  if (tape && (low.requires_grad() || high.requires_grad())) {
    out.set_requires_grad(true);
    auto li = low.impl();
    auto hi = high.impl();
    auto oi = out.impl();
    tape->record([li, hi, oi, b, c, h, w, out_stride, low_stride, high_stride] {
      if (oi->grad.empty()) return;
      std::vector<T> gl(li->data.size());
      std::vector<T> gh(hi->data.size());
      for (int n = 0; n < b; ++n) {
        analyze_all(oi->grad.data() + n * out_stride, c, h, w, gl.data() + n * low_stride,
                    gh.data() + n * high_stride);
      }
      if (li->requires_grad) {
        auto& g = li->grad;
        if (g.empty()) {
          g = std::move(gl);
        } else {
          for (size_t i = 0; i < gl.size(); ++i) g[i] += gl[i];
        }
      }
      if (hi->requires_grad) {
        auto& g = hi->grad;
        if (g.empty()) {
          g = std::move(gh);
        } else {
          for (size_t i = 0; i < gh.size(); ++i) g[i] += gh[i];
        }
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> haar_inverse(const SubbandTensor<T>& sb) {
  return haar_inverse(sb.low, sb.high);
}

template SubbandTensor<float> haar_forward(const Tensor<float>&);
template SubbandTensor<double> haar_forward(const Tensor<double>&);
template Tensor<float> haar_inverse(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> haar_inverse(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> haar_inverse(const SubbandTensor<float>&);
template Tensor<double> haar_inverse(const SubbandTensor<double>&);

}  // namespace threer
