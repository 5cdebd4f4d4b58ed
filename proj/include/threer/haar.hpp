#pragma once

#include "threer/tensor.hpp"

namespace threer {

// One-level dyadic Haar decomposition of a [B,C,H,W] tensor. low holds C
// channels, high holds 3C channels laid out per input channel as
// (horizontal, vertical, diagonal): [R_h,R_v,R_d,G_h,...] for RGB input.
template <class T>
struct SubbandTensor {
  Tensor<T> low;
  Tensor<T> high;
};

// Orthonormal analysis: per 2x2 block (a b / c d),
//   low = (a+b+c+d)/2, h = (a-b+c-d)/2, v = (a+b-c-d)/2, d = (a-b-c+d)/2.
// Both directions are L2 isometries; the low band is 2x the 2x2 average.
template <class T>
SubbandTensor<T> haar_forward(const Tensor<T>& img);

template <class T>
Tensor<T> haar_inverse(const Tensor<T>& low, const Tensor<T>& high);

template <class T>
Tensor<T> haar_inverse(const SubbandTensor<T>& sb);

}  // namespace threer
