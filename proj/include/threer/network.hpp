#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "threer/haar.hpp"
#include "threer/image.hpp"
#include "threer/rng.hpp"
#include "threer/tensor.hpp"

namespace threer {

inline constexpr double kLeakySlope = 0.2;

struct NetworkArch {
  int num_blocks = 8;
  int growth = 32;  // intermediate channel count of the dense blocks
  int dim_zg = 1;   // grain channels of the 9-channel lost-information tensor
  double clamp_alpha = 2.0;  // log-scale bound used inside every exp

  int dim_zd() const { return 9 - dim_zg; }
  void validate() const;
};

template <class T>
struct NamedParam {
  std::string name;
  Tensor<T> value;
};

// Five 3x3 conv layers with dense connectivity; leaky ReLU (0.2) after each
// layer except the last. The final layer starts at zero so a fresh network
// is the identity map.
template <class T>
class DenseBlock {
 public:
  DenseBlock() = default;
  DenseBlock(int in_channels, int out_channels, int growth);

  // Kaiming-style fan-in uniform init; the last layer's weights are scaled by
  // final_scale (0 gives the identity-network start used for training).
  void init(Rng& rng, double final_scale);
  Tensor<T> operator()(const Tensor<T>& x) const;

  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }
  void collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out);
  std::int64_t param_count() const;

 private:
  int in_channels_ = 0, out_channels_ = 0, growth_ = 0;
  std::vector<Tensor<T>> weights_;  // 5 layers
  std::vector<Tensor<T>> biases_;
};

template <class T>
struct CouplingBlock {
  DenseBlock<T> phi;  // 9 -> 3, additive update of the low branch
  DenseBlock<T> psi;  // 3 -> 9, scale logits for the high branch
  DenseBlock<T> eta;  // 3 -> 9, shift of the high branch
};

// Bounded log-scale alpha*(2*sigmoid(y) - 1), i.e. alpha*tanh(y/2); keeps
// every exp in (-alpha, alpha) while staying exactly invertible.
template <class T>
Tensor<T> coupling_scale(const Tensor<T>& y, T alpha);

// h1' = h1 + phi(h2); h2' = h2 * exp(s(psi(h1'))) + eta(h1').
// Generic over the three sub-networks so tests can substitute fixed maps.
template <class T, class Phi, class Psi, class Eta>
std::pair<Tensor<T>, Tensor<T>> coupling_forward(const Tensor<T>& h1, const Tensor<T>& h2,
                                                 Phi&& phi, Psi&& psi, Eta&& eta, T alpha,
                                                 int block_index = -1);

// h2 = (h2' - eta(h1')) * exp(-s(psi(h1'))); h1 = h1' - phi(h2).
template <class T, class Phi, class Psi, class Eta>
std::pair<Tensor<T>, Tensor<T>> coupling_inverse(const Tensor<T>& h1p, const Tensor<T>& h2p,
                                                 Phi&& phi, Psi&& psi, Eta&& eta, T alpha,
                                                 int block_index = -1);

// One-side affine coupling normalizing the lost information against the LR
// condition: z = (zt - phi_g(c)) * exp(-s(theta_g(c))). The condition enters
// detached; no gradient flows back through it.
template <class T, class PhiG, class ThetaG>
Tensor<T> latent_encode(const Tensor<T>& z_tilde, const Tensor<T>& condition, PhiG&& phi_g,
                        ThetaG&& theta_g, T alpha);

// zt = z * exp(s(theta_g(c))) + phi_g(c).
template <class T, class PhiG, class ThetaG>
Tensor<T> latent_decode(const Tensor<T>& z, const Tensor<T>& condition, PhiG&& phi_g,
                        ThetaG&& theta_g, T alpha);

enum class InverseMode { Grainy, Clean, TrueLatent };

InverseMode parse_inverse_mode(const std::string& name);

// The full pipeline: Haar split, pixel-range rescale of the low band, the
// coupling-block stack, and the conditional latent block.
template <class T>
class ThreeRNet {
 public:
  explicit ThreeRNet(NetworkArch arch = {});

  // Training initialization: zero final layers make the whole net an
  // identity map on sub-bands.
  void init_params(std::uint64_t seed);
  // Random init for invertibility tests. Final layers are damped so a stack
  // of blocks stays in a bounded numeric range.
  void init_params_random(std::uint64_t seed, double final_scale = 0.1);

  struct ForwardOut {
    Tensor<T> lr;       // unclamped low branch in pixel units
    Tensor<T> z_tilde;  // 9-channel lost information
    Tensor<T> z;        // normalized latent
  };
  // condition_override replaces the live LR condition of the latent block;
  // the finite-difference harness uses it to hold the detached condition at
  // its base value.
  ForwardOut forward(const Tensor<T>& hr, const Tensor<T>* condition_override = nullptr) const;

  Tensor<T> encode_latent(const Tensor<T>& z_tilde, const Tensor<T>& lr) const;
  Tensor<T> decode_latent(const Tensor<T>& z, const Tensor<T>& lr) const;

  // Reconstruction from lr plus latent; Clean zeroes the grain channels
  // after decoding, TrueLatent treats z as the exact forward latent.
  Tensor<T> inverse(const Tensor<T>& lr, const Tensor<T>& z, InverseMode mode) const;
  // Same, from an already-decoded lost-information tensor (shared between
  // grainy and clean reconstructions during training; also the bypass path
  // of the ablation study).
  Tensor<T> inverse_from_ztilde(const Tensor<T>& lr, const Tensor<T>& z_tilde,
                                bool zero_grain) const;

  Tensor<T> zero_grain_channels(const Tensor<T>& z_tilde) const;

  const NetworkArch& arch() const { return arch_; }
  std::vector<NamedParam<T>>& params() { return params_; }
  const std::vector<NamedParam<T>>& params() const { return params_; }
  std::int64_t param_count() const;
  void set_requires_grad(bool v);
  void zero_grad();

  // Deep copy with independent storage.
  ThreeRNet clone() const;

  // Reduction rate the checkpoint was fine-tuned for (metadata).
  double finetune_rate = 0.0;

 private:
  void rebuild_param_registry();

  NetworkArch arch_;
  std::vector<CouplingBlock<T>> blocks_;
  DenseBlock<T> phi_g_;    // latent shift conditioned on the LR image
  DenseBlock<T> theta_g_;  // latent scale logits
  std::vector<NamedParam<T>> params_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void save_checkpoint(const ThreeRNet<T>& net, const std::string& path);
// The architecture is reconstructed from the parameter records themselves.
template <class T>
ThreeRNet<T> load_checkpoint(const std::string& path, double clamp_alpha = 2.0);

// ---- image <-> tensor glue --------------------------------------------------

template <class T>
Tensor<T> to_tensor(const Image& img);
template <class T>
Tensor<T> to_tensor_batch(const std::vector<Image>& imgs);
// Clamps to [0,1] at export.
template <class T>
Image to_image(const Tensor<T>& t, int batch_index = 0);

// Round the tensor values to the 8-bit lattice, mimicking a PNG round trip.
template <class T>
Tensor<T> quantize_8bit(const Tensor<T>& t);

// ---- template definitions ---------------------------------------------------

template <class T>
Tensor<T> coupling_scale(const Tensor<T>& y, T alpha) {
  return mul_scalar(tanh(mul_scalar(y, T(0.5))), alpha);
}

namespace detail {

template <class T>
void check_finite_scale(const Tensor<T>& s, const char* what, int block_index) {
  for (T v : s.data()) {
    if (!std::isfinite(static_cast<double>(v))) {
      std::string where = block_index >= 0 ? std::string(what) + " block " + std::to_string(block_index)
                                           : std::string(what) + " block";
      throw NumericError(where + ": non-finite scale");
    }
  }
}

}  // namespace detail

template <class T, class Phi, class Psi, class Eta>
std::pair<Tensor<T>, Tensor<T>> coupling_forward(const Tensor<T>& h1, const Tensor<T>& h2,
                                                 Phi&& phi, Psi&& psi, Eta&& eta, T alpha,
                                                 int block_index) {
  Tensor<T> h1p = add(h1, phi(h2));
  Tensor<T> s = coupling_scale(psi(h1p), alpha);
  detail::check_finite_scale(s, "coupling", block_index);
  Tensor<T> h2p = add(mul(h2, exp(s)), eta(h1p));
  return {std::move(h1p), std::move(h2p)};
}

template <class T, class Phi, class Psi, class Eta>
std::pair<Tensor<T>, Tensor<T>> coupling_inverse(const Tensor<T>& h1p, const Tensor<T>& h2p,
                                                 Phi&& phi, Psi&& psi, Eta&& eta, T alpha,
                                                 int block_index) {
  Tensor<T> s = coupling_scale(psi(h1p), alpha);
  detail::check_finite_scale(s, "coupling", block_index);
  Tensor<T> h2 = mul(sub(h2p, eta(h1p)), exp(mul_scalar(s, T(-1))));
  Tensor<T> h1 = sub(h1p, phi(h2));
  return {std::move(h1), std::move(h2)};
}

template <class T, class PhiG, class ThetaG>
Tensor<T> latent_encode(const Tensor<T>& z_tilde, const Tensor<T>& condition, PhiG&& phi_g,
                        ThetaG&& theta_g, T alpha) {
  if (z_tilde.dim(0) != condition.dim(0) || z_tilde.dim(2) != condition.dim(2) ||
      z_tilde.dim(3) != condition.dim(3)) {
    throw ShapeError("latent_encode: spatial dims of latent " + shape_str(z_tilde.shape()) +
                     " and condition " + shape_str(condition.shape()) + " differ");
  }
  Tensor<T> c = condition.detach();
  Tensor<T> s = coupling_scale(theta_g(c), alpha);
  detail::check_finite_scale(s, "latent", -1);
  return mul(sub(z_tilde, phi_g(c)), exp(mul_scalar(s, T(-1))));
}

template <class T, class PhiG, class ThetaG>
Tensor<T> latent_decode(const Tensor<T>& z, const Tensor<T>& condition, PhiG&& phi_g,
                        ThetaG&& theta_g, T alpha) {
  if (z.dim(0) != condition.dim(0) || z.dim(2) != condition.dim(2) ||
      z.dim(3) != condition.dim(3)) {
    throw ShapeError("latent_decode: spatial dims of latent " + shape_str(z.shape()) +
                     " and condition " + shape_str(condition.shape()) + " differ");
  }
  Tensor<T> c = condition.detach();
  Tensor<T> s = coupling_scale(theta_g(c), alpha);
  detail::check_finite_scale(s, "latent", -1);
  return add(mul(z, exp(s)), phi_g(c));
}

}  // namespace threer
