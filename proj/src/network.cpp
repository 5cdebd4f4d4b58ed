#include "threer/network.hpp"

#include <algorithm>
#include <cmath>

namespace threer {

void NetworkArch::validate() const {
  if (num_blocks < 1) throw ConfigError("arch: need at least one invertible block");
  if (growth < 1) throw ConfigError("arch: growth must be positive");
  if (dim_zg < 1 || dim_zg > 8) throw ConfigError("arch: dim_zg must be in [1,8]");
  if (clamp_alpha <= 0) throw ConfigError("arch: clamp_alpha must be positive");
}

InverseMode parse_inverse_mode(const std::string& name) {
  if (name == "grainy") return InverseMode::Grainy;
  if (name == "clean") return InverseMode::Clean;
  if (name == "true-latent" || name == "true_latent") return InverseMode::TrueLatent;
  throw ConfigError("unknown inverse mode '" + name + "'");
}

// ---- DenseBlock -------------------------------------------------------------

template <class T>
DenseBlock<T>::DenseBlock(int in_channels, int out_channels, int growth)
    : in_channels_(in_channels), out_channels_(out_channels), growth_(growth) {
  weights_.resize(5);
  biases_.resize(5);
  for (int layer = 0; layer < 5; ++layer) {
    const int cin = in_channels_ + layer * growth_;
    const int cout = layer == 4 ? out_channels_ : growth_;
    weights_[layer] = Tensor<T>::zeros({cout, cin, 3, 3});
    biases_[layer] = Tensor<T>::zeros({cout});
  }
}

template <class T>
void DenseBlock<T>::init(Rng& rng, double final_scale) {
  for (int layer = 0; layer < 5; ++layer) {
    auto& w = weights_[layer].data();
    std::fill(biases_[layer].data().begin(), biases_[layer].data().end(), T(0));
    const int fan_in = weights_[layer].dim(1) * 9;
    const double bound = std::sqrt(6.0 / fan_in) * (layer == 4 ? final_scale : 1.0);
    for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <class T>
Tensor<T> DenseBlock<T>::operator()(const Tensor<T>& x) const {
  std::vector<Tensor<T>> feats{x};
  Tensor<T> out;
  for (int layer = 0; layer < 5; ++layer) {
    Tensor<T> in = feats.size() == 1 ? feats[0] : concat(feats);
    out = conv2d(in, weights_[layer], biases_[layer]);
    if (layer < 4) {
      out = leaky_relu(out, static_cast<T>(kLeakySlope));
      feats.push_back(out);
    }
  }
  return out;
}

template <class T>
void DenseBlock<T>::collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out) {
  for (int layer = 0; layer < 5; ++layer) {
    const std::string base = prefix + ".conv" + std::to_string(layer + 1);
    out.push_back({base + ".weight", weights_[layer]});
    out.push_back({base + ".bias", biases_[layer]});
  }
}

template <class T>
std::int64_t DenseBlock<T>::param_count() const {
  std::int64_t n = 0;
  for (const auto& w : weights_) n += w.size();
  for (const auto& b : biases_) n += b.size();
  return n;
}

// ---- ThreeRNet --------------------------------------------------------------

template <class T>
ThreeRNet<T>::ThreeRNet(NetworkArch arch) : arch_(arch) {
  arch_.validate();
  blocks_.reserve(arch_.num_blocks);
  for (int i = 0; i < arch_.num_blocks; ++i) {
    CouplingBlock<T> block;
    block.phi = DenseBlock<T>(9, 3, arch_.growth);
    block.psi = DenseBlock<T>(3, 9, arch_.growth);
    block.eta = DenseBlock<T>(3, 9, arch_.growth);
    blocks_.push_back(std::move(block));
  }
  phi_g_ = DenseBlock<T>(3, 9, arch_.growth);
  theta_g_ = DenseBlock<T>(3, 9, arch_.growth);
  rebuild_param_registry();
}

template <class T>
void ThreeRNet<T>::rebuild_param_registry() {
  params_.clear();
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i);
    blocks_[i].phi.collect_params(prefix + ".phi", params_);
    blocks_[i].psi.collect_params(prefix + ".psi", params_);
    blocks_[i].eta.collect_params(prefix + ".eta", params_);
  }
  phi_g_.collect_params("latent.phi_g", params_);
  theta_g_.collect_params("latent.theta_g", params_);
  for (auto& p : params_) p.value.set_requires_grad(true);
}

template <class T>
void ThreeRNet<T>::init_params(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& block : blocks_) {
    block.phi.init(rng, 0.0);
    block.psi.init(rng, 0.0);
    block.eta.init(rng, 0.0);
  }
  phi_g_.init(rng, 0.0);
  theta_g_.init(rng, 0.0);
}

template <class T>
void ThreeRNet<T>::init_params_random(std::uint64_t seed, double final_scale) {
  Rng rng(seed);
  for (auto& block : blocks_) {
    block.phi.init(rng, final_scale);
    block.psi.init(rng, final_scale);
    block.eta.init(rng, final_scale);
  }
  phi_g_.init(rng, final_scale);
  theta_g_.init(rng, final_scale);
}

template <class T>
typename ThreeRNet<T>::ForwardOut ThreeRNet<T>::forward(const Tensor<T>& hr,
                                                        const Tensor<T>* condition_override) const {
  if (hr.shape().size() != 4 || hr.dim(1) != 3) {
    throw ShapeError("forward: expected [B,3,H,W], got " + shape_str(hr.shape()));
  }
  auto sb = haar_forward(hr);
  // The orthonormal low band is 2x the 2x2 average; halve it so the low
  // branch trains in pixel units. The inverse doubles it back.
  Tensor<T> h1 = mul_scalar(sb.low, T(0.5));
  Tensor<T> h2 = sb.high;
  const T alpha = static_cast<T>(arch_.clamp_alpha);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    std::tie(h1, h2) =
        coupling_forward(h1, h2, b.phi, b.psi, b.eta, alpha, static_cast<int>(i));
  }
  ForwardOut out;
  out.lr = h1;
  out.z_tilde = h2;
  out.z = encode_latent(h2, condition_override ? *condition_override : h1);
  return out;
}

template <class T>
Tensor<T> ThreeRNet<T>::encode_latent(const Tensor<T>& z_tilde, const Tensor<T>& lr) const {
  return latent_encode(z_tilde, lr, phi_g_, theta_g_, static_cast<T>(arch_.clamp_alpha));
}

template <class T>
Tensor<T> ThreeRNet<T>::decode_latent(const Tensor<T>& z, const Tensor<T>& lr) const {
  return latent_decode(z, lr, phi_g_, theta_g_, static_cast<T>(arch_.clamp_alpha));
}

template <class T>
Tensor<T> ThreeRNet<T>::zero_grain_channels(const Tensor<T>& z_tilde) const {
  auto parts = split(z_tilde, {arch_.dim_zd(), arch_.dim_zg});
  auto zeros = Tensor<T>::zeros(parts[1].shape());
  return concat<T>({parts[0], zeros});
}

template <class T>
Tensor<T> ThreeRNet<T>::inverse_from_ztilde(const Tensor<T>& lr, const Tensor<T>& z_tilde,
                                            bool zero_grain) const {
  if (lr.shape().size() != 4 || lr.dim(1) != 3 || z_tilde.shape().size() != 4 ||
      z_tilde.dim(1) != 9) {
    throw ShapeError("inverse: expected [B,3,h,w] lr and [B,9,h,w] latent, got " +
                     shape_str(lr.shape()) + " and " + shape_str(z_tilde.shape()));
  }
  Tensor<T> h1 = lr;
  Tensor<T> h2 = zero_grain ? zero_grain_channels(z_tilde) : z_tilde;
  const T alpha = static_cast<T>(arch_.clamp_alpha);
  for (size_t k = blocks_.size(); k-- > 0;) {
    const auto& b = blocks_[k];
    std::tie(h1, h2) =
        coupling_inverse(h1, h2, b.phi, b.psi, b.eta, alpha, static_cast<int>(k));
  }
  return haar_inverse(mul_scalar(h1, T(2)), h2);
}

template <class T>
Tensor<T> ThreeRNet<T>::inverse(const Tensor<T>& lr, const Tensor<T>& z,
                                InverseMode mode) const {
  Tensor<T> z_tilde = decode_latent(z, lr);
  return inverse_from_ztilde(lr, z_tilde, mode == InverseMode::Clean);
}

template <class T>
std::int64_t ThreeRNet<T>::param_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <class T>
void ThreeRNet<T>::set_requires_grad(bool v) {
  for (auto& p : params_) p.value.set_requires_grad(v);
}

template <class T>
void ThreeRNet<T>::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

template <class T>
ThreeRNet<T> ThreeRNet<T>::clone() const {
  ThreeRNet<T> out(arch_);
  out.finetune_rate = finetune_rate;
  for (size_t i = 0; i < params_.size(); ++i) {
    out.params_[i].value.data() = params_[i].value.data();
  }
  return out;
}

// ---- image glue -------------------------------------------------------------

template <class T>
Tensor<T> to_tensor(const Image& img) {
  std::vector<T> data(img.data.size());
  for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(img.data[i]);
  return Tensor<T>::from_data({1, 3, img.height, img.width}, std::move(data));
}

template <class T>
Tensor<T> to_tensor_batch(const std::vector<Image>& imgs) {
  if (imgs.empty()) throw ShapeError("to_tensor_batch: no images");
  const int w = imgs[0].width, h = imgs[0].height;
  std::vector<T> data;
  data.reserve(imgs.size() * imgs[0].data.size());
  for (const auto& img : imgs) {
    if (img.width != w || img.height != h) {
      throw ShapeError("to_tensor_batch: mixed image sizes");
    }
    for (float v : img.data) data.push_back(static_cast<T>(v));
  }
  return Tensor<T>::from_data({static_cast<int>(imgs.size()), 3, h, w}, std::move(data));
}

template <class T>
Image to_image(const Tensor<T>& t, int batch_index) {
  if (t.shape().size() != 4 || t.dim(1) != 3) {
    throw ShapeError("to_image: expected [B,3,H,W], got " + shape_str(t.shape()));
  }
  if (batch_index < 0 || batch_index >= t.dim(0)) throw ShapeError("to_image: bad batch index");
  const int h = t.dim(2), w = t.dim(3);
  Image img = Image::create(w, h);
  const size_t n = img.data.size();
  const T* src = t.data().data() + static_cast<size_t>(batch_index) * n;
  for (size_t i = 0; i < n; ++i) {
    img.data[i] = std::min(1.0f, std::max(0.0f, static_cast<float>(src[i])));
  }
  return img;
}

template <class T>
Tensor<T> quantize_8bit(const Tensor<T>& t) {
  auto out = t.clone();
  for (auto& v : out.data()) {
    const double clamped = std::min(1.0, std::max(0.0, static_cast<double>(v)));
    v = static_cast<T>(std::floor(clamped * 255.0 + 0.5) / 255.0);
  }
  return out;
}

// ---- instantiations ----------------------------------------------------------

#define THREER_INSTANTIATE_NET(T)                             \
  template class DenseBlock<T>;                               \
  template class ThreeRNet<T>;                                \
  template Tensor<T> to_tensor(const Image&);                 \
  template Tensor<T> to_tensor_batch(const std::vector<Image>&); \
  template Image to_image(const Tensor<T>&, int);             \
  template Tensor<T> quantize_8bit(const Tensor<T>&);

THREER_INSTANTIATE_NET(float)
THREER_INSTANTIATE_NET(double)

#undef THREER_INSTANTIATE_NET

}  // namespace threer
