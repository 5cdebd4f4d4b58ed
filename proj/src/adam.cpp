#include <cmath>

#include "threer/train.hpp"

namespace threer {

template <class T>
void adam_step(std::vector<NamedParam<T>>& params, AdamState<T>& state, double lr, double beta1,
               double beta2, double eps) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].value.data().size(), T(0));
      state.v[i].assign(params[i].value.data().size(), T(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam: state tracks " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value;
    if (!p.has_grad()) throw NumericError("adam: missing grad for " + params[i].name);
    const auto& g = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto& w = p.data();
    for (size_t j = 0; j < w.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = beta1 * static_cast<double>(m[j]) + (1.0 - beta1) * gj;
      const double vj = beta2 * static_cast<double>(v[j]) + (1.0 - beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      w[j] = static_cast<T>(static_cast<double>(w[j]) - lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

template <class T>
double clip_gradients(std::vector<NamedParam<T>>& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params) {
    if (!p.value.has_grad()) throw NumericError("clip: missing grad for " + p.name);
    for (T g : p.value.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& p : params) {
      for (T& g : p.value.grad()) g *= scale;
    }
  }
  return norm;
}

template void adam_step(std::vector<NamedParam<float>>&, AdamState<float>&, double, double,
                        double, double);
template void adam_step(std::vector<NamedParam<double>>&, AdamState<double>&, double, double,
                        double, double);
template double clip_gradients(std::vector<NamedParam<float>>&, double);
template double clip_gradients(std::vector<NamedParam<double>>&, double);

}  // namespace threer
