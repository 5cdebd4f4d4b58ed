#pragma once

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "threer/rng.hpp"
#include "threer/tensor.hpp"

// Central-difference gradient oracle, independent of the tape. loss_fn must
// rebuild the graph from the current parameter values on every call.
namespace testutil {

struct GradCheckStats {
  double max_err = 0.0;
  double max_tol = 0.0;
  size_t checked = 0;
  size_t failed = 0;
};

template <class LossFn>
GradCheckStats compare_grads(std::vector<threer::Tensor<double>> params, LossFn&& loss_fn,
                             double rtol, double atol = 1e-9, double h = 1e-5) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    threer::Tape<double> tape;
    auto loss = loss_fn();
    tape.backward(loss);
  }
  analytic.reserve(params.size());
  for (auto& p : params) {
    REQUIRE(p.has_grad());
    analytic.push_back(p.grad());
    p.zero_grad();
  }

  GradCheckStats stats;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = params[pi].data();
    for (size_t i = 0; i < data.size(); ++i) {
      auto probe = [&](double step) {
        const double orig = data[i];
        data[i] = orig + step;
        const double fp = loss_fn().item();
        data[i] = orig - step;
        const double fm = loss_fn().item();
        data[i] = orig;
        return (fp - fm) / (2.0 * step);
      };
      // Kinks (leaky ReLU, |.|) inside the probe window corrupt the central
      // difference; retry at smaller steps before declaring a mismatch.
      const double a = analytic[pi][i];
      double err = std::numeric_limits<double>::infinity();
      double scale = std::abs(a);
      for (double step : {h, h / 8.0, h / 64.0}) {
        const double fd = probe(step);
        const double e = std::abs(a - fd);
        if (e < err) {
          err = e;
          scale = std::max(std::abs(a), std::abs(fd));
        }
        if (err <= atol + rtol * scale) break;
      }
      stats.max_err = std::max(stats.max_err, err);
      ++stats.checked;
      if (err > atol + rtol * scale) {
        ++stats.failed;
        MESSAGE("grad mismatch: param ", pi, " index ", i, " analytic ", a, " err ", err);
      }
    }
  }
  return stats;
}

template <class LossFn>
void require_grads_match(std::vector<threer::Tensor<double>> params, LossFn&& loss_fn,
                         double rtol, double atol = 1e-9, double h = 1e-5) {
  const auto stats = compare_grads(std::move(params), loss_fn, rtol, atol, h);
  CHECK(stats.checked > 0);
  CHECK(stats.failed == 0);
}

inline threer::Tensor<double> random_tensor(threer::Shape shape, threer::Rng& rng, double lo = -1.0,
                                            double hi = 1.0) {
  auto t = threer::Tensor<double>::zeros(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline threer::Tensor<float> random_tensor_f(threer::Shape shape, threer::Rng& rng,
                                             float lo = -1.0f, float hi = 1.0f) {
  auto t = threer::Tensor<float>::zeros(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

}  // namespace testutil
