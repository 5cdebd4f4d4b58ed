#pragma once

#include <cstdint>

#include "threer/network.hpp"
#include "threer/train.hpp"

namespace threer {

// Central-difference verification of every parameter gradient of the stage-1
// total loss, in double precision. The latent-block condition is frozen at
// its base value (see ThreeRNet::forward), which is exactly the partial
// derivative the training loop applies.
struct GradCheckOptions {
  NetworkArch arch{2, 3, 1, 2.0};
  int input_size = 16;
  int batch = 1;
  double rtol = 1e-4;
  double atol = 1e-8;
  double step = 1e-5;
  std::uint64_t seed = 0;
  int max_params = 0;  // 0 checks all; otherwise an evenly strided sample
  int threads = 0;     // 0 uses the ThreeR_NUM_THREADS / hardware budget
};

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double max_abs_err = 0.0;
  double worst_rel = 0.0;  // err / max(|analytic|, |fd|, atol)

  bool passed() const { return failed == 0 && checked > 0; }
};

GradCheckReport gradcheck_stage1(const GradCheckOptions& opts);

// Evaluation-parallelism budget: ThreeR_NUM_THREADS when set, otherwise the
// hardware concurrency.
int thread_budget();

}  // namespace threer
