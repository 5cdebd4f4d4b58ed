#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "threer/config.hpp"
#include "threer/dataset.hpp"
#include "threer/losses.hpp"
#include "threer/network.hpp"

namespace threer {

struct TrainingConfig {
  int batch_size = 16;
  int crop = 144;
  int stage1_iters = 2000;  // desk-scale default; 500k at paper scale
  int stage2_iters = 200;   // 5k at paper scale
  double lr0 = 2e-4;
  // Halving points, scaled proportionally from [100k,200k,300k,400k]/500k.
  std::vector<int> lr_milestones = {400, 800, 1200, 1600};
  // Stage-2 rate; < 0 means "continue the stage-1 schedule end value".
  double stage2_lr = -1.0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t seed = 0;
  double grad_clip = 10.0;  // global L2 norm; survives the 1e10 power weight
  LossWeights weights;      // includes the target reduction rate R
  PowerModelConfig power;
  NetworkArch arch;

  void validate() const;
  double lr_at(int iter) const;
  double resolved_stage2_lr() const;

  static TrainingConfig from_config(const KeyValueFile& kv);
  static TrainingConfig from_file(const std::string& path);
  KeyValueFile to_config() const;
};

// Bias-corrected Adam. Moments are allocated lazily to match the params.
template <class T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;
};

template <class T>
void adam_step(std::vector<NamedParam<T>>& params, AdamState<T>& state, double lr, double beta1,
               double beta2, double eps);

// Scales all grads so their global L2 norm is at most max_norm; returns the
// pre-clip norm.
template <class T>
double clip_gradients(std::vector<NamedParam<T>>& params, double max_norm);

struct LossHistoryRow {
  int iter = 0;
  double total = 0, forw = 0, reg = 0, back_c = 0, back_g = 0, pow = 0, ssim = 0, lr = 0;
};

struct TrainResult {
  std::vector<LossHistoryRow> history;
};

// Stage 1: rescaling plus grain removal/synthesis. Per iteration: crop/flip a
// batch, forward pass (fidelity + latent regularization), one shared decode
// of a fresh Gaussian sample, grainy and clean inverse reconstructions.
TrainResult train_stage1(ThreeRNet<float>& net, const std::vector<TrainingPair>& train_set,
                         const TrainingConfig& cfg);

// Stage 2: same loop with the power and SSIM terms added; stamps the target
// rate into the checkpoint metadata.
TrainResult train_stage2(ThreeRNet<float>& net, const std::vector<TrainingPair>& train_set,
                         const TrainingConfig& cfg);

void write_loss_csv(const std::vector<LossHistoryRow>& rows, const std::string& path);

}  // namespace threer
