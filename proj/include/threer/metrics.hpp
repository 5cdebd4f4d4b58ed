#pragma once

#include <string>
#include <vector>

#include "threer/dataset.hpp"
#include "threer/losses.hpp"
#include "threer/network.hpp"

namespace threer {

// PSNR over BT.601 luma of [0,1] images; +infinity for identical inputs
// (serialized as "inf" in CSV).
double psnr_y(const Image& a, const Image& b);

// KL(p || q) in nats over already-normalized distributions.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

// KLD between 256-bin luma histograms with add-one smoothing.
double histogram_kld(const Image& a, const Image& b, int bins = 256);

// 1 - power(pred)/power(ref) under the given model.
double achieved_reduction(const Image& pred, const Image& ref, const PowerModelConfig& cfg);

struct MetricRow {
  std::string image;
  double psnr_y = 0, ssim = 0, kld = 0, rate_y = 0, rate_rgbw = 0;
};

struct MetricReport {
  std::vector<MetricRow> rows;  // one per image
  MetricRow aggregate() const;  // arithmetic means, named "aggregate"
};

void write_metric_csv(const MetricReport& report, const std::string& path);

struct EvaluateOptions {
  bool quantize_lr = false;  // simulate the 8-bit transmission of the LR image
  std::uint64_t seed = 0;    // Gaussian sampling for the reconstructions
  PowerModelConfig power;
};

// Per pair: forward the grainy image, reconstruct clean and grainy versions
// from a sampled latent. psnr_y/ssim compare the clean reconstruction against
// the clean ground truth, kld compares grainy-reconstruction grain statistics,
// the rates compare the LR output against the bicubic reference.
MetricReport evaluate_dataset(const ThreeRNet<float>& net, const std::vector<TrainingPair>& pairs,
                              const EvaluateOptions& opts);

// Table-5-style ablation rows. Config 1 reconstructs the grainy image from
// the true forward latent (transmission upper bound); config 2 decodes a
// Gaussian sample without the conditional block; config 3 is the full path.
struct AblationRow {
  std::string image;
  double clean_lr_psnr = 0, clean_lr_ssim = 0;
  double clean_hr_psnr = 0, clean_hr_ssim = 0;
  double grainy_hr_psnr = 0, grainy_hr_kld = 0;
};

std::vector<AblationRow> evaluate_ablation(const ThreeRNet<float>& net,
                                           const std::vector<TrainingPair>& pairs, int config_id,
                                           std::uint64_t seed);

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

// Externally measured chain data: variant,qp,encode_s,decode_s,bitrate_kbps,display_w.
struct ChainMeasurement {
  std::string variant;
  double qp = 0, encode_s = 0, decode_s = 0, bitrate_kbps = 0, display_w = 0;
};

std::vector<ChainMeasurement> load_chain_csv(const std::string& path);

struct EnergyCoefficients {
  double head = 1.0;      // J per encode second
  double delivery = 1.0;  // J per kbps
  double device = 1.0;    // J per decode second
  double display = 1.0;   // J per measured watt
};

struct EnergySavingsRow {
  std::string variant;
  double qp = 0;
  double encode_pct = 0, delivery_pct = 0, decode_pct = 0, display_pct = 0, total_pct = 0;
};

// Percentage savings per variant/QP against the baseline variant at the same
// QP. Per-stage savings are pure ratios; the total weighs stages by the
// supplied coefficients.
std::vector<EnergySavingsRow> energy_savings_report(const std::vector<ChainMeasurement>& m,
                                                    const std::string& baseline_variant,
                                                    const EnergyCoefficients& coeffs);

void write_energy_csv(const std::vector<EnergySavingsRow>& rows, const std::string& path);

}  // namespace threer
