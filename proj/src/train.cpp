#include "threer/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace threer {

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (crop < 2 || crop % 2 != 0) throw ConfigError("train: crop must be even and >= 2");
  if (stage1_iters < 1) throw ConfigError("train: stage1_iters must be positive");
  if (stage2_iters < 0) throw ConfigError("train: stage2_iters must be nonnegative");
  if (lr0 <= 0) throw ConfigError("train: lr0 must be positive");
  for (size_t i = 0; i < lr_milestones.size(); ++i) {
    if (lr_milestones[i] >= stage1_iters) {
      throw ConfigError("train: milestone " + std::to_string(lr_milestones[i]) +
                        " is not below stage1_iters");
    }
    if (i > 0 && lr_milestones[i] <= lr_milestones[i - 1]) {
      throw ConfigError("train: milestones must be strictly increasing");
    }
  }
  weights.validate();
  power.validate();
  arch.validate();
}

double TrainingConfig::lr_at(int iter) const {
  double lr = lr0;
  for (int m : lr_milestones) {
    if (iter >= m) lr *= 0.5;
  }
  return lr;
}

double TrainingConfig::resolved_stage2_lr() const {
  if (stage2_lr > 0) return stage2_lr;
  return lr0 * std::pow(0.5, static_cast<double>(lr_milestones.size()));
}

TrainingConfig TrainingConfig::from_config(const KeyValueFile& kv) {
  TrainingConfig cfg;
  cfg.batch_size = static_cast<int>(kv.get_int("batch_size", cfg.batch_size));
  cfg.crop = static_cast<int>(kv.get_int("crop", cfg.crop));
  cfg.stage1_iters = static_cast<int>(kv.get_int("stage1_iters", cfg.stage1_iters));
  cfg.stage2_iters = static_cast<int>(kv.get_int("stage2_iters", cfg.stage2_iters));
  cfg.lr0 = kv.get_double("lr0", cfg.lr0);
  cfg.lr_milestones = kv.get_int_list("lr_milestones", cfg.lr_milestones);
  cfg.stage2_lr = kv.get_double("stage2_lr", cfg.stage2_lr);
  cfg.beta1 = kv.get_double("beta1", cfg.beta1);
  cfg.beta2 = kv.get_double("beta2", cfg.beta2);
  cfg.eps = kv.get_double("eps", cfg.eps);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.grad_clip = kv.get_double("grad_clip", cfg.grad_clip);
  cfg.weights = LossWeights::from_config(kv);
  cfg.power = PowerModelConfig::from_config(kv);
  cfg.arch.num_blocks = static_cast<int>(kv.get_int("blocks", cfg.arch.num_blocks));
  cfg.arch.growth = static_cast<int>(kv.get_int("width", cfg.arch.growth));
  cfg.arch.dim_zg = static_cast<int>(kv.get_int("dim_zg", cfg.arch.dim_zg));
  cfg.arch.clamp_alpha = kv.get_double("clamp_alpha", cfg.arch.clamp_alpha);
  cfg.validate();
  return cfg;
}

TrainingConfig TrainingConfig::from_file(const std::string& path) {
  return from_config(KeyValueFile::parse_file(path));
}

KeyValueFile TrainingConfig::to_config() const {
  KeyValueFile kv;
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("crop", std::to_string(crop));
  kv.set("stage1_iters", std::to_string(stage1_iters));
  kv.set("stage2_iters", std::to_string(stage2_iters));
  kv.set_double("lr0", lr0);
  std::vector<double> ms(lr_milestones.begin(), lr_milestones.end());
  kv.set_list("lr_milestones", ms);
  kv.set_double("stage2_lr", stage2_lr);
  kv.set_double("beta1", beta1);
  kv.set_double("beta2", beta2);
  kv.set_double("eps", eps);
  kv.set("seed", std::to_string(seed));
  kv.set_double("grad_clip", grad_clip);
  kv.set_double("lambda1", weights.lambda1);
  kv.set_double("lambda2", weights.lambda2);
  kv.set_double("lambda3", weights.lambda3);
  kv.set_double("lambda4", weights.lambda4);
  kv.set_double("lambda5", weights.lambda5);
  kv.set_double("lambda6", weights.lambda6);
  kv.set_double("R", weights.R);
  kv.set("power_model", power.model == PowerModel::Rgbw ? "rgbw" : "luminance");
  kv.set_double("gamma", power.gamma);
  kv.set_double("k_r", power.k_r);
  kv.set_double("k_g", power.k_g);
  kv.set_double("k_b", power.k_b);
  kv.set_double("k_w", power.k_w);
  kv.set("blocks", std::to_string(arch.num_blocks));
  kv.set("width", std::to_string(arch.growth));
  kv.set("dim_zg", std::to_string(arch.dim_zg));
  kv.set_double("clamp_alpha", arch.clamp_alpha);
  return kv;
}

namespace {

Tensor<float> sample_normal(const Shape& shape, Rng& rng) {
  auto t = Tensor<float>::zeros(shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

TrainResult run_training(ThreeRNet<float>& net, const std::vector<TrainingPair>& train_set,
                         const TrainingConfig& cfg, int stage) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty dataset");
  for (const auto& pair : train_set) {
    if (pair.grainy_hr.width < cfg.crop || pair.grainy_hr.height < cfg.crop) {
      throw ShapeError("train: image smaller than crop " + std::to_string(cfg.crop));
    }
  }

  Rng rng(cfg.seed);
  AdamState<float> state;
  TrainResult result;
  const int iters = stage == 1 ? cfg.stage1_iters : cfg.stage2_iters;
  result.history.reserve(static_cast<size_t>(iters));

  for (int iter = 0; iter < iters; ++iter) {
    const double lr = stage == 1 ? cfg.lr_at(iter) : cfg.resolved_stage2_lr();

    std::vector<Image> grainy, clean, clean_lr;
    grainy.reserve(cfg.batch_size);
    clean.reserve(cfg.batch_size);
    clean_lr.reserve(cfg.batch_size);
    for (int k = 0; k < cfg.batch_size; ++k) {
      const auto& pair =
          train_set[static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(train_set.size()) - 1))];
      TrainingPair cropped = random_crop_flip(pair, cfg.crop, rng);
      grainy.push_back(std::move(cropped.grainy_hr));
      clean.push_back(std::move(cropped.clean_hr));
      clean_lr.push_back(std::move(cropped.clean_lr));
    }
    auto grainy_t = to_tensor_batch<float>(grainy);
    auto clean_t = to_tensor_batch<float>(clean);
    auto clean_lr_t = to_tensor_batch<float>(clean_lr);

    LossHistoryRow row;
    row.iter = iter;
    row.lr = lr;
    try {
      Tape<float> tape;
      auto fw = net.forward(grainy_t);
      LossParts<float> parts;
      parts.forward = loss_forward(fw.lr, clean_lr_t);
      parts.reg = loss_reg(fw.z);

      // Fresh Gaussian sample decoded once; grainy and clean reconstructions
      // share it, clean zeroes the grain channels.
      Tensor<float> z_s = sample_normal(fw.z.shape(), rng);
      Tensor<float> z_tilde = net.decode_latent(z_s, fw.lr);
      Tensor<float> recon_g = net.inverse_from_ztilde(fw.lr, z_tilde, false);
      Tensor<float> recon_c = net.inverse_from_ztilde(fw.lr, z_tilde, true);
      parts.back_grainy = loss_back_grainy(recon_g, grainy_t);
      parts.back_clean = loss_back_clean(recon_c, clean_t);

      Tensor<float> total;
      if (stage == 2) {
        Tensor<float> lr_display = clamp(fw.lr, 0.0f, 1.0f);
        parts.power = loss_power(lr_display, clean_lr_t, cfg.weights.R, cfg.power);
        parts.ssim = loss_ssim(lr_display, clean_lr_t);
        total = total_loss_stage2(parts, cfg.weights);
        row.pow = parts.power.item();
        row.ssim = parts.ssim.item();
      } else {
        total = total_loss_stage1(parts, cfg.weights);
      }
      row.total = total.item();
      row.forw = parts.forward.item();
      row.reg = parts.reg.item();
      row.back_c = parts.back_clean.item();
      row.back_g = parts.back_grainy.item();
      if (!std::isfinite(row.total)) throw NumericError("total loss non-finite");

      tape.backward(total);
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(iter) + ": " + e.what());
    }

    clip_gradients(net.params(), cfg.grad_clip);
    adam_step(net.params(), state, lr, cfg.beta1, cfg.beta2, cfg.eps);
    net.zero_grad();
    result.history.push_back(row);
  }

  if (stage == 2) net.finetune_rate = cfg.weights.R;
  return result;
}

}  // namespace

TrainResult train_stage1(ThreeRNet<float>& net, const std::vector<TrainingPair>& train_set,
                         const TrainingConfig& cfg) {
  return run_training(net, train_set, cfg, 1);
}

TrainResult train_stage2(ThreeRNet<float>& net, const std::vector<TrainingPair>& train_set,
                         const TrainingConfig& cfg) {
  return run_training(net, train_set, cfg, 2);
}

void write_loss_csv(const std::vector<LossHistoryRow>& rows, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot write loss history " + path);
  std::fputs("iter,loss_total,loss_forw,loss_reg,loss_back_c,loss_back_g,loss_pow,loss_ssim,lr\n",
             f);
  for (const auto& r : rows) {
    std::fprintf(f, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.iter, r.total, r.forw,
                 r.reg, r.back_c, r.back_g, r.pow, r.ssim, r.lr);
  }
  std::fclose(f);
}

}  // namespace threer
