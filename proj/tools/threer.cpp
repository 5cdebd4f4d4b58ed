#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "threer/dataset.hpp"
#include "threer/gradcheck.hpp"
#include "threer/metrics.hpp"
#include "threer/network.hpp"
#include "threer/sha1.hpp"
#include "threer/train.hpp"

using namespace threer;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kLatentMagic[4] = {'3', 'R', 'Z', '0'};

void save_latent(const Tensor<float>& z, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write latent " + path);
  out.write(kLatentMagic, 4);
  const std::uint32_t rank = static_cast<std::uint32_t>(z.shape().size());
  out.write(reinterpret_cast<const char*>(&rank), 4);
  for (int e : z.shape()) {
    const std::uint32_t v = static_cast<std::uint32_t>(e);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  out.write(reinterpret_cast<const char*>(z.data().data()),
            static_cast<std::streamsize>(z.data().size() * sizeof(float)));
  if (!out) throw IoError("write failed for latent " + path);
}

Tensor<float> load_latent(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open latent " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kLatentMagic, 4) != 0) {
    throw IoError(path + ": bad magic");
  }
  std::uint32_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), 4);
  if (in.gcount() != 4 || rank > 8) throw IoError(path + ": truncated latent file");
  Shape shape;
  std::int64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    std::uint32_t e = 0;
    in.read(reinterpret_cast<char*>(&e), 4);
    if (in.gcount() != 4 || e == 0) throw IoError(path + ": truncated latent file");
    shape.push_back(static_cast<int>(e));
    count *= e;
  }
  std::vector<float> data(static_cast<size_t>(count));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(data.size() * sizeof(float))) {
    throw IoError(path + ": truncated latent file");
  }
  return Tensor<float>::from_data(std::move(shape), std::move(data));
}

// Run manifest written next to the primary output: config snapshot, seed and
// content hashes of the inputs, so a result can be reproduced exactly.
void write_run_manifest(const std::string& primary_output, const std::string& command,
                        const json& config, std::uint64_t seed,
                        const std::vector<std::string>& inputs) {
  json doc;
  doc["command"] = command;
  doc["config"] = config;
  doc["seed"] = seed;
  json hashes = json::object();
  for (const auto& path : inputs) hashes[path] = git_blob_hash_file(path);
  doc["inputs"] = hashes;
  const std::string path = primary_output + ".manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  out << doc.dump(2) << "\n";
}

json config_json(const KeyValueFile& kv) {
  json out = json::object();
  for (const auto& key : kv.keys()) out[key] = kv.get_string(key, "");
  return out;
}

Tensor<float> sample_latent(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  auto z = Tensor<float>::zeros(shape);
  for (auto& v : z.data()) v = static_cast<float>(rng.normal());
  return z;
}

std::vector<std::string> dataset_input_files(const std::string& manifest_path) {
  std::vector<std::string> files{manifest_path};
  const fs::path base = fs::path(manifest_path).parent_path();
  for (const auto& e : load_manifest(manifest_path)) {
    files.push_back((base / e.clean_path).string());
    files.push_back((base / e.grainy_path).string());
  }
  return files;
}

std::vector<TrainingPair> select_split(Dataset& ds, const std::string& split) {
  std::vector<TrainingPair> pairs;
  if (split == "train" || split == "all") {
    for (auto& p : ds.train) pairs.push_back(std::move(p));
  }
  if (split == "val" || split == "all") {
    for (auto& p : ds.val) pairs.push_back(std::move(p));
  }
  if (pairs.empty()) throw ConfigError("no images in split '" + split + "'");
  return pairs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3R-INN: invertible rescale / de-grain / display-power pipeline"};
  app.require_subcommand(1);

  // forward
  auto* cmd_forward = app.add_subcommand("forward", "HR grainy image -> LR image (+ latent)");
  std::string fw_checkpoint, fw_input, fw_out_lr, fw_out_latent;
  double fw_alpha = 2.0;
  cmd_forward->add_option("--checkpoint", fw_checkpoint)->required();
  cmd_forward->add_option("--input", fw_input)->required();
  cmd_forward->add_option("--out-lr", fw_out_lr)->required();
  cmd_forward->add_option("--out-latent", fw_out_latent);
  cmd_forward->add_option("--clamp-alpha", fw_alpha);

  // inverse
  auto* cmd_inverse = app.add_subcommand("inverse", "LR image (+ latent) -> HR image");
  std::string iv_checkpoint, iv_input, iv_mode = "grainy", iv_latent, iv_out;
  std::uint64_t iv_seed = 0;
  double iv_alpha = 2.0;
  cmd_inverse->add_option("--checkpoint", iv_checkpoint)->required();
  cmd_inverse->add_option("--input", iv_input)->required();
  cmd_inverse->add_option("--mode", iv_mode)
      ->check(CLI::IsMember({"grainy", "clean", "true-latent"}));
  cmd_inverse->add_option("--latent", iv_latent);
  cmd_inverse->add_option("--out", iv_out)->required();
  cmd_inverse->add_option("--seed", iv_seed);
  cmd_inverse->add_option("--clamp-alpha", iv_alpha);

  // train
  auto* cmd_train = app.add_subcommand("train", "stage-1 training on a dataset manifest");
  std::string tr_config, tr_manifest, tr_out, tr_history;
  cmd_train->add_option("--config", tr_config);
  cmd_train->add_option("--manifest", tr_manifest)->required();
  cmd_train->add_option("--out-checkpoint", tr_out)->required();
  cmd_train->add_option("--out-history", tr_history);

  // finetune
  auto* cmd_finetune = app.add_subcommand("finetune", "stage-2 energy fine-tuning for one R");
  std::string ft_config, ft_manifest, ft_checkpoint, ft_out, ft_history;
  double ft_rate = -1.0;
  cmd_finetune->add_option("--config", ft_config);
  cmd_finetune->add_option("--manifest", ft_manifest)->required();
  cmd_finetune->add_option("--checkpoint", ft_checkpoint)->required();
  cmd_finetune->add_option("--out-checkpoint", ft_out)->required();
  cmd_finetune->add_option("--out-history", ft_history);
  cmd_finetune->add_option("--R", ft_rate, "target reduction rate")->required();

  // evaluate
  auto* cmd_evaluate = app.add_subcommand("evaluate", "quality/power metrics over a dataset");
  std::string ev_checkpoint, ev_manifest, ev_out, ev_split = "val", ev_config;
  std::uint64_t ev_seed = 0;
  bool ev_quantize = false;
  cmd_evaluate->add_option("--checkpoint", ev_checkpoint)->required();
  cmd_evaluate->add_option("--manifest", ev_manifest)->required();
  cmd_evaluate->add_option("--out", ev_out)->required();
  cmd_evaluate->add_option("--split", ev_split)->check(CLI::IsMember({"train", "val", "all"}));
  cmd_evaluate->add_option("--config", ev_config, "power model configuration");
  cmd_evaluate->add_option("--seed", ev_seed);
  cmd_evaluate->add_flag("--quantize-8bit", ev_quantize,
                         "simulate 8-bit LR transmission before the inverse pass");

  // ablate
  auto* cmd_ablate = app.add_subcommand("ablate", "latent-encoding configuration study");
  std::string ab_checkpoint, ab_manifest, ab_out, ab_split = "val";
  int ab_config_id = 3;
  std::uint64_t ab_seed = 0;
  cmd_ablate->add_option("--checkpoint", ab_checkpoint)->required();
  cmd_ablate->add_option("--manifest", ab_manifest)->required();
  cmd_ablate->add_option("--out", ab_out)->required();
  cmd_ablate->add_option("--config-id", ab_config_id)->check(CLI::Range(1, 3));
  cmd_ablate->add_option("--split", ab_split)->check(CLI::IsMember({"train", "val", "all"}));
  cmd_ablate->add_option("--seed", ab_seed);

  // energy-report
  auto* cmd_energy = app.add_subcommand("energy-report", "savings from measured chain data");
  std::string en_measurements, en_baseline, en_out;
  EnergyCoefficients en_coeffs;
  cmd_energy->add_option("--measurements", en_measurements)->required();
  cmd_energy->add_option("--baseline", en_baseline)->required();
  cmd_energy->add_option("--out", en_out)->required();
  cmd_energy->add_option("--head", en_coeffs.head, "J per encode second");
  cmd_energy->add_option("--delivery", en_coeffs.delivery, "J per kbps");
  cmd_energy->add_option("--device", en_coeffs.device, "J per decode second");
  cmd_energy->add_option("--display", en_coeffs.display, "J per measured watt");

  // make-dataset
  auto* cmd_dataset = app.add_subcommand("make-dataset", "procedural clean/grainy corpus");
  std::string md_dir, md_grain_config;
  MakeDatasetOptions md_opts;
  cmd_dataset->add_option("--out-dir", md_dir)->required();
  cmd_dataset->add_option("--count", md_opts.count);
  cmd_dataset->add_option("--size", md_opts.image_size);
  cmd_dataset->add_option("--seed", md_opts.seed);
  cmd_dataset->add_option("--val-fraction", md_opts.val_fraction);
  cmd_dataset->add_option("--grain-config", md_grain_config);

  // gradcheck
  auto* cmd_gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  GradCheckOptions gc_opts;
  std::string gc_report;
  cmd_gradcheck->add_option("--blocks", gc_opts.arch.num_blocks);
  cmd_gradcheck->add_option("--width", gc_opts.arch.growth);
  cmd_gradcheck->add_option("--size", gc_opts.input_size);
  cmd_gradcheck->add_option("--batch", gc_opts.batch);
  cmd_gradcheck->add_option("--tolerance", gc_opts.rtol);
  cmd_gradcheck->add_option("--atol", gc_opts.atol);
  cmd_gradcheck->add_option("--step", gc_opts.step);
  cmd_gradcheck->add_option("--seed", gc_opts.seed);
  cmd_gradcheck->add_option("--max-params", gc_opts.max_params);
  cmd_gradcheck->add_option("--threads", gc_opts.threads);
  cmd_gradcheck->add_option("--report", gc_report, "optional JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(cmd_forward)) {
      auto net = load_checkpoint<float>(fw_checkpoint, fw_alpha);
      const Image input = load_png(fw_input);
      auto fw = net.forward(to_tensor<float>(input));
      save_png(to_image(fw.lr), fw_out_lr);
      if (!fw_out_latent.empty()) save_latent(fw.z, fw_out_latent);

      const Image reference = bicubic_downscale_x2(input);
      const Image lr_img = to_image(fw.lr);
      PowerModelConfig lum, rgbw;
      lum.model = PowerModel::Luminance;
      rgbw.model = PowerModel::Rgbw;
      std::printf("achieved reduction vs bicubic reference: luminance %.4f, rgbw %.4f\n",
                  achieved_reduction(lr_img, reference, lum),
                  achieved_reduction(lr_img, reference, rgbw));
      json cfg{{"checkpoint", fw_checkpoint}, {"clamp_alpha", fw_alpha}};
      write_run_manifest(fw_out_lr, "forward", cfg, 0, {fw_checkpoint, fw_input});
    } else if (app.got_subcommand(cmd_inverse)) {
      const InverseMode mode = parse_inverse_mode(iv_mode);
      if (mode == InverseMode::TrueLatent && iv_latent.empty()) {
        throw ConfigError("inverse: --latent is required in true-latent mode");
      }
      auto net = load_checkpoint<float>(iv_checkpoint, iv_alpha);
      const Image input = load_png(iv_input);
      auto lr = to_tensor<float>(input);
      Tensor<float> z = mode == InverseMode::TrueLatent
                            ? load_latent(iv_latent)
                            : sample_latent({1, 9, input.height, input.width}, iv_seed);
      if (z.shape() != Shape{1, 9, input.height, input.width}) {
        throw ShapeError("inverse: latent shape " + shape_str(z.shape()) +
                         " does not match LR image " + std::to_string(input.width) + "x" +
                         std::to_string(input.height));
      }
      save_png(to_image(net.inverse(lr, z, mode)), iv_out);
      json cfg{{"checkpoint", iv_checkpoint}, {"mode", iv_mode}, {"clamp_alpha", iv_alpha}};
      std::vector<std::string> inputs{iv_checkpoint, iv_input};
      if (!iv_latent.empty()) inputs.push_back(iv_latent);
      write_run_manifest(iv_out, "inverse", cfg, iv_seed, inputs);
    } else if (app.got_subcommand(cmd_train)) {
      TrainingConfig cfg =
          tr_config.empty() ? TrainingConfig{} : TrainingConfig::from_file(tr_config);
      Dataset ds = load_dataset(tr_manifest);
      ThreeRNet<float> net(cfg.arch);
      net.init_params(cfg.seed);
      auto result = train_stage1(net, ds.train, cfg);
      save_checkpoint(net, tr_out);
      const std::string history = tr_history.empty() ? tr_out + ".losses.csv" : tr_history;
      write_loss_csv(result.history, history);
      write_run_manifest(tr_out, "train", config_json(cfg.to_config()), cfg.seed,
                         dataset_input_files(tr_manifest));
      std::printf("stage-1 done: %d iterations, final loss %.6g\n", cfg.stage1_iters,
                  result.history.back().total);
    } else if (app.got_subcommand(cmd_finetune)) {
      TrainingConfig cfg =
          ft_config.empty() ? TrainingConfig{} : TrainingConfig::from_file(ft_config);
      if (ft_rate < 0.0 || ft_rate > 1.0) throw ConfigError("finetune: R must be in [0,1]");
      cfg.weights.R = ft_rate;
      auto net = load_checkpoint<float>(ft_checkpoint, cfg.arch.clamp_alpha);
      Dataset ds = load_dataset(ft_manifest);
      auto result = train_stage2(net, ds.train, cfg);
      save_checkpoint(net, ft_out);
      if (!ft_history.empty()) write_loss_csv(result.history, ft_history);
      write_run_manifest(ft_out, "finetune", config_json(cfg.to_config()), cfg.seed,
                         dataset_input_files(ft_manifest));
      std::printf("stage-2 done for R=%.3f: %d iterations, final power term %.6g\n", ft_rate,
                  cfg.stage2_iters, result.history.empty() ? 0.0 : result.history.back().pow);
    } else if (app.got_subcommand(cmd_evaluate)) {
      auto net = load_checkpoint<float>(ev_checkpoint);
      Dataset ds = load_dataset(ev_manifest);
      auto pairs = select_split(ds, ev_split);
      EvaluateOptions opts;
      opts.quantize_lr = ev_quantize;
      opts.seed = ev_seed;
      if (!ev_config.empty()) {
        opts.power = PowerModelConfig::from_config(KeyValueFile::parse_file(ev_config));
      }
      write_metric_csv(evaluate_dataset(net, pairs, opts), ev_out);
      json cfg{{"checkpoint", ev_checkpoint},
               {"split", ev_split},
               {"quantize_8bit", ev_quantize}};
      write_run_manifest(ev_out, "evaluate", cfg, ev_seed, dataset_input_files(ev_manifest));
    } else if (app.got_subcommand(cmd_ablate)) {
      auto net = load_checkpoint<float>(ab_checkpoint);
      Dataset ds = load_dataset(ab_manifest);
      auto pairs = select_split(ds, ab_split);
      write_ablation_csv(evaluate_ablation(net, pairs, ab_config_id, ab_seed), ab_out);
      json cfg{{"checkpoint", ab_checkpoint}, {"config_id", ab_config_id}, {"split", ab_split}};
      write_run_manifest(ab_out, "ablate", cfg, ab_seed, dataset_input_files(ab_manifest));
    } else if (app.got_subcommand(cmd_energy)) {
      auto rows = energy_savings_report(load_chain_csv(en_measurements), en_baseline, en_coeffs);
      write_energy_csv(rows, en_out);
      json cfg{{"baseline", en_baseline},
               {"head", en_coeffs.head},
               {"delivery", en_coeffs.delivery},
               {"device", en_coeffs.device},
               {"display", en_coeffs.display}};
      write_run_manifest(en_out, "energy-report", cfg, 0, {en_measurements});
    } else if (app.got_subcommand(cmd_dataset)) {
      if (!md_grain_config.empty()) md_opts.grain = load_grain_config(md_grain_config);
      const std::string manifest = make_synthetic_dataset(md_dir, md_opts);
      json cfg{{"count", md_opts.count},
               {"size", md_opts.image_size},
               {"val_fraction", md_opts.val_fraction}};
      std::vector<std::string> inputs;
      if (!md_grain_config.empty()) inputs.push_back(md_grain_config);
      write_run_manifest(manifest, "make-dataset", cfg, md_opts.seed, inputs);
      std::printf("%s\n", manifest.c_str());
    } else if (app.got_subcommand(cmd_gradcheck)) {
      const auto report = gradcheck_stage1(gc_opts);
      std::printf("gradcheck: %zu gradients checked, %zu failed, worst relative error %.3g\n",
                  report.checked, report.failed, report.worst_rel);
      if (!gc_report.empty()) {
        json doc{{"checked", report.checked},
                 {"failed", report.failed},
                 {"max_abs_err", report.max_abs_err},
                 {"worst_rel", report.worst_rel}};
        std::ofstream out(gc_report);
        if (!out) throw IoError("cannot write report " + gc_report);
        out << doc.dump(2) << "\n";
      }
      if (!report.passed()) return 4;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
