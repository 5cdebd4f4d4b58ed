#include "threer/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "threer/gradcheck.hpp"

namespace threer {

double psnr_y(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError("psnr_y: dimension mismatch");
  }
  double mse = 0.0;
  const size_t n = a.plane();
  for (size_t i = 0; i < n; ++i) {
    const double ya = 0.299 * a.data[i] + 0.587 * a.data[i + n] + 0.114 * a.data[i + 2 * n];
    const double yb = 0.299 * b.data[i] + 0.587 * b.data[i + n] + 0.114 * b.data[i + 2 * n];
    mse += (ya - yb) * (ya - yb);
  }
  mse /= static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ShapeError("kl_divergence: size mismatch");
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw NumericError("kl_divergence: zero q with nonzero p");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

namespace {

std::vector<double> luma_histogram(const Image& img, int bins) {
  std::vector<double> h(static_cast<size_t>(bins), 0.0);
  const size_t n = img.plane();
  for (size_t i = 0; i < n; ++i) {
    const float y = luma601(img.data[i], img.data[i + n], img.data[i + 2 * n]);
    const int bin = std::min(bins - 1, std::max(0, static_cast<int>(y * bins)));
    h[static_cast<size_t>(bin)] += 1.0;
  }
  // add-one smoothing before normalization
  double total = 0.0;
  for (auto& v : h) {
    v += 1.0;
    total += v;
  }
  for (auto& v : h) v /= total;
  return h;
}

}  // namespace

double histogram_kld(const Image& a, const Image& b, int bins) {
  if (bins < 2) throw ConfigError("histogram_kld: need at least 2 bins");
  return kl_divergence(luma_histogram(a, bins), luma_histogram(b, bins));
}

double achieved_reduction(const Image& pred, const Image& ref, const PowerModelConfig& cfg) {
  if (pred.width != ref.width || pred.height != ref.height) {
    throw ShapeError("achieved_reduction: dimension mismatch");
  }
  const double p_ref = power(ref, cfg);
  if (p_ref == 0.0) throw NumericError("achieved_reduction: reference power is zero");
  return 1.0 - power(pred, cfg) / p_ref;
}

MetricRow MetricReport::aggregate() const {
  MetricRow agg;
  agg.image = "aggregate";
  if (rows.empty()) return agg;
  for (const auto& r : rows) {
    agg.psnr_y += r.psnr_y;
    agg.ssim += r.ssim;
    agg.kld += r.kld;
    agg.rate_y += r.rate_y;
    agg.rate_rgbw += r.rate_rgbw;
  }
  const double n = static_cast<double>(rows.size());
  agg.psnr_y /= n;
  agg.ssim /= n;
  agg.kld /= n;
  agg.rate_y /= n;
  agg.rate_rgbw /= n;
  return agg;
}

namespace {

void print_metric(std::FILE* f, double v) {
  if (std::isinf(v)) {
    std::fputs(v > 0 ? ",inf" : ",-inf", f);
  } else {
    std::fprintf(f, ",%.9g", v);
  }
}

}  // namespace

void write_metric_csv(const MetricReport& report, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot write report " + path);
  std::fputs("image,psnr_y,ssim,kld,rate_y,rate_rgbw\n", f);
  auto row = [f](const MetricRow& r) {
    std::fputs(r.image.c_str(), f);
    print_metric(f, r.psnr_y);
    print_metric(f, r.ssim);
    print_metric(f, r.kld);
    print_metric(f, r.rate_y);
    print_metric(f, r.rate_rgbw);
    std::fputs("\n", f);
  };
  for (const auto& r : report.rows) row(r);
  row(report.aggregate());
  std::fclose(f);
}

MetricReport evaluate_dataset(const ThreeRNet<float>& net, const std::vector<TrainingPair>& pairs,
                              const EvaluateOptions& opts) {
  MetricReport report;
  report.rows.resize(pairs.size());
  PowerModelConfig luminance = opts.power;
  luminance.model = PowerModel::Luminance;
  PowerModelConfig rgbw = opts.power;
  rgbw.model = PowerModel::Rgbw;

  // Per-image seeds keep the rows independent of evaluation order, so images
  // can be scored on parallel workers.
  auto eval_one = [&](size_t i) {
    const auto& pair = pairs[i];
    auto fw = net.forward(to_tensor<float>(pair.grainy_hr));
    Tensor<float> lr = fw.lr;
    if (opts.quantize_lr) lr = quantize_8bit(clamp(lr, 0.0f, 1.0f));

    Rng rng(opts.seed + 0x9E3779B97F4A7C15ull * (i + 1));
    auto z = Tensor<float>::zeros(fw.z.shape());
    for (auto& v : z.data()) v = static_cast<float>(rng.normal());

    const Image clean_recon = to_image(net.inverse(lr, z, InverseMode::Clean));
    const Image grainy_recon = to_image(net.inverse(lr, z, InverseMode::Grainy));
    const Image lr_img = to_image(lr);

    MetricRow row;
    row.image = "pair" + std::to_string(i);
    row.psnr_y = psnr_y(clean_recon, pair.clean_hr);
    row.ssim = ssim(clean_recon, pair.clean_hr);
    row.kld = histogram_kld(grainy_recon, pair.grainy_hr);
    row.rate_y = achieved_reduction(lr_img, pair.clean_lr, luminance);
    row.rate_rgbw = achieved_reduction(lr_img, pair.clean_lr, rgbw);
    report.rows[i] = std::move(row);
  };

  const int workers =
      std::max(1, std::min(thread_budget(), static_cast<int>(pairs.size())));
  if (workers == 1) {
    for (size_t i = 0; i < pairs.size(); ++i) eval_one(i);
  } else {
    std::atomic<size_t> cursor{0};
    auto worker = [&] {
      for (;;) {
        const size_t i = cursor.fetch_add(1);
        if (i >= pairs.size()) break;
        eval_one(i);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }
  return report;
}

std::vector<AblationRow> evaluate_ablation(const ThreeRNet<float>& net,
                                           const std::vector<TrainingPair>& pairs, int config_id,
                                           std::uint64_t seed) {
  if (config_id < 1 || config_id > 3) {
    throw ConfigError("ablation: unknown config id " + std::to_string(config_id));
  }
  std::vector<AblationRow> rows;
  Rng rng(seed);
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    auto fw = net.forward(to_tensor<float>(pair.grainy_hr));

    auto z_sample = Tensor<float>::zeros(fw.z.shape());
    for (auto& v : z_sample.data()) v = static_cast<float>(rng.normal());

    Image grainy_recon, clean_recon;
    switch (config_id) {
      case 1:
        // True forward latent for the grainy restoration; the clean image
        // still comes from a Gaussian sample.
        grainy_recon = to_image(net.inverse(fw.lr, fw.z, InverseMode::TrueLatent));
        clean_recon = to_image(net.inverse(fw.lr, z_sample, InverseMode::Clean));
        break;
      case 2:
        // Sampled latent used directly as the lost information.
        grainy_recon = to_image(net.inverse_from_ztilde(fw.lr, z_sample, false));
        clean_recon = to_image(net.inverse_from_ztilde(fw.lr, z_sample, true));
        break;
      default:
        grainy_recon = to_image(net.inverse(fw.lr, z_sample, InverseMode::Grainy));
        clean_recon = to_image(net.inverse(fw.lr, z_sample, InverseMode::Clean));
        break;
    }

    AblationRow row;
    row.image = "pair" + std::to_string(i);
    const Image lr_img = to_image(fw.lr);
    row.clean_lr_psnr = psnr_y(lr_img, pair.clean_lr);
    row.clean_lr_ssim = ssim(lr_img, pair.clean_lr);
    row.clean_hr_psnr = psnr_y(clean_recon, pair.clean_hr);
    row.clean_hr_ssim = ssim(clean_recon, pair.clean_hr);
    row.grainy_hr_psnr = psnr_y(grainy_recon, pair.grainy_hr);
    row.grainy_hr_kld = histogram_kld(grainy_recon, pair.grainy_hr);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot write report " + path);
  std::fputs("image,clean_lr_psnr,clean_lr_ssim,clean_hr_psnr,clean_hr_ssim,grainy_hr_psnr,grainy_hr_kld\n",
             f);
  for (const auto& r : rows) {
    std::fputs(r.image.c_str(), f);
    print_metric(f, r.clean_lr_psnr);
    print_metric(f, r.clean_lr_ssim);
    print_metric(f, r.clean_hr_psnr);
    print_metric(f, r.clean_hr_ssim);
    print_metric(f, r.grainy_hr_psnr);
    print_metric(f, r.grainy_hr_kld);
    std::fputs("\n", f);
  }
  std::fclose(f);
}

std::vector<ChainMeasurement> load_chain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open measurements " + path);
  std::vector<ChainMeasurement> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("variant,", 0) == 0) continue;  // header
    std::istringstream ss(line);
    std::string field;
    ChainMeasurement m;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected 6 fields");
    }
    try {
      m.variant = fields[0];
      m.qp = std::stod(fields[1]);
      m.encode_s = std::stod(fields[2]);
      m.decode_s = std::stod(fields[3]);
      m.bitrate_kbps = std::stod(fields[4]);
      m.display_w = std::stod(fields[5]);
    } catch (...) {
      throw IoError(path + ":" + std::to_string(lineno) + ": bad number");
    }
    if (m.encode_s < 0 || m.decode_s < 0 || m.bitrate_kbps < 0 || m.display_w < 0) {
      throw IoError(path + ":" + std::to_string(lineno) + ": negative measurement");
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<EnergySavingsRow> energy_savings_report(const std::vector<ChainMeasurement>& m,
                                                    const std::string& baseline_variant,
                                                    const EnergyCoefficients& coeffs) {
  std::vector<const ChainMeasurement*> baselines;
  for (const auto& row : m) {
    if (row.variant == baseline_variant) baselines.push_back(&row);
  }
  if (baselines.empty()) {
    throw ConfigError("energy report: baseline variant '" + baseline_variant + "' not present");
  }
  auto baseline_for = [&](double qp) -> const ChainMeasurement* {
    for (const auto* b : baselines) {
      if (b->qp == qp) return b;
    }
    return nullptr;
  };

  auto pct = [](double value, double base) {
    return base > 0.0 ? 100.0 * (1.0 - value / base) : 0.0;
  };

  std::vector<EnergySavingsRow> out;
  for (const auto& row : m) {
    const ChainMeasurement* base = baseline_for(row.qp);
    if (!base) continue;  // no matching baseline QP
    EnergySavingsRow r;
    r.variant = row.variant;
    r.qp = row.qp;
    r.encode_pct = pct(row.encode_s, base->encode_s);
    r.delivery_pct = pct(row.bitrate_kbps, base->bitrate_kbps);
    r.decode_pct = pct(row.decode_s, base->decode_s);
    r.display_pct = pct(row.display_w, base->display_w);
    const double e_row = coeffs.head * row.encode_s + coeffs.delivery * row.bitrate_kbps +
                         coeffs.device * row.decode_s + coeffs.display * row.display_w;
    const double e_base = coeffs.head * base->encode_s + coeffs.delivery * base->bitrate_kbps +
                          coeffs.device * base->decode_s + coeffs.display * base->display_w;
    r.total_pct = pct(e_row, e_base);
    out.push_back(std::move(r));
  }
  return out;
}

void write_energy_csv(const std::vector<EnergySavingsRow>& rows, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot write report " + path);
  std::fputs("variant,qp,encode_pct,delivery_pct,decode_pct,display_pct,total_pct\n", f);
  for (const auto& r : rows) {
    std::fprintf(f, "%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.variant.c_str(), r.qp, r.encode_pct,
                 r.delivery_pct, r.decode_pct, r.display_pct, r.total_pct);
  }
  std::fclose(f);
}

}  // namespace threer
