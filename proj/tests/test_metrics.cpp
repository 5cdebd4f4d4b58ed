#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "finite_diff.hpp"
#include "threer/metrics.hpp"

using namespace threer;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "threer_metrics_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Image random_image(int w, int h, Rng& rng, float lo = 0.0f, float hi = 1.0f) {
  Image img = Image::create(w, h);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform(lo, hi));
  return img;
}

std::vector<TrainingPair> toy_pairs(int count, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingPair> pairs;
  GrainConfig grain;
  for (int i = 0; i < count; ++i) {
    Image clean = synthetic_image(i, size, size, rng);
    grain.seed = rng.next_u64();
    pairs.push_back(make_training_pair(clean, grain));
  }
  return pairs;
}

}  // namespace

TEST_CASE("psnr_y of identical images is the inf sentinel") {
  Rng rng(101);
  Image img = random_image(8, 8, rng);
  CHECK(std::isinf(psnr_y(img, img)));
  CHECK(psnr_y(img, img) > 0);
}

TEST_CASE("a uniform tenth of luma offset scores 20 dB") {
  Image a = Image::create(16, 16, 0.5f);
  Image b = Image::create(16, 16, 0.5f - 0.1f);
  CHECK(std::abs(psnr_y(a, b) - 20.0) <= 1e-6);
}

TEST_CASE("psnr_y is symmetric, kld is not") {
  Rng rng(102);
  Image a = random_image(12, 10, rng, 0.0f, 0.5f);
  Image b = random_image(12, 10, rng, 0.3f, 1.0f);
  CHECK(psnr_y(a, b) == psnr_y(b, a));
  CHECK(histogram_kld(a, b) != histogram_kld(b, a));
  CHECK(psnr_y(a, b) == psnr_y(b, a));

  Image c = Image::create(4, 4);
  CHECK_THROWS_AS(psnr_y(a, c), ShapeError);
}

TEST_CASE("histogram kld is zero on identical images and nonnegative in general") {
  Rng rng(103);
  Image a = random_image(16, 16, rng);
  CHECK(histogram_kld(a, a) == doctest::Approx(0.0));
  for (int i = 0; i < 5; ++i) {
    Image b = random_image(16, 16, rng);
    CHECK(histogram_kld(a, b) >= 0.0);
  }
}

TEST_CASE("two-bin kld matches the closed form") {
  const double expected = 0.75 * std::log(3.0) + 0.25 * std::log(1.0 / 3.0);
  CHECK(std::abs(kl_divergence({0.75, 0.25}, {0.25, 0.75}) - expected) <= 1e-9);
  CHECK(expected == doctest::Approx(0.5493).epsilon(1e-4));
}

TEST_CASE("achieved reduction fixed points") {
  Rng rng(104);
  Image ref = random_image(8, 8, rng, 0.2f, 0.9f);
  PowerModelConfig cfg;
  CHECK(achieved_reduction(ref, ref, cfg) == doctest::Approx(0.0));
  Image black = Image::create(8, 8, 0.0f);
  CHECK(achieved_reduction(black, ref, cfg) == doctest::Approx(1.0));
  CHECK_THROWS_AS(achieved_reduction(ref, black, cfg), NumericError);
}

TEST_CASE("linear-domain luminance scaling achieves exactly its rate") {
  Rng rng(105);
  Image ref = random_image(10, 10, rng, 0.05f, 0.95f);
  const double R = 0.4;
  PowerModelConfig lum;
  lum.model = PowerModel::Luminance;
  Image pred = ref;
  for (auto& v : pred.data) {
    v = static_cast<float>(std::pow(std::pow(v, lum.gamma) * (1.0 - R), 1.0 / lum.gamma));
  }
  CHECK(std::abs(achieved_reduction(pred, ref, lum) - R) <= 1e-6);
}

TEST_CASE("metric report aggregates by arithmetic mean") {
  MetricReport report;
  report.rows.push_back({"a", 30.0, 0.9, 0.1, 0.2, 0.3});
  report.rows.push_back({"b", 40.0, 0.7, 0.3, 0.4, 0.5});
  const auto agg = report.aggregate();
  CHECK(agg.image == "aggregate");
  CHECK(agg.psnr_y == doctest::Approx(35.0));
  CHECK(agg.ssim == doctest::Approx(0.8));
  CHECK(agg.kld == doctest::Approx(0.2));
  CHECK(agg.rate_y == doctest::Approx(0.3));
  CHECK(agg.rate_rgbw == doctest::Approx(0.4));
}

TEST_CASE("metric csv serializes infinities as inf") {
  MetricReport report;
  report.rows.push_back({"a", std::numeric_limits<double>::infinity(), 1.0, 0.0, 0.0, 0.0});
  const auto path = (temp_dir() / "metrics.csv").string();
  write_metric_csv(report, path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "image,psnr_y,ssim,kld,rate_y,rate_rgbw");
  CHECK(row.rfind("a,inf,", 0) == 0);
}

TEST_CASE("evaluate_dataset emits one row per pair") {
  auto pairs = toy_pairs(3, 24, 7);
  NetworkArch arch;
  arch.num_blocks = 1;
  arch.growth = 2;
  ThreeRNet<float> net(arch);
  net.init_params(3);
  EvaluateOptions opts;
  auto report = evaluate_dataset(net, pairs, opts);
  REQUIRE(report.rows.size() == 3);
  for (const auto& row : report.rows) {
    CHECK(std::isfinite(row.kld));
    CHECK(row.ssim <= 1.0);
  }
  // deterministic given one seed
  auto report2 = evaluate_dataset(net, pairs, opts);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(report.rows[i].psnr_y == report2.rows[i].psnr_y);
  }
}

TEST_CASE("ablation config 1 reconstructs the grainy image above 60 dB") {
  auto pairs = toy_pairs(2, 24, 9);
  NetworkArch arch;
  arch.num_blocks = 2;
  arch.growth = 4;
  ThreeRNet<float> net(arch);
  net.init_params_random(17);
  auto rows = evaluate_ablation(net, pairs, 1, 5);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) CHECK(row.grainy_hr_psnr >= 60.0);
}

TEST_CASE("ablation rejects unknown configuration ids") {
  auto pairs = toy_pairs(1, 24, 9);
  ThreeRNet<float> net(NetworkArch{1, 2, 1, 2.0});
  net.init_params(1);
  CHECK_THROWS_AS(evaluate_ablation(net, pairs, 0, 1), ConfigError);
  CHECK_THROWS_AS(evaluate_ablation(net, pairs, 4, 1), ConfigError);
}

TEST_CASE("ablation emits one row per pair for every config") {
  auto pairs = toy_pairs(3, 24, 9);
  ThreeRNet<float> net(NetworkArch{1, 2, 1, 2.0});
  net.init_params_random(7);
  for (int config = 1; config <= 3; ++config) {
    CHECK(evaluate_ablation(net, pairs, config, 5).size() == 3);
  }
}

TEST_CASE("energy report fixed points and orderings") {
  std::vector<ChainMeasurement> m = {
      {"hr-grainy", 22, 100.0, 10.0, 5000.0, 30.0},
      {"hr-clean", 22, 80.0, 8.0, 3000.0, 30.0},
      {"lr-r20", 22, 20.0, 2.0, 900.0, 24.0},
      {"hr-grainy", 27, 60.0, 6.0, 2500.0, 30.0},
      {"hr-clean", 27, 50.0, 5.0, 1800.0, 30.0},
      {"lr-r20", 27, 12.0, 1.5, 600.0, 24.0},
  };
  EnergyCoefficients coeffs;
  auto rows = energy_savings_report(m, "hr-grainy", coeffs);
  REQUIRE(rows.size() == 6);

  for (const auto& row : rows) {
    if (row.variant == "hr-grainy") {
      CHECK(row.encode_pct == doctest::Approx(0.0));
      CHECK(row.delivery_pct == doctest::Approx(0.0));
      CHECK(row.decode_pct == doctest::Approx(0.0));
      CHECK(row.display_pct == doctest::Approx(0.0));
      CHECK(row.total_pct == doctest::Approx(0.0));
    }
  }

  // halved encode time -> 50% head-end saving regardless of coefficients
  std::vector<ChainMeasurement> halved = {
      {"base", 22, 100.0, 10.0, 5000.0, 30.0},
      {"fast", 22, 50.0, 10.0, 5000.0, 30.0},
  };
  EnergyCoefficients weird{12.5, 3.0, 0.4, 9.0};
  auto rows2 = energy_savings_report(halved, "base", weird);
  CHECK(rows2[1].encode_pct == doctest::Approx(50.0));

  // LR saves more than HR-clean which saves more than HR-grainy, per QP
  for (double qp : {22.0, 27.0}) {
    double lr_save = 0, clean_save = 0, grainy_save = 0;
    for (const auto& row : rows) {
      if (row.qp != qp) continue;
      if (row.variant == "lr-r20") lr_save = row.encode_pct;
      if (row.variant == "hr-clean") clean_save = row.encode_pct;
      if (row.variant == "hr-grainy") grainy_save = row.encode_pct;
    }
    CHECK(lr_save > clean_save);
    CHECK(clean_save > grainy_save);
  }

  CHECK_THROWS_AS(energy_savings_report(m, "nope", coeffs), ConfigError);
}

TEST_CASE("chain csv loads and validates") {
  const auto path = (temp_dir() / "chain.csv").string();
  {
    std::ofstream out(path);
    out << "variant,qp,encode_s,decode_s,bitrate_kbps,display_w\n";
    out << "hr-grainy,22,100,10,5000,30\n";
    out << "lr-r20,22,20,2,900,24\n";
  }
  auto m = load_chain_csv(path);
  REQUIRE(m.size() == 2);
  CHECK(m[0].variant == "hr-grainy");
  CHECK(m[1].bitrate_kbps == doctest::Approx(900.0));

  {
    std::ofstream out(path);
    out << "hr,22,-1,10,5000,30\n";
  }
  CHECK_THROWS_AS(load_chain_csv(path), IoError);
}
