#include <doctest.h>

#include <cmath>

#include "finite_diff.hpp"
#include "threer/losses.hpp"
#include "threer/network.hpp"

using namespace threer;

namespace {

// Windowed-statistics SSIM oracle: direct per-window evaluation in double,
// independent of the tensor ops.
double ssim_oracle(const Tensor<double>& a, const Tensor<double>& b) {
  const int B = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
  std::vector<double> g(11);
  double gs = 0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5.0;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    gs += g[i];
  }
  for (auto& v : g) v /= gs;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0;
  int count = 0;
  for (int n = 0; n < B; ++n) {
    for (int c = 0; c < C; ++c) {
      const double* pa = a.data().data() + (static_cast<size_t>(n) * C + c) * H * W;
      const double* pb = b.data().data() + (static_cast<size_t>(n) * C + c) * H * W;
      for (int y = 0; y + 11 <= H; ++y) {
        for (int x = 0; x + 11 <= W; ++x) {
          double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
          for (int dy = 0; dy < 11; ++dy) {
            for (int dx = 0; dx < 11; ++dx) {
              const double w = g[dy] * g[dx];
              const double va = pa[(y + dy) * W + x + dx];
              const double vb = pb[(y + dy) * W + x + dx];
              ma += w * va;
              mb += w * vb;
              saa += w * va * va;
              sbb += w * vb * vb;
              sab += w * va * vb;
            }
          }
          saa -= ma * ma;
          sbb -= mb * mb;
          sab -= ma * mb;
          total += ((2 * ma * mb + c1) * (2 * sab + c2)) /
                   ((ma * ma + mb * mb + c1) * (saa + sbb + c2));
          ++count;
        }
      }
    }
  }
  return total / count;
}

Image tensor_to_plain_image(const Tensor<double>& t) {
  Image img = Image::create(t.dim(3), t.dim(2));
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(t.data()[i]);
  return img;
}

}  // namespace

TEST_CASE("loss_forward is zero on identical inputs and one for unit offset") {
  Rng rng(81);
  auto gt = testutil::random_tensor({2, 3, 4, 4}, rng, 0.0, 1.0);
  CHECK(loss_forward(gt, gt).item() == 0.0);

  auto pred = add_scalar(gt, 1.0);
  CHECK(loss_forward(pred, gt).item() == doctest::Approx(1.0).epsilon(1e-9));

  auto bad = Tensor<double>::zeros({2, 3, 4, 5});
  CHECK_THROWS_AS(loss_forward(bad, gt), ShapeError);
}

TEST_CASE("loss_forward is invariant under batch duplication") {
  Rng rng(82);
  auto pred1 = testutil::random_tensor({1, 3, 4, 4}, rng, 0.0, 1.0);
  auto gt1 = testutil::random_tensor({1, 3, 4, 4}, rng, 0.0, 1.0);
  std::vector<double> pred2_data = pred1.data();
  pred2_data.insert(pred2_data.end(), pred1.data().begin(), pred1.data().end());
  std::vector<double> gt2_data = gt1.data();
  gt2_data.insert(gt2_data.end(), gt1.data().begin(), gt1.data().end());
  auto pred2 = Tensor<double>::from_data({2, 3, 4, 4}, pred2_data);
  auto gt2 = Tensor<double>::from_data({2, 3, 4, 4}, gt2_data);
  CHECK(loss_forward(pred2, gt2).item() ==
        doctest::Approx(loss_forward(pred1, gt1).item()).epsilon(1e-12));
}

TEST_CASE("loss_reg values") {
  CHECK(loss_reg(Tensor<double>::zeros({2, 9, 3, 3})).item() == 0.0);
  CHECK(loss_reg(Tensor<double>::full({5, 4}, 1.0)).item() == doctest::Approx(0.5));
}

TEST_CASE("loss_reg sits at 0.5 in expectation for a standard normal") {
  Rng rng(83);
  auto z = Tensor<double>::zeros({1000000});
  for (auto& v : z.data()) v = rng.normal();
  CHECK(loss_reg(z).item() == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("reconstruction losses are L1 means with channel symmetry") {
  Rng rng(84);
  auto gt = testutil::random_tensor({1, 3, 4, 4}, rng, 0.0, 0.8);
  CHECK(loss_back_grainy(gt, gt).item() == 0.0);
  CHECK(loss_back_clean(gt, gt).item() == 0.0);

  auto off = add_scalar(gt, 0.1);
  CHECK(loss_back_grainy(off, gt).item() == doctest::Approx(0.1).epsilon(1e-9));

  // permuting channels of both arguments together leaves the value unchanged
  auto parts_a = split(off, {1, 1, 1});
  auto parts_b = split(gt, {1, 1, 1});
  auto perm_a = concat<double>({parts_a[2], parts_a[0], parts_a[1]});
  auto perm_b = concat<double>({parts_b[2], parts_b[0], parts_b[1]});
  CHECK(loss_back_grainy(perm_a, perm_b).item() ==
        doctest::Approx(loss_back_grainy(off, gt).item()).epsilon(1e-12));
}

TEST_CASE("power of black and white images") {
  PowerModelConfig lum;
  lum.model = PowerModel::Luminance;
  PowerModelConfig rgbw;
  rgbw.model = PowerModel::Rgbw;

  Image black = Image::create(4, 4, 0.0f);
  Image white = Image::create(4, 4, 1.0f);
  CHECK(power(black, lum) == doctest::Approx(0.0));
  CHECK(power(black, rgbw) == doctest::Approx(0.0));
  CHECK(power(white, lum) == doctest::Approx(1.0));
  CHECK(power(white, rgbw) == doctest::Approx(1.0));  // all drive through W
}

TEST_CASE("power of pure red follows the model formulas") {
  Image red = Image::create(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) red.at(0, y, x) = 1.0f;
  }
  PowerModelConfig lum;
  lum.model = PowerModel::Luminance;
  CHECK(power(red, lum) == doctest::Approx(0.2126));
  PowerModelConfig rgbw;
  rgbw.model = PowerModel::Rgbw;
  CHECK(power(red, rgbw) == doctest::Approx(rgbw.k_r));
  rgbw.k_r = 0.4;
  rgbw.k_g = 0.3;
  rgbw.k_b = 0.2;
  rgbw.k_w = 0.1;
  CHECK(power(red, rgbw) == doctest::Approx(0.4));
}

TEST_CASE("power rejects out-of-range values") {
  auto t = Tensor<double>::full({1, 3, 2, 2}, 1.5);
  PowerModelConfig cfg;
  CHECK_THROWS_AS(power_of(t, cfg), NumericError);
}

TEST_CASE("loss_power fixed points") {
  Rng rng(85);
  auto img = testutil::random_tensor({1, 3, 4, 4}, rng, 0.1, 0.9);
  PowerModelConfig cfg;
  CHECK(loss_power(img, img, 0.0, cfg).item() == doctest::Approx(0.0));
  CHECK(loss_power(img, img, 1.0, cfg).item() ==
        doctest::Approx(power_of(img, cfg).item()).epsilon(1e-12));
}

TEST_CASE("linear-domain luminance scaling is the exact minimizer of loss_power") {
  Rng rng(86);
  auto ref = testutil::random_tensor({1, 3, 6, 6}, rng, 0.05, 0.95);
  const double R = 0.4;
  PowerModelConfig lum;
  lum.model = PowerModel::Luminance;
  // scale the linearized channels by (1-R), then re-gamma
  auto pred = ref.clone();
  for (auto& v : pred.data()) {
    v = std::pow(std::pow(v, lum.gamma) * (1.0 - R), 1.0 / lum.gamma);
  }
  CHECK(loss_power(pred, ref, R, lum).item() <= 1e-6);
}

TEST_CASE("ssim of an image with itself is one") {
  Rng rng(87);
  auto a = testutil::random_tensor({1, 3, 12, 12}, rng, 0.0, 1.0);
  CHECK(ssim_tensor(a, a).item() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(loss_ssim(a, a).item() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("ssim of a half-black/half-white image against its negative is negative") {
  auto x = Tensor<double>::zeros({1, 3, 16, 16});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 16; ++y) {
      for (int xx = 8; xx < 16; ++xx) x.data()[(c * 16 + y) * 16 + xx] = 1.0;
    }
  }
  auto inv = add_scalar(mul_scalar(x, -1.0), 1.0);
  CHECK(ssim_tensor(x, inv).item() < 0.0);
}

TEST_CASE("ssim matches the windowed-statistics oracle") {
  Rng rng(88);
  auto a = testutil::random_tensor({1, 3, 16, 16}, rng, 0.0, 0.9);
  auto b = add_scalar(a, 0.1);
  CHECK(ssim_tensor(a, b).item() == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-6));

  auto c = testutil::random_tensor({2, 3, 13, 14}, rng, 0.0, 1.0);
  auto d = testutil::random_tensor({2, 3, 13, 14}, rng, 0.0, 1.0);
  CHECK(ssim_tensor(c, d).item() == doctest::Approx(ssim_oracle(c, d)).epsilon(1e-6));

  // image-level wrapper agrees
  Image ia = tensor_to_plain_image(split(a, {3})[0]);
  Image ib = tensor_to_plain_image(split(b, {3})[0]);
  CHECK(ssim(ia, ib) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-5));
}

TEST_CASE("ssim rejects images smaller than the window") {
  auto a = Tensor<double>::zeros({1, 3, 10, 12});
  CHECK_THROWS_AS(ssim_tensor(a, a), ShapeError);
}

TEST_CASE("total losses combine with the configured weights") {
  LossWeights w;  // defaults (40, 1, 1, 1, 1e10, 1e4)
  LossParts<double> parts;
  parts.forward = Tensor<double>::full({1}, 1.0);
  parts.reg = Tensor<double>::full({1}, 1.0);
  parts.back_clean = Tensor<double>::full({1}, 1.0);
  parts.back_grainy = Tensor<double>::full({1}, 1.0);
  CHECK(total_loss_stage1(parts, w).item() == doctest::Approx(43.0));

  parts.power = Tensor<double>::full({1}, 0.25);
  parts.ssim = Tensor<double>::full({1}, 0.5);
  LossWeights w2 = w;
  w2.lambda5 = 0.0;
  w2.lambda6 = 0.0;
  CHECK(total_loss_stage2(parts, w2).item() == doctest::Approx(43.0));
  CHECK(total_loss_stage2(parts, w).item() ==
        doctest::Approx(43.0 + 1e10 * 0.25 + 1e4 * 0.5));
}

TEST_CASE("a non-finite part names the offending term") {
  LossWeights w;
  LossParts<double> parts;
  parts.forward = Tensor<double>::full({1}, 1.0);
  parts.reg = Tensor<double>::full({1}, 1.0);
  parts.back_clean = Tensor<double>::full({1}, 1.0);
  parts.back_grainy = Tensor<double>::full({1}, 1.0);
  parts.power = Tensor<double>::full({1}, std::nan(""));
  parts.ssim = Tensor<double>::full({1}, 0.0);
  CHECK_THROWS_WITH_AS(total_loss_stage2(parts, w), doctest::Contains("loss_power non-finite"),
                       NumericError);
}

TEST_CASE("losses are differentiable") {
  Rng rng(89);
  auto pred = testutil::random_tensor({1, 3, 12, 12}, rng, 0.1, 0.9);
  auto gt = testutil::random_tensor({1, 3, 12, 12}, rng, 0.1, 0.9);
  PowerModelConfig rgbw;

  testutil::require_grads_match({pred}, [&] { return loss_forward(pred, gt); }, 1e-5);
  testutil::require_grads_match({pred}, [&] { return loss_reg(pred); }, 1e-5);
  testutil::require_grads_match({pred}, [&] { return loss_back_grainy(pred, gt); }, 1e-5);
  testutil::require_grads_match({pred}, [&] { return loss_power(pred, gt, 0.3, rgbw); }, 1e-5);
  testutil::require_grads_match({pred}, [&] { return loss_ssim(pred, gt); }, 1e-5);
}
