#include <doctest.h>

#include <cmath>

#include "finite_diff.hpp"
#include "threer/haar.hpp"

using namespace threer;

namespace {

double l2_norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("constant image maps to a 2c low band and zero details") {
  const float c = 0.37f;
  auto img = Tensor<float>::full({1, 3, 4, 6}, c);
  auto sb = haar_forward(img);
  for (float v : sb.low.data()) CHECK(v == doctest::Approx(2 * c).epsilon(1e-7));
  for (float v : sb.high.data()) CHECK(v == 0.0f);
}

TEST_CASE("single 2x2 block matches the 4x4 orthonormal matrix oracle") {
  // Oracle: rows of the orthonormal analysis matrix applied to (a,b,c,d).
  const double m[4][4] = {
      {0.5, 0.5, 0.5, 0.5}, {0.5, -0.5, 0.5, -0.5}, {0.5, 0.5, -0.5, -0.5}, {0.5, -0.5, -0.5, 0.5}};
  const double px[4] = {1.0, 0.0, 0.0, 0.0};
  double expected[4];
  for (int r = 0; r < 4; ++r) {
    expected[r] = 0.0;
    for (int k = 0; k < 4; ++k) expected[r] += m[r][k] * px[k];
  }

  auto img = Tensor<float>::zeros({1, 3, 2, 2});
  img.data()[0] = 1.0f;  // channel 0: a=1, b=c=d=0
  auto sb = haar_forward(img);
  CHECK(sb.low.data()[0] == doctest::Approx(expected[0]));
  CHECK(sb.high.data()[0] == doctest::Approx(expected[1]));  // horizontal
  CHECK(sb.high.data()[1] == doctest::Approx(expected[2]));  // vertical
  CHECK(sb.high.data()[2] == doctest::Approx(expected[3]));  // diagonal
  for (int r = 0; r < 4; ++r) CHECK(expected[r] == doctest::Approx(0.5));
}

TEST_CASE("channel layout groups three details per input channel") {
  auto img = Tensor<float>::zeros({1, 3, 2, 2});
  // only the green channel carries signal
  img.data()[4] = 1.0f;  // G, a=1
  auto sb = haar_forward(img);
  CHECK(sb.low.data()[0] == 0.0f);
  CHECK(sb.low.data()[1] == doctest::Approx(0.5));
  CHECK(sb.low.data()[2] == 0.0f);
  for (int ch = 0; ch < 9; ++ch) {
    const bool green_detail = ch >= 3 && ch < 6;
    CHECK(sb.high.data()[ch] == (green_detail ? 0.5f : 0.0f));
  }
}

TEST_CASE("energy is preserved") {
  Rng rng(31);
  auto img = testutil::random_tensor_f({2, 3, 8, 6}, rng);
  auto sb = haar_forward(img);
  std::vector<float> both = sb.low.data();
  both.insert(both.end(), sb.high.data().begin(), sb.high.data().end());
  CHECK(l2_norm(both) == doctest::Approx(l2_norm(img.data())).epsilon(1e-6));
}

TEST_CASE("round trips are exact to tolerance in both directions") {
  Rng rng(32);
  auto img = testutil::random_tensor_f({2, 3, 8, 10}, rng);
  auto sb = haar_forward(img);
  auto back = haar_inverse(sb);
  for (size_t i = 0; i < img.data().size(); ++i) {
    CHECK(std::abs(back.data()[i] - img.data()[i]) <= 1e-6f);
  }

  auto low = testutil::random_tensor_f({2, 3, 4, 5}, rng);
  auto high = testutil::random_tensor_f({2, 9, 4, 5}, rng);
  auto rec = haar_forward(haar_inverse(low, high));
  for (size_t i = 0; i < low.data().size(); ++i) {
    CHECK(std::abs(rec.low.data()[i] - low.data()[i]) <= 1e-6f);
  }
  for (size_t i = 0; i < high.data().size(); ++i) {
    CHECK(std::abs(rec.high.data()[i] - high.data()[i]) <= 1e-6f);
  }
}

TEST_CASE("double-precision round trip is exact to 1e-12") {
  Rng rng(33);
  auto img = testutil::random_tensor({1, 3, 6, 8}, rng);
  auto back = haar_inverse(haar_forward(img));
  for (size_t i = 0; i < img.data().size(); ++i) {
    CHECK(std::abs(back.data()[i] - img.data()[i]) <= 1e-12);
  }
}

TEST_CASE("transform is linear") {
  Rng rng(34);
  auto x = testutil::random_tensor_f({1, 3, 4, 4}, rng);
  auto y = testutil::random_tensor_f({1, 3, 4, 4}, rng);
  const float a = 1.7f, b = -0.6f;
  auto mix = add(mul_scalar(x, a), mul_scalar(y, b));
  auto sb_mix = haar_forward(mix);
  auto sx = haar_forward(x);
  auto sy = haar_forward(y);
  for (size_t i = 0; i < sb_mix.low.data().size(); ++i) {
    CHECK(sb_mix.low.data()[i] ==
          doctest::Approx(a * sx.low.data()[i] + b * sy.low.data()[i]).epsilon(1e-5));
  }
  for (size_t i = 0; i < sb_mix.high.data().size(); ++i) {
    CHECK(sb_mix.high.data()[i] ==
          doctest::Approx(a * sx.high.data()[i] + b * sy.high.data()[i]).epsilon(1e-5));
  }
}

TEST_CASE("odd dimensions and channel mismatches are rejected") {
  CHECK_THROWS_AS(haar_forward(Tensor<float>::zeros({1, 3, 5, 4})), ShapeError);
  CHECK_THROWS_AS(haar_forward(Tensor<float>::zeros({1, 3, 4, 7})), ShapeError);
  auto low = Tensor<float>::zeros({1, 3, 2, 2});
  auto high = Tensor<float>::zeros({1, 8, 2, 2});
  CHECK_THROWS_AS(haar_inverse(low, high), ShapeError);
}

TEST_CASE("gradients flow through both directions") {
  Rng rng(35);
  auto img = testutil::random_tensor({1, 3, 4, 4}, rng);
  testutil::require_grads_match({img}, [&] {
    auto sb = haar_forward(img);
    return add(mean(square(sb.low)), mean(square(sb.high)));
  }, 1e-6);

  auto low = testutil::random_tensor({1, 3, 2, 2}, rng);
  auto high = testutil::random_tensor({1, 9, 2, 2}, rng);
  testutil::require_grads_match({low, high}, [&] {
    return mean(square(haar_inverse(low, high)));
  }, 1e-6);
}
