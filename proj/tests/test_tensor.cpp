#include <doctest.h>

#include <cmath>

#include "finite_diff.hpp"
#include "threer/rng.hpp"
#include "threer/tensor.hpp"

using namespace threer;

namespace {

// Brute-force cross-correlation oracle, padding 1.
std::vector<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w,
                                const Tensor<double>& b) {
  const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0);
  std::vector<double> out(static_cast<size_t>(B) * Cout * H * W);
  for (int n = 0; n < B; ++n) {
    for (int co = 0; co < Cout; ++co) {
      for (int y = 0; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) {
          double acc = b.data()[co];
          for (int ci = 0; ci < Cin; ++ci) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int sy = y + ky - 1, sx = xx + kx - 1;
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                acc += w.data()[((static_cast<size_t>(co) * Cin + ci) * 3 + ky) * 3 + kx] *
                       x.data()[((static_cast<size_t>(n) * Cin + ci) * H + sy) * W + sx];
              }
            }
          }
          out[((static_cast<size_t>(n) * Cout + co) * H + y) * W + xx] = acc;
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("conv2d identity kernel reproduces the input") {
  Rng rng(7);
  auto x = testutil::random_tensor_f({2, 3, 5, 4}, rng);
  auto w = Tensor<float>::zeros({3, 3, 3, 3});
  for (int c = 0; c < 3; ++c) w.data()[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0f;
  auto b = Tensor<float>::zeros({3});
  auto y = conv2d(x, w, b);
  REQUIRE(y.shape() == x.shape());
  for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d all-ones kernel on all-ones 3x3 input") {
  auto x = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  auto w = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  auto b = Tensor<double>::zeros({1});
  auto y = conv2d(x, w, b);
  CHECK(y.data()[4] == doctest::Approx(9.0));  // center
  CHECK(y.data()[0] == doctest::Approx(4.0));  // corner
  CHECK(y.data()[2] == doctest::Approx(4.0));
  CHECK(y.data()[6] == doctest::Approx(4.0));
  CHECK(y.data()[8] == doctest::Approx(4.0));
  CHECK(y.data()[1] == doctest::Approx(6.0));  // edge

  const auto oracle = conv_oracle(x, w, b);
  for (size_t i = 0; i < oracle.size(); ++i) CHECK(y.data()[i] == doctest::Approx(oracle[i]));
}

TEST_CASE("conv2d matches the brute-force oracle on random input") {
  Rng rng(21);
  auto x = testutil::random_tensor({2, 4, 6, 5}, rng);
  auto w = testutil::random_tensor({3, 4, 3, 3}, rng);
  auto b = testutil::random_tensor({3}, rng);
  auto y = conv2d(x, w, b);
  const auto oracle = conv_oracle(x, w, b);
  for (size_t i = 0; i < oracle.size(); ++i) {
    CHECK(y.data()[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d input-channel mismatch names both shapes") {
  auto x = Tensor<float>::zeros({1, 5, 4, 4});
  auto w = Tensor<float>::zeros({2, 4, 3, 3});
  auto b = Tensor<float>::zeros({2});
  try {
    conv2d(x, w, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[1,5,4,4]") != std::string::npos);
    CHECK(msg.find("[2,4,3,3]") != std::string::npos);
  }
}

TEST_CASE("conv2d weight gradient matches finite differences") {
  Rng rng(3);
  auto x = testutil::random_tensor({1, 2, 4, 4}, rng);
  auto w = testutil::random_tensor({2, 2, 3, 3}, rng);
  auto b = testutil::random_tensor({2}, rng);
  testutil::require_grads_match({w}, [&] { return sum(conv2d(x, w, b)); }, 1e-6);
}

TEST_CASE("conv2d input and bias gradients match finite differences") {
  Rng rng(4);
  auto x = testutil::random_tensor({2, 2, 3, 5}, rng);
  auto w = testutil::random_tensor({3, 2, 3, 3}, rng);
  auto b = testutil::random_tensor({3}, rng);
  testutil::require_grads_match({x, b}, [&] { return mean(square(conv2d(x, w, b))); }, 1e-5);
}

TEST_CASE("leaky_relu values and gradient") {
  auto x = Tensor<float>::from_data({3}, {1.0f, -1.0f, 0.0f});
  auto y = leaky_relu(x, 0.2f);
  CHECK(y.data()[0] == 1.0f);
  CHECK(y.data()[1] == -0.2f);
  CHECK(y.data()[2] == 0.0f);

  auto xd = Tensor<double>::from_data({1}, {-3.0});
  testutil::require_grads_match({xd}, [&] { return sum(leaky_relu(xd, 0.2)); }, 1e-6);
  {
    Tape<double> tape;
    xd.set_requires_grad(true);
    auto loss = sum(leaky_relu(xd, 0.2));
    tape.backward(loss);
    CHECK(xd.grad()[0] == doctest::Approx(0.2));
  }
}

TEST_CASE("split then concat is the identity") {
  Rng rng(11);
  auto t = testutil::random_tensor_f({2, 12, 3, 4}, rng);
  auto parts = split(t, {3, 9});
  auto back = concat(parts);
  REQUIRE(back.shape() == t.shape());
  for (size_t i = 0; i < t.data().size(); ++i) CHECK(back.data()[i] == t.data()[i]);
}

TEST_CASE("exp of zeros is ones") {
  auto t = Tensor<float>::zeros({2, 3});
  auto y = exp(t);
  for (float v : y.data()) CHECK(v == 1.0f);
}

TEST_CASE("mean of squares has the hand-computed gradient") {
  // d/dx mean(x^2) = 2x/n; at x = 2 with n elements that is 4/n.
  const int n = 6;
  auto x = Tensor<double>::full({n}, 2.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  auto loss = mean(square(x));
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == doctest::Approx(4.0 / n));
}

TEST_CASE("backward of sum gives all-ones gradient") {
  Rng rng(5);
  auto x = testutil::random_tensor({2, 3, 2, 2}, rng);
  x.set_requires_grad(true);
  Tape<double> tape;
  auto loss = sum(x);
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of sum(x*y) gives the partner factor") {
  Rng rng(6);
  auto x = testutil::random_tensor({8}, rng);
  auto y = testutil::random_tensor({8}, rng);
  x.set_requires_grad(true);
  Tape<double> tape;
  auto loss = sum(mul(x, y));
  tape.backward(loss);
  for (size_t i = 0; i < 8; ++i) CHECK(x.grad()[i] == doctest::Approx(y.data()[i]));
}

TEST_CASE("three-layer dense stack gradients match finite differences") {
  Rng rng(9);
  auto x = testutil::random_tensor({1, 2, 4, 4}, rng);
  auto w1 = testutil::random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
  auto b1 = testutil::random_tensor({3}, rng, -0.1, 0.1);
  auto w2 = testutil::random_tensor({3, 5, 3, 3}, rng, -0.5, 0.5);
  auto b2 = testutil::random_tensor({3}, rng, -0.1, 0.1);
  auto w3 = testutil::random_tensor({2, 8, 3, 3}, rng, -0.5, 0.5);
  auto b3 = testutil::random_tensor({2}, rng, -0.1, 0.1);
  auto loss_fn = [&] {
    auto h1 = leaky_relu(conv2d(x, w1, b1), 0.2);
    auto h2 = leaky_relu(conv2d(concat<double>({x, h1}), w2, b2), 0.2);
    auto h3 = conv2d(concat<double>({x, h1, h2}), w3, b3);
    return mean(square(h3));
  };
  testutil::require_grads_match({w1, b1, w2, b2, w3, b3}, loss_fn, 1e-5);
}

TEST_CASE("every differentiable op matches finite differences") {
  Rng rng(13);
  auto x = testutil::random_tensor({2, 2, 3, 3}, rng, 0.2, 0.9);
  auto y = testutil::random_tensor({2, 2, 3, 3}, rng, 0.2, 0.9);

  auto check2 = [&](auto&& fn) { testutil::require_grads_match({x, y}, fn, 1e-5); };
  auto check1 = [&](auto&& fn) { testutil::require_grads_match({x}, fn, 1e-5); };
  check2([&] { return sum(add(x, y)); });
  check2([&] { return sum(sub(x, y)); });
  check2([&] { return mean(mul(x, y)); });
  check2([&] { return mean(div(x, y)); });
  check1([&] { return mean(exp(x)); });
  check2([&] { return mean(log(add(x, y))); });
  check2([&] { return mean(abs(sub(x, y))); });
  check1([&] { return mean(square(x)); });
  check1([&] { return mean(sqrt(x)); });
  check1([&] { return mean(tanh(x)); });
  check2([&] { return mean(minimum(x, y)); });
  check1([&] { return mean(add_scalar(mul_scalar(x, 3.0), -0.5)); });
  check1([&] { return mean(pow_scalar(x, 2.2)); });
  check2([&] { return sum(per_sample_mean(mul(x, y))); });
  check2([&] { return mean(concat<double>({x, y})); });
  check2([&] { return mean(split(concat<double>({x, y}), {1, 3})[1]); });
  std::vector<double> kernel(9, 1.0 / 9.0);
  check2([&] { return mean(window_filter(mul(x, y), kernel, 3)); });
  // clamp: keep inputs away from the kink so finite differences are valid
  check1([&] { return mean(clamp(x, 0.05, 0.95)); });
}

TEST_CASE("clamp outside its active range is the exact identity") {
  Rng rng(17);
  auto x = testutil::random_tensor_f({40}, rng, -0.9f, 0.9f);
  auto y = clamp(x, -1.0f, 1.0f);
  for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("div rejects zeros in the denominator") {
  auto a = Tensor<float>::full({3}, 1.0f);
  auto b = Tensor<float>::from_data({3}, {1.0f, 0.0f, 2.0f});
  CHECK_THROWS_AS(div(a, b), NumericError);
}

TEST_CASE("backward requires a scalar loss and a fresh tape") {
  auto x = Tensor<float>::full({3}, 2.0f);
  x.set_requires_grad(true);
  Tape<float> tape;
  auto y = mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
  auto loss = sum(y);
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(4.0f));
  // tape is spent after backward
  CHECK_THROWS_AS(tape.backward(loss), NumericError);

  Tape<float> empty_tape;
  auto z = Tensor<float>::full({1}, 1.0f);
  CHECK_THROWS_AS(empty_tape.backward(z), NumericError);
}

TEST_CASE("grad accumulates when a tensor is used twice") {
  auto x = Tensor<double>::full({2}, 3.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  auto loss = sum(add(mul(x, x), x));  // d/dx (x^2 + x) = 2x + 1
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == doctest::Approx(7.0));
}

TEST_CASE("detach blocks gradient flow") {
  auto x = Tensor<double>::full({2}, 3.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  auto loss = sum(mul(x, x.detach()));
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == doctest::Approx(3.0));  // only the live factor
}

TEST_CASE("forward results are bit-identical across runs") {
  Rng rng(23);
  auto x = testutil::random_tensor_f({2, 3, 8, 8}, rng);
  auto w = testutil::random_tensor_f({4, 3, 3, 3}, rng);
  auto b = testutil::random_tensor_f({4}, rng);
  auto y1 = conv2d(x, w, b);
  auto y2 = conv2d(x, w, b);
  for (size_t i = 0; i < y1.data().size(); ++i) CHECK(y1.data()[i] == y2.data()[i]);
}
