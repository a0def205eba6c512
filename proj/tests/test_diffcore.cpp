// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "coordtok/diffcore/grad_check.hpp"
#include "coordtok/diffcore/ops.hpp"
#include "coordtok/diffcore/tensor.hpp"
#include "coordtok/error.hpp"
#include "coordtok/rng.hpp"

using namespace coordtok;
using namespace coordtok::diff;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return Tensor<double>::from(std::move(shape), std::move(v));
}

// Fixed random weighting so every output element influences the scalar loss.
Tensor<double> weighted_sum(const Tensor<double>& y, std::uint64_t seed) {
  Rng rng(seed + 1000);
  auto w = random_tensor(y.shape(), rng);
  return sum(mul(y, w));
}

}  // namespace

TEST_CASE("matmul examples") {
  auto eye = Tensor<float>::from({2, 2}, {1, 0, 0, 1});
  auto m = Tensor<float>::from({2, 2}, {1, 2, 3, 4});
  auto r = matmul(eye, m);
  CHECK(std::vector<float>(r.data().begin(), r.data().end()) == std::vector<float>{1, 2, 3, 4});

  auto row = Tensor<float>::from({1, 2}, {1, 2});
  auto col = Tensor<float>::from({2, 1}, {3, 4});
  CHECK(matmul(row, col).item() == 11.0f);

  auto zero = Tensor<float>::zeros({3, 2});
  auto zm = matmul(zero, m);
  for (float v : zm.data()) CHECK(v == 0.0f);
}

TEST_CASE("matmul shape errors name both operands") {
  auto a = Tensor<float>::zeros({2, 3});
  auto b = Tensor<float>::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(Tensor<float>::zeros({2, 2, 3}), Tensor<float>::zeros({3, 3, 4})), ShapeError);
}

TEST_CASE("matmul broadcasts batch axes") {
  Rng rng(3);
  auto a = random_tensor({2, 3, 4}, rng);
  auto b = random_tensor({1, 4, 5}, rng);
  auto c = matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 3, 5});
  for (std::size_t bi = 0; bi < 2; ++bi)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        double acc = 0;
        for (std::size_t k = 0; k < 4; ++k) acc += a.data()[(bi * 3 + i) * 4 + k] * b.data()[k * 5 + j];
        CHECK(c.data()[(bi * 3 + i) * 5 + j] == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("softmax examples") {
  auto a = softmax(Tensor<double>::from({2}, {0, 0}), 0);
  CHECK(a.data()[0] == doctest::Approx(0.5));
  auto b = softmax(Tensor<float>::from({2}, {1000, 1000}), 0);
  CHECK(b.data()[0] == doctest::Approx(0.5));
  CHECK(std::isfinite(b.data()[1]));
  auto c = softmax(Tensor<double>::from({2}, {0, std::log(3.0)}), -1);
  CHECK(c.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(c.data()[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK_THROWS_AS(softmax(Tensor<double>::zeros({2, 2}), 2), ShapeError);
}

TEST_CASE("softmax rows sum to one for arbitrary finite input") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor({3, 7, 5}, rng, 50.0);
    for (int axis : {0, 1, 2}) {
      auto y = softmax(x, axis);
      const Shape& s = y.shape();
      const std::size_t ax = static_cast<std::size_t>(axis);
      std::size_t outer = 1, inner = 1;
      for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
      for (std::size_t i = ax + 1; i < 3; ++i) inner *= s[i];
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
          double total = 0;
          for (std::size_t l = 0; l < s[ax]; ++l) {
            const double v = y.data()[(o * s[ax] + l) * inner + in];
            CHECK(v >= 0.0);
            total += v;
          }
          CHECK(std::abs(total - 1.0) <= 1e-6);
        }
    }
  }
}

TEST_CASE("layer_norm examples") {
  auto ones = Tensor<double>::full({4}, 1.0);
  auto zeros = Tensor<double>::zeros({4});
  auto flat = layer_norm(Tensor<double>::full({4}, 3.5), ones, zeros);
  for (double v : flat.data()) CHECK(v == 0.0);

  auto g2 = Tensor<double>::full({2}, 1.0);
  auto b2 = Tensor<double>::zeros({2});
  auto y = layer_norm(Tensor<double>::from({2}, {1, 3}), g2, b2);
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);  // mean 2, variance 1
  CHECK(y.data()[0] == doctest::Approx(-expected).epsilon(1e-12));
  CHECK(y.data()[1] == doctest::Approx(expected).epsilon(1e-12));

  Rng rng(5);
  auto x = random_tensor({3, 6}, rng);
  auto bias = random_tensor({6}, rng);
  auto out = layer_norm(x, Tensor<double>::zeros({6}), bias);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 6; ++j) CHECK(out.data()[r * 6 + j] == bias.data()[j]);

  CHECK_THROWS_AS(layer_norm(x, Tensor<double>::zeros({5}), bias), ShapeError);
}

TEST_CASE("layer_norm normalizes each row") {
  Rng rng(8);
  auto x = random_tensor({10, 16}, rng, 5.0);
  auto y = layer_norm(x, Tensor<double>::full({16}, 1.0), Tensor<double>::zeros({16}));
  for (std::size_t r = 0; r < 10; ++r) {
    double mu = 0, var = 0;
    for (std::size_t j = 0; j < 16; ++j) mu += y.data()[r * 16 + j];
    mu /= 16;
    for (std::size_t j = 0; j < 16; ++j) var += std::pow(y.data()[r * 16 + j] - mu, 2);
    var /= 16;
    CHECK(std::abs(mu) <= 1e-5);
    CHECK(std::abs(var - 1.0) <= 1e-3);  // eps pulls variance slightly below one
  }
}

TEST_CASE("gelu examples") {
  CHECK(gelu(Tensor<double>::scalar(0.0)).item() == 0.0);
  CHECK(gelu(Tensor<double>::scalar(20.0)).item() == doctest::Approx(20.0).epsilon(1e-12));
  // Independent scalar evaluation of 0.5 x (1 + tanh(sqrt(2/pi)(x + 0.044715 x^3))) at x = 1.
  const long double c = std::sqrt(2.0L / std::numbers::pi_v<long double>);
  const long double expected = 0.5L * (1.0L + std::tanh(c * (1.0L + 0.044715L)));
  CHECK(gelu(Tensor<double>::scalar(1.0)).item() == doctest::Approx(static_cast<double>(expected)).epsilon(1e-14));
}

TEST_CASE("bilinear_sample examples") {
  Rng rng(2);
  auto plane = random_tensor({3, 4, 5}, rng);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 4; ++b) {
      auto v = bilinear_sample(plane, static_cast<double>(a), static_cast<double>(b));
      for (std::size_t d = 0; d < 5; ++d) CHECK(v.data()[d] == plane.data()[(a * 4 + b) * 5 + d]);
    }

  auto constant = Tensor<double>::full({4, 4, 3}, 0.7);
  for (double u : {0.0, 0.3, 1.9, 3.0}) {
    auto sampled = bilinear_sample(constant, u, 2.2);
    for (double v : sampled.data()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
  }

  auto quad = Tensor<double>::from({2, 2, 1}, {1, 2, 3, 10});
  CHECK(bilinear_sample(quad, 0.5, 0.5).item() == doctest::Approx(4.0));

  CHECK_THROWS_AS(bilinear_sample(quad, std::nan(""), 0.0), InputError);
  CHECK_THROWS_AS(bilinear_sample(quad, 1.5, 0.0), InputError);
}

TEST_CASE("bilinear_sample on single-node axes is a constant lookup") {
  auto line = Tensor<double>::from({3, 1, 2}, {1, 2, 3, 4, 5, 6});
  auto v = bilinear_sample(line, 1.5, 0.0);
  CHECK(v.data()[0] == doctest::Approx(4.0));
  CHECK(v.data()[1] == doctest::Approx(5.0));
}

TEST_CASE("locate_axis_cell clamps the upper edge") {
  auto cell = locate_axis_cell(15.0, 16);
  CHECK(cell.lower == 14);
  CHECK(cell.weight == 1.0);
  cell = locate_axis_cell(0.0, 16);
  CHECK(cell.lower == 0);
  CHECK(cell.weight == 0.0);
  cell = locate_axis_cell(0.7, 1);
  CHECK(cell.lower == 0);
  CHECK(cell.weight == 0.0);
}

TEST_CASE("backward examples") {
  auto x = Tensor<double>::scalar(3.0, true);
  backward(square(x));
  // Central-difference oracle for d(x^2)/dx at 3.
  const double h = 1e-5;
  const double numeric = ((3.0 + h) * (3.0 + h) - (3.0 - h) * (3.0 - h)) / (2 * h);
  CHECK(x.grad()[0] == doctest::Approx(numeric).epsilon(1e-9));
  CHECK(x.grad()[0] == doctest::Approx(6.0));

  auto v = Tensor<double>::from({4}, {1, -2, 3, 0.5}, true);
  backward(sum(v));
  for (double g : v.grad()) CHECK(g == 1.0);

  auto c = Tensor<double>::scalar(2.0);
  auto leaf = Tensor<double>::from({3}, {1, 2, 3}, true);
  backward(add(scale(sum(leaf), 0.0), c));
  for (double g : leaf.grad()) CHECK(g == 0.0);

  CHECK_THROWS_AS(backward(v), ShapeError);
}

TEST_CASE("backward accumulates across calls and reaches unused leaves") {
  auto x = Tensor<double>::from({2}, {1, 2}, true);
  auto unused = Tensor<double>::from({3}, {1, 2, 3}, true);
  auto y = sum(add(square(x), mul(scale(x, 0.0), x)));
  auto loss = add(y, scale(sum(narrow(concat<double>({unused, unused}, 0), 0, 0, 1)), 0.0));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  REQUIRE(unused.has_grad());
  for (double g : unused.grad()) CHECK(g == 0.0);
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(4.0));
  CHECK(x.grad()[1] == doctest::Approx(8.0));
}

TEST_CASE("no-grad mode records no graph") {
  auto x = Tensor<double>::from({2}, {1, 2}, true);
  NoGradGuard guard;
  auto y = square(x);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("grad_check trivial cases") {
  Rng rng(1);
  auto x = random_tensor({5}, rng);
  auto w = random_tensor({5}, rng);
  CHECK(grad_check([&](const Tensor<double>& t) { return sum(mul(t, w)); }, x) <= 1e-9);
  auto other = random_tensor({3}, rng);
  CHECK(grad_check([&](const Tensor<double>&) { return sum(square(other)); }, x) <= 1e-9);
}

TEST_CASE("every primitive passes grad_check over five seeds") {
  GradCheckOptions opts;
  opts.h = 1e-5;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    auto bias = random_tensor({4}, rng);
    auto gain = random_tensor({4}, rng);
    auto plane = random_tensor({3, 4, 2}, rng);
    auto frames = random_tensor({2, 5, 4, 3}, rng);
    const std::vector<double> us = {0.3, 2.0, 1.7};
    const std::vector<double> ws = {0.1, 3.0, 2.5};

    CAPTURE(seed);
    CHECK(grad_check([&] { return weighted_sum(add(a, bias), seed); }, {a, bias}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(sub(a, bias), seed); }, {a, bias}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(mul(a, gain), seed); }, {a, gain}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(matmul(a, b), seed); }, {a, b}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(softmax(a, 0), seed); }, {a}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(softmax(a, 1), seed); }, {a}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(layer_norm(a, gain, bias), seed); }, {a, gain, bias}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(gelu(scale(a, 3.0)), seed); }, {a}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(bilinear_sample<double>(plane, us, ws), seed); }, {plane}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(sobel_edges(frames), seed); }, {frames}, opts) <= 1e-4);
    CHECK(grad_check([&] { return mse_loss(a, scale(a, 0.3)); }, {a}, opts) <= 1e-4);
    CHECK(grad_check([&] { return mean(square(a)); }, {a}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(concat<double>({a, scale(a, 2.0)}, 1), seed); }, {a}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(narrow(a, 1, 1, 2), seed); }, {a}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(gather(a, {0, 5, 5, 11}, {2, 2}), seed); }, {a}, opts) <= 1e-4);
    const std::vector<std::size_t> rows = {2, 0, 2};
    CHECK(grad_check([&] { return weighted_sum(take_rows(a, rows), seed); }, {a}, opts) <= 1e-4);
    CHECK(grad_check([&] { return weighted_sum(reshape(a, {2, 6}), seed); }, {a}, opts) <= 1e-4);
  }
}

TEST_CASE("peak_live_elements") {
  reset_peak();
  CHECK(peak_live_elements() == 0);
  {
    auto t = Tensor<float>::zeros({10});
    CHECK(peak_live_elements() >= 10);
  }
  CHECK(peak_live_elements() >= 10);
  reset_peak();
  CHECK(peak_live_elements() == 0);

  auto outer = Tensor<float>::zeros({100});
  std::int64_t inner_peak = 0;
  {
    PeakScope scope;
    auto a = Tensor<float>::zeros({7});
    inner_peak = scope.peak();
  }
  CHECK(inner_peak == 7);
  CHECK(peak_live_elements() >= 107);
}

TEST_CASE("peak_live_elements is reproducible for identical graphs") {
  auto run = [] {
    Rng rng(4);
    auto x = random_tensor({8, 8}, rng);
    x.set_requires_grad(true);
    reset_peak();
    backward(sum(gelu(matmul(x, x))));
    return peak_live_elements();
  };
  const auto first = run();
  CHECK(first > 0);
  CHECK(run() == first);
}
