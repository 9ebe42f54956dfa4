#include <doctest.h>

#include <cmath>
#include <random>

#include "phpq/error.hpp"
#include "phpq/gradcheck.hpp"
#include "phpq/numerics.hpp"
#include "phpq/optimizer.hpp"
#include "test_support.hpp"

using namespace phpq;

TEST_CASE("DenseArray enforces shape metadata") {
  CHECK_THROWS_AS(DenseArray({2, 3}, std::vector<double>(5)), ShapeError);
  CHECK_THROWS_AS(DenseArray({2, 0}), ShapeError);
  DenseArray a({2, 3, 4});
  CHECK(a.size() == 24);
  a.at(1, 2, 3) = 7.0;
  CHECK(a[23] == 7.0);
  CHECK(a.row(1).size() == 12);
}

TEST_CASE("linear_forward") {
  SUBCASE("identity") {
    const Vec y = linear_forward(LinearLayer::identity(2), Vec{1, 2});
    CHECK(y == Vec{1, 2});
  }
  SUBCASE("zero map with bias") {
    LinearLayer l = LinearLayer::zeros(1, 3);
    l.bias[0] = 3.0;
    CHECK(linear_forward(l, Vec{4, 5, 6}) == Vec{3});
  }
  SUBCASE("hand multiply") {
    LinearLayer l = LinearLayer::zeros(2, 2);
    l.weights = DenseArray({2, 2}, {1, 1, 1, -1});
    CHECK(linear_forward(l, Vec{2, 3}) == Vec{5, -1});
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(linear_forward(LinearLayer::identity(2), Vec{1, 2, 3}), ShapeError);
  }
  SUBCASE("linearity without bias") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      LinearLayer l = testing::random_layer(4, 5, rng);
      l.bias.fill(0.0);
      const Vec x = testing::random_vec(5, rng), y = testing::random_vec(5, rng);
      const double a = 1.7, b = -0.4;
      Vec mix(5);
      for (int i = 0; i < 5; ++i) mix[i] = a * x[i] + b * y[i];
      const Vec lhs = linear_forward(l, mix);
      const Vec fx = linear_forward(l, x), fy = linear_forward(l, y);
      for (int i = 0; i < 4; ++i) CHECK(std::abs(lhs[i] - (a * fx[i] + b * fy[i])) <= 1e-10);
    }
  }
}

TEST_CASE("linear_backward matches finite differences") {
  std::mt19937_64 rng(5);
  const LinearLayer layer = testing::random_layer(3, 4, rng);
  const Vec x = testing::random_vec(4, rng);
  const Vec up = testing::random_vec(3, rng);
  LinearLayer grad = LinearLayer::zeros(3, 4);
  const Vec dx = linear_backward(layer, x, up, grad);
  auto f = [&](std::span<const double> xs) { return dot(linear_forward(layer, xs), up); };
  CHECK(finite_diff_check(f, x, dx).max_relative_error <= 1e-7);
  auto fw = [&](std::span<const double> w) {
    LinearLayer l = layer;
    std::copy(w.begin(), w.end(), l.weights.values().begin());
    return dot(linear_forward(l, x), up);
  };
  CHECK(finite_diff_check(fw, layer.weights.values(), grad.weights.values()).max_relative_error <=
        1e-7);
  for (int i = 0; i < 3; ++i) CHECK(grad.bias[i] == doctest::Approx(up[i]));
}

TEST_CASE("softmax_scaled") {
  const Vec u = softmax_scaled(Vec{2.5, 2.5, 2.5}, 3.0);
  for (double p : u) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const Vec p = softmax_scaled(Vec{1, 0}, 1.0);
  const double e = std::exp(1.0);
  CHECK(std::abs(p[0] - e / (e + 1)) <= 1e-15);
  CHECK(std::abs(p[1] - 1 / (e + 1)) <= 1e-15);

  const Vec big = softmax_scaled(Vec{1000, 0}, 1.0);
  CHECK(big[0] == 1.0);
  CHECK(big[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(big[1]));

  CHECK_THROWS_AS(softmax_scaled(Vec{}, 1.0), ShapeError);
}

TEST_CASE("softmax_scaled properties") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec v = testing::random_vec(7, rng, 3.0);
    const double a = scale(rng);
    const Vec p = softmax_scaled(v, a);
    double sum = 0.0;
    for (double x : p) {
      CHECK(x > 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    Vec scaled = v;
    for (double& x : scaled) x *= a;
    const Vec q = softmax_scaled(scaled, 1.0);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);

    Vec rotated(v.begin() + 1, v.end());
    rotated.push_back(v.front());
    const Vec r = softmax_scaled(rotated, a);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(r[i] - p[(i + 1) % v.size()]) <= 1e-15);
  }
}

TEST_CASE("l2_normalize") {
  const Vec n = l2_normalize(Vec{3, 4});
  CHECK(std::abs(n[0] - 0.6) <= 1e-12);
  CHECK(std::abs(n[1] - 0.8) <= 1e-12);
  CHECK(l2_normalize(Vec{0, 0}) == Vec{0, 0});

  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec v = testing::random_vec(6, rng);
    const Vec once = l2_normalize(v);
    CHECK(std::abs(l2_norm(once) - 1.0) <= 1e-12);
    const Vec twice = l2_normalize(once);
    Vec scaled = v;
    for (double& x : scaled) x *= 37.5;
    const Vec s = l2_normalize(scaled);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(std::abs(twice[i] - once[i]) <= 1e-12);
      CHECK(std::abs(s[i] - once[i]) <= 1e-12);
    }
  }
}

TEST_CASE("l2_normalize_backward matches finite differences") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec v = testing::random_vec(5, rng);
    const Vec up = testing::random_vec(5, rng);
    auto f = [&](std::span<const double> x) { return dot(l2_normalize(x), up); };
    CHECK(finite_diff_check(f, v, l2_normalize_backward(v, up)).max_relative_error <= 1e-6);
  }
}

TEST_CASE("optimizer_step") {
  SUBCASE("zero gradient leaves params unchanged") {
    DenseArray p = DenseArray::from_vector({1.0, -2.0, 3.0});
    const DenseArray before = p;
    DenseArray g({3});
    AdamOptimizer opt({1e-2});
    const ParamSlot slot{&p, &g};
    for (int i = 0; i < 10; ++i) opt.step({&slot, 1});
    CHECK(p == before);
    CHECK(opt.step_count() == 10);
  }
  SUBCASE("first step moves by about the learning rate against the gradient") {
    DenseArray p = DenseArray::from_vector({0.5, 0.5});
    DenseArray g = DenseArray::from_vector({3.0, -0.25});
    AdamOptimizer opt({1e-3});
    const ParamSlot slot{&p, &g};
    opt.step({&slot, 1});
    // m_hat = g, v_hat = g^2 after bias correction: delta = -lr * g / (|g| + eps)
    CHECK(p[0] == doctest::Approx(0.5 - 1e-3 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.5 + 1e-3 * 0.25 / (0.25 + 1e-8)).epsilon(1e-14));
  }
  SUBCASE("parameters are updated independently") {
    DenseArray a = DenseArray::from_vector({1.0});
    DenseArray b = DenseArray::from_vector({1.0});
    DenseArray ga = DenseArray::from_vector({2.0});
    DenseArray gb = DenseArray::from_vector({0.0});
    AdamOptimizer opt({0.1});
    const std::vector<ParamSlot> slots{{&a, &ga}, {&b, &gb}};
    opt.step(slots);
    CHECK(a[0] < 1.0);
    CHECK(b[0] == 1.0);

    DenseArray solo = DenseArray::from_vector({1.0});
    AdamOptimizer solo_opt({0.1});
    const ParamSlot s{&solo, &ga};
    solo_opt.step({&s, 1});
    CHECK(solo[0] == a[0]);
  }
  SUBCASE("shape mismatch") {
    DenseArray p({2});
    DenseArray g({3});
    AdamOptimizer opt;
    const ParamSlot slot{&p, &g};
    CHECK_THROWS_AS(opt.step({&slot, 1}), ShapeError);
  }
}

TEST_CASE("finite_diff_check") {
  auto square = [](std::span<const double> x) { return x[0] * x[0]; };
  const Vec at{3.0};
  CHECK(finite_diff_check(square, at, Vec{6.0}, 1e-5).max_relative_error <= 1e-7);
  // (2g - g) / (2g + g)
  CHECK(finite_diff_check(square, at, Vec{12.0}, 1e-5).max_relative_error ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  auto constant = [](std::span<const double>) { return 4.0; };
  CHECK(finite_diff_check(constant, Vec{1.0, 2.0}, Vec{0.0, 0.0}).max_relative_error <= 1e-9);
  auto bad = [](std::span<const double> x) { return x[0] > 1.0 ? NAN : 0.0; };
  CHECK_THROWS_AS(finite_diff_check(bad, Vec{1.0}, Vec{0.0}), NumericError);
}
