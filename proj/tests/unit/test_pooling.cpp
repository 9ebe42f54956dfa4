#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <cmath>
#include <random>

#include "phpq/error.hpp"
#include "phpq/gradcheck.hpp"
#include "phpq/pooling.hpp"
#include "test_support.hpp"

using namespace phpq;

namespace {

DenseArray ramp_map() { return DenseArray({2, 2, 1}, {1, 2, 3, 4}); }

PyramidDims small_dims() { return {{4, 4, 3}, {3, 3, 4}, {2, 2, 5}}; }

FeatureMapSet random_set(const PyramidDims& d, std::mt19937_64& rng) {
  FeatureMapSet s;
  s.stage2 = testing::random_map(d.stage2.height, d.stage2.width, d.stage2.channels, rng, 0.1, 2.0);
  s.stage3 = testing::random_map(d.stage3.height, d.stage3.width, d.stage3.channels, rng, 0.1, 2.0);
  s.stage4 = testing::random_map(d.stage4.height, d.stage4.width, d.stage4.channels, rng, 0.1, 2.0);
  return s;
}

PhpParams random_params(const PyramidDims& d, std::size_t dim, std::mt19937_64& rng) {
  return {testing::random_layer(d.stage3.channels, d.stage2.channels, rng),
          testing::random_layer(d.stage4.channels, d.stage3.channels, rng),
          testing::random_layer(dim, d.stage4.channels, rng)};
}

}  // namespace

TEST_CASE("gsp_pool examples") {
  CHECK(gsp_pool(ramp_map(), 1.0)[0] == 2.5);
  CHECK(gsp_pool(ramp_map(), 2.0)[0] == doctest::Approx(std::sqrt(30.0) / 4.0).epsilon(1e-14));
  const double high = gsp_pool(ramp_map(), 64.0)[0];
  CHECK(std::abs(high - 1.0) <= 0.05);
  CHECK(gsp_pool(ramp_map(), kMaxPoolRho)[0] == 1.0);
}

TEST_CASE("gsp_pool errors") {
  CHECK_THROWS_AS(gsp_pool(ramp_map(), 0.5), ParamError);
  CHECK_THROWS_AS(gsp_pool(DenseArray({1, 2, 1}, {1.0, -0.1}), 2.0), InputError);
  CHECK_THROWS_AS(gsp_pool(DenseArray({4}), 2.0), ShapeError);
}

TEST_CASE("gsp_pool properties") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const DenseArray map = testing::random_map(3, 5, 4, rng);
    const Vec mean = gsp_pool(map, 1.0);
    for (std::size_t c = 0; c < 4; ++c) {
      double sum = 0.0;
      for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t w = 0; w < 5; ++w) sum += map.at(h, w, c);
      CHECK(std::abs(mean[c] - sum / 15.0) <= 1e-12);
    }

    // Channel separability.
    const Vec pooled = gsp_pool(map, 3.0);
    for (std::size_t c = 0; c < 4; ++c) {
      DenseArray single({3, 5, 1});
      for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t w = 0; w < 5; ++w) single.at(h, w, 0) = map.at(h, w, c);
      CHECK(gsp_pool(single, 3.0)[0] == doctest::Approx(pooled[c]).epsilon(1e-14));
    }

    // (1/HW) * ||F||_rho is nonincreasing in rho and tends to max / HW.
    Vec prev = gsp_pool(map, 1.0);
    for (double rho : {2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
      const Vec cur = gsp_pool(map, rho);
      for (std::size_t c = 0; c < 4; ++c) CHECK(cur[c] <= prev[c] * (1.0 + 1e-12));
      prev = cur;
    }
    const Vec limit = gsp_pool(map, kMaxPoolRho);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(prev[c] >= limit[c]);
      CHECK(prev[c] <= limit[c] * 1.05);
    }
  }
}

TEST_CASE("gsp_grad") {
  std::mt19937_64 rng(23);
  SUBCASE("rho = 1 is the mean derivative") {
    const DenseArray g = gsp_grad(testing::random_map(2, 3, 2, rng, 0.1, 1.0), 1.0);
    for (double v : g.values()) CHECK(v == doctest::Approx(1.0 / 6.0));
  }
  SUBCASE("constant map gives equal entries") {
    const DenseArray g = gsp_grad(DenseArray({2, 2, 1}, 0.7), 3.0);
    for (double v : g.values()) CHECK(v == doctest::Approx(g[0]).epsilon(1e-14));
  }
  SUBCASE("all-zero channel stays finite") {
    const DenseArray g = gsp_grad(DenseArray({2, 2, 1}, 0.0), 3.0);
    CHECK(g.all_finite());
  }
  SUBCASE("matches central differences") {
    for (double rho : {1.0, 2.0, 3.0}) {
      for (int trial = 0; trial < 10; ++trial) {
        const DenseArray map = testing::random_map(3, 3, 2, rng, 0.1, 2.0);
        const DenseArray grad = gsp_grad(map, rho);
        for (std::size_t c = 0; c < 2; ++c) {
          auto f = [&](std::span<const double> x) {
            DenseArray m = map;
            std::copy(x.begin(), x.end(), m.values().begin());
            return gsp_pool(m, rho)[c];
          };
          Vec analytic(map.size(), 0.0);
          for (std::size_t i = c; i < map.size(); i += 2) analytic[i] = grad[i];
          CHECK(finite_diff_check(f, map.values(), analytic).max_relative_error <= 1e-5);
        }
      }
    }
  }
}

TEST_CASE("php_fuse pass-through") {
  const PyramidDims dims{{3, 3, 4}, {2, 2, 4}, {2, 2, 4}};
  std::mt19937_64 rng(29);
  FeatureMapSet s;
  s.stage2 = testing::random_map(3, 3, 4, rng);
  s.stage3 = DenseArray({2, 2, 4});
  s.stage4 = DenseArray({2, 2, 4});
  const PhpParams identity{LinearLayer::identity(4), LinearLayer::identity(4),
                           LinearLayer::identity(4)};
  const FocusFactors rhos;
  const Vec z = php_fuse(s, rhos, identity);
  const Vec f2 = gsp_pool(s.stage2, rhos.rho_s2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(z[i] - f2[i]) <= 1e-9);
}

TEST_CASE("php_fuse annihilation and oracle") {
  const PyramidDims dims = small_dims();
  std::mt19937_64 rng(31);
  const FeatureMapSet s = random_set(dims, rng);
  const FocusFactors rhos;

  const PhpParams zero{LinearLayer::zeros(4, 3), LinearLayer::zeros(5, 4), LinearLayer::zeros(6, 5)};
  for (double v : php_fuse(s, rhos, zero)) CHECK(v == 0.0);

  for (int trial = 0; trial < 10; ++trial) {
    const PhpParams p = random_params(dims, 6, rng);
    const Vec z = php_fuse(s, rhos, p);

    // Straight-line composition written out independently.
    auto pool = [](const DenseArray& m, double rho) {
      const std::size_t hw = m.extent(0) * m.extent(1), c = m.extent(2);
      Vec out(c, 0.0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t p = 0; p < hw; ++p) sum += std::pow(m[p * c + ch], rho);
        out[ch] = std::pow(sum, 1.0 / rho) / static_cast<double>(hw);
      }
      return out;
    };
    auto affine = [](const LinearLayer& l, const Vec& x) {
      Vec y(l.out_dim());
      for (std::size_t o = 0; o < y.size(); ++o) {
        y[o] = l.bias[o];
        for (std::size_t i = 0; i < x.size(); ++i) y[o] += l.weights.at(o, i) * x[i];
      }
      return y;
    };
    const Vec f2 = pool(s.stage2, 3.0), f3 = pool(s.stage3, 2.0), f4 = pool(s.stage4, 1.0);
    Vec h3 = affine(p.fc1, f2);
    for (std::size_t i = 0; i < h3.size(); ++i) h3[i] += f3[i];
    Vec h4 = affine(p.fc2, h3);
    for (std::size_t i = 0; i < h4.size(); ++i) h4[i] += f4[i];
    const Vec expect = affine(p.transform_g, h4);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(z[i] - expect[i]) <= 1e-12);
  }
}

TEST_CASE("php_fuse is invariant to spatial permutation of stage2") {
  const PyramidDims dims = small_dims();
  std::mt19937_64 rng(37);
  const FeatureMapSet s = random_set(dims, rng);
  const PhpParams p = random_params(dims, 6, rng);
  FeatureMapSet shuffled = s;
  const std::size_t hw = 16, c = 3;
  std::vector<std::size_t> perm(hw);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < hw; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) shuffled.stage2[perm[i] * c + ch] = s.stage2[i * c + ch];
  const Vec a = php_fuse(s, {}, p), b = php_fuse(shuffled, {}, p);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
}

TEST_CASE("php_fuse shape errors") {
  std::mt19937_64 rng(41);
  const FeatureMapSet s = random_set(small_dims(), rng);
  const PhpParams wrong = random_params({{4, 4, 3}, {3, 3, 7}, {2, 2, 5}}, 6, rng);
  CHECK_THROWS_AS(php_fuse(s, {}, wrong), ShapeError);
}

TEST_CASE("php_backward") {
  SUBCASE("zero upstream") {
    std::mt19937_64 rng(43);
    const PyramidDims dims = small_dims();
    const PhpParams p = random_params(dims, 6, rng);
    const PhpForward fwd = php_forward(pool_pyramid(random_set(dims, rng), {}), p);
    const PhpParams g = php_backward(fwd, p, Vec(6, 0.0));
    for (const LinearLayer* l : {&g.fc1, &g.fc2, &g.transform_g}) {
      for (double v : l->weights.values()) CHECK(v == 0.0);
      for (double v : l->bias.values()) CHECK(v == 0.0);
    }
  }
  SUBCASE("scalar chain rule by hand") {
    // f2=2, f3=3, f4=5; z = wg*(w2*(w1*f2 + b1 + f3) + b2 + f4) + bg
    FeatureMapSet s{DenseArray({1, 1, 1}, {2.0}), DenseArray({1, 1, 1}, {3.0}),
                    DenseArray({1, 1, 1}, {5.0}), std::nullopt};
    PhpParams p{LinearLayer::zeros(1, 1), LinearLayer::zeros(1, 1), LinearLayer::zeros(1, 1)};
    p.fc1.weights[0] = 0.5;
    p.fc1.bias[0] = 0.1;
    p.fc2.weights[0] = -1.5;
    p.fc2.bias[0] = 0.2;
    p.transform_g.weights[0] = 2.0;
    p.transform_g.bias[0] = -0.3;
    const PhpForward fwd = php_forward(pool_pyramid(s, {}), p);
    CHECK(fwd.z[0] == doctest::Approx(-2.2));
    const PhpParams g = php_backward(fwd, p, Vec{0.7});
    CHECK(g.transform_g.weights[0] == doctest::Approx(-0.665));
    CHECK(g.transform_g.bias[0] == doctest::Approx(0.7));
    CHECK(g.fc2.weights[0] == doctest::Approx(5.74));
    CHECK(g.fc2.bias[0] == doctest::Approx(1.4));
    CHECK(g.fc1.weights[0] == doctest::Approx(-4.2));
    CHECK(g.fc1.bias[0] == doctest::Approx(-2.1));
  }
  SUBCASE("random config matches finite differences") {
    std::mt19937_64 rng(47);
    const PyramidDims dims = small_dims();
    for (FusionMode mode : {FusionMode::pyramid, FusionMode::last_stage_only}) {
      PhpParams p = random_params(dims, 6, rng);
      const PyramidDescriptors desc = pool_pyramid(random_set(dims, rng), {});
      const Vec up = testing::random_vec(6, rng);
      const PhpParams g = php_backward(php_forward(desc, p, mode), p, up);

      const std::vector<DenseArray*> params{&p.fc1.weights, &p.fc1.bias, &p.fc2.weights,
                                            &p.fc2.bias, &p.transform_g.weights,
                                            &p.transform_g.bias};
      const std::vector<const DenseArray*> grads{&g.fc1.weights, &g.fc1.bias, &g.fc2.weights,
                                                 &g.fc2.bias, &g.transform_g.weights,
                                                 &g.transform_g.bias};
      const Vec x0 = testing::flatten(params);
      auto f = [&](std::span<const double> x) {
        PhpParams q = p;
        testing::assign({&q.fc1.weights, &q.fc1.bias, &q.fc2.weights, &q.fc2.bias,
                         &q.transform_g.weights, &q.transform_g.bias},
                        x);
        return dot(php_forward(desc, q, mode).z, up);
      };
      CHECK(finite_diff_check(f, x0, testing::flatten(grads)).max_relative_error <= 1e-5);
    }
  }
  SUBCASE("missing cache") {
    const PhpParams p{LinearLayer::zeros(1, 1), LinearLayer::zeros(1, 1), LinearLayer::zeros(1, 1)};
    CHECK_THROWS_AS(php_backward(PhpForward{}, p, Vec{1.0}), StateError);
  }
}
