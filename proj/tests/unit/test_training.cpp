#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "phpq/checkpoint.hpp"
#include "phpq/error.hpp"
#include "phpq/gradcheck.hpp"
#include "phpq/synthetic.hpp"
#include "phpq/training.hpp"
#include "test_support.hpp"

using namespace phpq;

namespace {

ModelHyper tiny_hyper(std::size_t kappa) {
  ModelHyper h;
  h.dims = {{2, 2, 3}, {2, 1, 4}, {1, 2, 5}};
  h.embedding_dim = 4;
  h.num_books = 2;
  h.book_size = 3;
  h.num_classes = 2;
  h.alpha = 1.5;
  h.kappa = kappa;
  h.loss.m_plus = 0.0;
  h.loss.m_minus = 4.0;
  return h;
}

std::vector<FeatureMapSet> random_samples(const PyramidDims& d, std::size_t n,
                                          std::mt19937_64& rng) {
  std::vector<FeatureMapSet> out(n);
  for (auto& s : out) {
    s.stage2 = testing::random_map(d.stage2.height, d.stage2.width, d.stage2.channels, rng, 0.1, 2.0);
    s.stage3 = testing::random_map(d.stage3.height, d.stage3.width, d.stage3.channels, rng, 0.1, 2.0);
    s.stage4 = testing::random_map(d.stage4.height, d.stage4.width, d.stage4.channels, rng, 0.1, 2.0);
  }
  return out;
}

// Straight-line loss from the embedding onward, written against the formulas.
double loss_oracle(const ModelParams& p, const std::vector<Vec>& zs, const std::vector<Label>& y) {
  const auto& h = p.hyper;
  const std::size_t n = zs.size(), dim = h.embedding_dim, d = h.sub_dim(), k_count = h.book_size;
  std::vector<Vec> recon(n, Vec(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < h.num_books; ++m) {
      Vec u(zs[i].begin() + m * d, zs[i].begin() + (m + 1) * d);
      double un = 0.0;
      for (double v : u) un += v * v;
      for (double& v : u) v /= std::sqrt(un);
      std::vector<Vec> words(k_count, Vec(d));
      Vec logit(k_count);
      for (std::size_t k = 0; k < k_count; ++k) {
        double wn = 0.0;
        for (std::size_t j = 0; j < d; ++j) wn += std::pow(p.codebook.raw.at(m, k, j), 2);
        double ip = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          words[k][j] = p.codebook.raw.at(m, k, j) / std::sqrt(wn);
          ip += words[k][j] * u[j];
        }
        logit[k] = 2.0 * h.alpha * ip;
      }
      std::vector<std::size_t> order(k_count);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return logit[a] > logit[b]; });
      double z_sum = 0.0;
      for (std::size_t r = 0; r < h.kappa; ++r) z_sum += std::exp(logit[order[r]]);
      for (std::size_t r = 0; r < h.kappa; ++r) {
        const double w = std::exp(logit[order[r]]) / z_sum;
        for (std::size_t j = 0; j < d; ++j) recon[i][m * d + j] += w * words[order[r]][j];
      }
    }
  }
  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec o(h.num_classes);
    for (std::size_t c = 0; c < h.num_classes; ++c) {
      o[c] = p.classifier.bias[c];
      for (std::size_t j = 0; j < dim; ++j) o[c] += p.classifier.weights.at(c, j) * recon[i][j];
      o[c] /= h.loss.tau;
    }
    double denom = 0.0;
    for (double v : o) denom += std::exp(v);
    ce += std::log(denom) - o[static_cast<std::size_t>(y[i])];
  }
  ce /= double(n);

  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) s += std::pow(recon[a][j] - recon[b][j], 2);
    return std::sqrt(s);
  };
  std::map<Label, std::size_t> counts;
  for (Label l : y) ++counts[l];
  double cl = 0.0;
  for (const auto& [c, size] : counts) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b || y[a] != c) continue;
        (y[b] == c ? pos : neg) += dist(a, b);
      }
    if (size >= 2) cl += std::max(pos / double(size * size) - h.loss.m_plus, 0.0);
    if (size < n) cl += std::max(h.loss.m_minus - neg / double(size * (n - size)), 0.0);
  }
  cl /= double(counts.size());
  return ce + h.loss.gamma * cl;
}

bool same_bytes(const ModelParams& a, const ModelParams& b) {
  const auto ta = a.tensors(), tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (!(*ta[i] == *tb[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("forward_batch matches a straight-line oracle") {
  std::mt19937_64 rng(1);
  for (std::size_t kappa : {1u, 2u, 3u}) {
    const ModelParams p = ModelParams::init(tiny_hyper(kappa), 10 + kappa);
    const auto samples = random_samples(p.hyper.dims, 5, rng);
    const auto desc = pool_dataset(samples, p.hyper.rhos);
    const std::vector<Label> y{0, 1, 1, 0, 1};
    const BatchForward fwd = forward_batch(p, desc, y);
    std::vector<Vec> zs;
    for (const auto& dsc : desc) zs.push_back(embed(p, dsc));
    CHECK(std::abs(fwd.loss.total - loss_oracle(p, zs, y)) <= 1e-10);
  }
}

TEST_CASE("backward_batch matches finite differences over every parameter") {
  std::mt19937_64 rng(2);
  for (std::size_t kappa : {1u, 2u, 3u}) {
    for (int trial = 0; trial < 3; ++trial) {
      ModelParams p = ModelParams::init(tiny_hyper(kappa), 100 * kappa + trial);
      const auto desc = pool_dataset(random_samples(p.hyper.dims, 2, rng), p.hyper.rhos);
      const std::vector<Label> y{0, 1};
      const BatchForward fwd = forward_batch(p, desc, y);
      const ModelGrads g = backward_batch(p, fwd);

      const Vec x0 = testing::flatten(p.tensors());
      auto f = [&](std::span<const double> x) {
        ModelParams q = p;
        testing::assign(q.tensors(), x);
        return forward_batch(q, desc, y).loss.total;
      };
      const GradientCheck gc = finite_diff_check(f, x0, testing::flatten(g.tensors()));
      INFO("kappa " << kappa << " coordinate " << gc.worst_coordinate);
      CHECK(gc.max_relative_error <= 1e-4);
    }
  }
}

TEST_CASE("backward edge cases") {
  std::mt19937_64 rng(3);
  const ModelParams p = ModelParams::init(tiny_hyper(2), 5);
  const auto desc = pool_dataset(random_samples(p.hyper.dims, 3, rng), p.hyper.rhos);
  const std::vector<Label> y{0, 1, 0};
  const BatchForward fwd = forward_batch(p, desc, y);

  SUBCASE("zero upstream gives zero gradients") {
    const ModelGrads g = backward_from(p, fwd, DenseArray({3, 2}), DenseArray({3, 4}));
    for (const DenseArray* t : g.tensors())
      for (double v : t->values()) CHECK(v == 0.0);
  }
  SUBCASE("missing cache") {
    CHECK_THROWS_AS(backward_batch(p, BatchForward{}), StateError);
  }
  SUBCASE("duplicating the batch leaves mean-reduced gradients unchanged") {
    std::vector<PyramidDescriptors> twice(desc.begin(), desc.end());
    twice.insert(twice.end(), desc.begin(), desc.end());
    std::vector<Label> y2 = y;
    y2.insert(y2.end(), y.begin(), y.end());
    const BatchForward fwd2 = forward_batch(p, twice, y2);
    CHECK(fwd2.loss.total == doctest::Approx(fwd.loss.total).epsilon(1e-12));
    const Vec a = testing::flatten(backward_batch(p, fwd).tensors());
    const Vec b = testing::flatten(backward_batch(p, fwd2).tensors());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-10));
  }
  SUBCASE("duplicated sample gives identical outputs") {
    const std::vector<PyramidDescriptors> same{desc[0], desc[0]};
    const BatchForward f2 = forward_batch(p, same, std::vector<Label>{1, 1});
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(f2.reconstructions.at(0, j) == f2.reconstructions.at(1, j));
  }
  SUBCASE("masked codewords get no gradient from a lone sample") {
    ModelHyper h = tiny_hyper(1);
    h.loss.gamma = 0.0;
    const ModelParams q = ModelParams::init(h, 8);
    const std::vector<PyramidDescriptors> one{desc[0]};
    const BatchForward f1 = forward_batch(q, one, std::vector<Label>{0});
    const ModelGrads g = backward_batch(q, f1);
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t k = 0; k < 3; ++k)
        if (!f1.quant[0].refined[m].mask[k])
          for (std::size_t j = 0; j < 2; ++j) CHECK(g.codebook_raw.at(m, k, j) == 0.0);
  }
}

TEST_CASE("variant switches") {
  std::mt19937_64 rng(4);
  ModelHyper base = tiny_hyper(2);
  const auto samples = random_samples(base.dims, 4, rng);
  const std::vector<Label> y{0, 1, 0, 1};
  for (auto& s : const_cast<std::vector<FeatureMapSet>&>(samples)) s.label = 0;

  auto run = [&](const ModelHyper& h) {
    const ModelParams p = ModelParams::init(h, 77);
    return forward_batch(p, pool_dataset(samples, h.rhos), y);
  };

  ModelHyper full = base;
  full.kappa = base.book_size;
  CHECK(run(apply_variant(base, Variant::full_attention)).reconstructions == run(full).reconstructions);

  ModelHyper gap = base;
  gap.rhos = {1.0, 1.0, 1.0};
  CHECK(run(apply_variant(base, Variant::gap)).reconstructions == run(gap).reconstructions);

  const BatchForward no_cl = run(apply_variant(base, Variant::no_contrastive));
  CHECK(no_cl.loss.total == no_cl.loss.sr_cel);

  // kappa = K with gamma = 0 is the plain soft-quantization + SR-CEL pipeline.
  ModelHyper plain = apply_variant(apply_variant(base, Variant::full_attention), Variant::no_contrastive);
  const ModelParams pp = ModelParams::init(plain, 77);
  const auto desc = pool_dataset(samples, plain.rhos);
  const BatchForward fp = forward_batch(pp, desc, y);
  DenseArray logits({4, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    const SoftQuantForward sq = soft_quantize(embed(pp, desc[i]), pp.codebook, plain.alpha, plain.book_size);
    const Vec o = linear_forward(pp.classifier, sq.reconstruction);
    std::copy(o.begin(), o.end(), logits.values().begin() + i * 2);
  }
  CHECK(fp.loss.total == doctest::Approx(sr_cel(logits, y, plain.loss.tau).value).epsilon(1e-14));

  CHECK(parse_variant("full_attn") == Variant::full_attention);
  CHECK(std::string(to_string(Variant::no_contrastive)) == "no_cl");
  CHECK_THROWS_AS(parse_variant("bogus"), ParamError);
}

TEST_CASE("train") {
  std::mt19937_64 rng(5);
  ModelHyper h = tiny_hyper(2);
  const auto samples = random_samples(h.dims, 12, rng);
  const auto desc = pool_dataset(samples, h.rhos);
  std::vector<Label> y(12);
  for (std::size_t i = 0; i < 12; ++i) y[i] = static_cast<Label>(i % 2);
  const ModelParams init = ModelParams::init(h, 9);

  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 5;
  cfg.learning_rate = 1e-2;
  cfg.seed = 4;

  SUBCASE("zero epochs") {
    TrainConfig zero = cfg;
    zero.epochs = 0;
    CHECK(same_bytes(train(init, desc, y, zero).params, init));
  }
  SUBCASE("zero learning rate") {
    TrainConfig still = cfg;
    still.learning_rate = 0.0;
    CHECK(same_bytes(train(init, desc, y, still).params, init));
  }
  SUBCASE("bitwise reproducible") {
    const TrainResult a = train(init, desc, y, cfg);
    const TrainResult b = train(init, desc, y, cfg);
    CHECK(same_bytes(a.params, b.params));
    CHECK(a.log.size() == 3);
    CHECK(!same_bytes(a.params, init));
  }
  SUBCASE("hook values are logged and pick the best epoch") {
    const TrainResult r = train(init, desc, y, cfg, [](const ModelParams&, std::size_t epoch) {
      return std::optional<double>(epoch == 1 ? 0.9 : 0.5);
    });
    REQUIRE(r.best_epoch.has_value());
    CHECK(*r.best_epoch == 1);
    CHECK(r.log[1].validation_map == 0.9);
  }
  SUBCASE("non-finite loss names the batch") {
    ModelParams bad = init;
    bad.classifier.weights[0] = std::nan("");
    try {
      train(bad, desc, y, cfg);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("batch") != std::string::npos);
    }
  }
  SUBCASE("config checks") {
    TrainConfig b = cfg;
    b.batch_size = 1;
    CHECK_THROWS_AS(train(init, desc, y, b), ParamError);
  }
}

TEST_CASE("training lowers the loss on synthetic data") {
  SyntheticSpec spec;
  spec.samples_per_class = 20;
  const SyntheticDataset data = generate_synthetic(spec);
  ModelHyper h;
  h.num_classes = spec.num_classes();
  std::vector<Label> y;
  for (const auto& s : data.samples) y.push_back(*s.label);
  const auto desc = pool_dataset(data.samples, h.rhos);
  for (std::uint64_t seed : {1u, 2u}) {
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.learning_rate = 1e-3;
    cfg.seed = seed;
    const TrainResult r = train(ModelParams::init(h, seed), desc, y, cfg);
    CHECK(r.log.back().loss.total < r.log.front().loss.total);
  }
}

TEST_CASE("checkpoint round trip") {
  ModelHyper h = tiny_hyper(2);
  h.rhos = FocusFactors::max();
  h.fusion = FusionMode::last_stage_only;
  std::mt19937_64 rng(6);
  const auto desc = pool_dataset(random_samples(h.dims, 6, rng), h.rhos);
  const std::vector<Label> y{0, 1, 0, 1, 1, 0};
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 3;
  const TrainResult r = train(ModelParams::init(h, 3), desc, y, cfg);

  std::stringstream buf;
  write_checkpoint(buf, {r.params, r.optimizer});
  const Checkpoint back = read_checkpoint(buf);
  CHECK(back.params.hyper == h);
  CHECK(same_bytes(back.params, r.params));
  REQUIRE(back.optimizer.has_value());
  CHECK(back.optimizer->step_count() == r.optimizer.step_count());

  std::stringstream plain;
  write_checkpoint(plain, {r.params, std::nullopt});
  CHECK(!read_checkpoint(plain).optimizer.has_value());

  std::string bytes = buf.str();
  bytes[0] = 'X';
  std::stringstream corrupt(bytes);
  CHECK_THROWS_AS(read_checkpoint(corrupt), FormatError);
  std::stringstream cut(buf.str().substr(0, 40));
  CHECK_THROWS_AS(read_checkpoint(cut), FormatError);
}
