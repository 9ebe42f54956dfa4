#include <benchmark/benchmark.h>

#include <random>

#include "phpq/quantization.hpp"
#include "phpq/retrieval.hpp"

namespace {

using namespace phpq;

// Random unit codebook, random codes, and f32 embeddings for N items.
struct Fixture {
  RetrievalIndex index;
  EmbeddingTableF32 table;
  std::vector<QueryEmbedding> queries;
  std::vector<std::vector<float>> raw_queries;

  Fixture(std::size_t n, std::size_t dim, std::size_t books, std::size_t book_size) {
    std::mt19937_64 rng(7);
    const Codebook cb = Codebook::random(books, book_size, dim / books, rng);
    index = RetrievalIndex(cb);
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(book_size - 1));
    std::normal_distribution<double> gauss;
    table.dim = dim;
    Vec z(dim);
    std::vector<float> zf(dim);
    for (std::size_t i = 0; i < n; ++i) {
      QuantCode code;
      for (std::size_t m = 0; m < books; ++m) code.indices.push_back(pick(rng));
      index.add(code, static_cast<Label>(i % 10), static_cast<ItemId>(i));
      for (std::size_t j = 0; j < dim; ++j) zf[j] = static_cast<float>(gauss(rng));
      table.add(zf, static_cast<Label>(i % 10), static_cast<ItemId>(i));
    }
    for (std::size_t q = 0; q < 16; ++q) {
      for (double& v : z) v = gauss(rng);
      queries.push_back(make_query(z, books));
      raw_queries.emplace_back(z.begin(), z.end());
    }
  }
};

const Fixture& fixture() {
  static const Fixture f(20000, 512, 8, 256);
  return f;
}

void BM_AqdSearch(benchmark::State& state) {
  const Fixture& f = fixture();
  std::size_t q = 0;
  for (auto _ : state) {
    auto r = aqd_search_fast(f.queries[q++ % f.queries.size()], f.index, 100);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.index.size()));
}
BENCHMARK(BM_AqdSearch)->Unit(benchmark::kMillisecond);

void BM_ExactSearch(benchmark::State& state) {
  const Fixture& f = fixture();
  std::size_t q = 0;
  for (auto _ : state) {
    auto r = exact_search(std::span<const float>(f.raw_queries[q++ % f.raw_queries.size()]),
                          f.table, 100);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.table.size()));
}
BENCHMARK(BM_ExactSearch)->Unit(benchmark::kMillisecond);

void BM_BuildLookup(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) {
    auto t = build_lookup(f.queries[0], f.index.codebook());
    benchmark::DoNotOptimize(t);
  }
}
BENCHMARK(BM_BuildLookup);

}  // namespace
