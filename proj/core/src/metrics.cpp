#include "phpq/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "phpq/error.hpp"

namespace phpq {

RelevanceOracle::RelevanceOracle(std::span<const ItemId> ids, std::span<const Label> labels)
    : size_(ids.size()) {
  if (ids.size() != labels.size()) throw ShapeError("RelevanceOracle: ids and labels differ");
  sorted_.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) sorted_.emplace_back(ids[i], labels[i]);
  std::sort(sorted_.begin(), sorted_.end());
  for (std::size_t i = 1; i < sorted_.size(); ++i) {
    if (sorted_[i].first == sorted_[i - 1].first) {
      throw InputError("RelevanceOracle: duplicate item id " + std::to_string(sorted_[i].first));
    }
  }
  std::vector<Label> sorted_labels(labels.begin(), labels.end());
  std::sort(sorted_labels.begin(), sorted_labels.end());
  for (Label l : sorted_labels) {
    if (counts_.empty() || counts_.back().first != l) counts_.emplace_back(l, 0);
    ++counts_.back().second;
  }
}

Label RelevanceOracle::label_of(ItemId id) const {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), std::make_pair(id, Label{0}),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
  if (it == sorted_.end() || it->first != id) {
    throw InputError("ranking refers to unknown item id " + std::to_string(id));
  }
  return it->second;
}

std::size_t RelevanceOracle::class_count(Label label) const {
  auto it = std::lower_bound(counts_.begin(), counts_.end(), std::make_pair(label, std::size_t{0}),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
  return it != counts_.end() && it->first == label ? it->second : 0;
}

double average_precision(std::span<const std::uint8_t> relevance) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < relevance.size(); ++r) {
    if (!relevance[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

MapResult map_eval(std::span<const Ranking> rankings, std::span<const Label> query_labels,
                   const RelevanceOracle& database) {
  if (rankings.size() != query_labels.size()) {
    throw ShapeError("map_eval: one label per ranking required");
  }
  MapResult out;
  double total = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    if (database.class_count(query_labels[q]) == 0) {
      ++out.excluded;
      out.warnings.push_back("query " + std::to_string(q) + " (label " +
                             std::to_string(query_labels[q]) +
                             ") has no relevant database item; excluded");
      continue;
    }
    std::vector<std::uint8_t> relevant;
    relevant.reserve(rankings[q].size());
    for (const auto& hit : rankings[q]) {
      relevant.push_back(database.label_of(hit.id) == query_labels[q] ? 1 : 0);
    }
    total += average_precision(relevant);
    ++out.evaluated;
  }
  if (out.evaluated == 0) throw ParamError("map_eval: no query has a relevant database item");
  out.map = total / static_cast<double>(out.evaluated);
  return out;
}

std::vector<double> p_at_n(std::span<const Ranking> rankings, std::span<const Label> query_labels,
                           const RelevanceOracle& database, std::span<const std::size_t> cutoffs) {
  if (rankings.size() != query_labels.size()) {
    throw ShapeError("p_at_n: one label per ranking required");
  }
  if (rankings.empty()) throw ParamError("p_at_n: no queries");
  std::vector<double> out;
  out.reserve(cutoffs.size());
  for (std::size_t n : cutoffs) {
    if (n < 1 || n > database.size()) {
      throw ParamError("p_at_n: N=" + std::to_string(n) + " outside [1, " +
                       std::to_string(database.size()) + "]");
    }
    double total = 0.0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
      if (rankings[q].size() < n) {
        throw ParamError("p_at_n: ranking " + std::to_string(q) + " shorter than N=" +
                         std::to_string(n));
      }
      std::size_t hits = 0;
      for (std::size_t r = 0; r < n; ++r) {
        hits += database.label_of(rankings[q][r].id) == query_labels[q];
      }
      total += static_cast<double>(hits) / static_cast<double>(n);
    }
    out.push_back(total / static_cast<double>(rankings.size()));
  }
  return out;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SpeedReport speed_benchmark(const RetrievalIndex& index, const EmbeddingTableF32& database,
                            const EmbeddingTableF32& queries, std::size_t top_n,
                            std::size_t repetitions) {
  SpeedReport report;
  if (repetitions == 0) return report;
  if (queries.size() == 0) throw ParamError("speed_benchmark: no queries");
  if (index.size() != database.size()) {
    throw ShapeError("speed_benchmark: index and embedding table sizes differ");
  }
  using Clock = std::chrono::steady_clock;

  std::vector<QueryEmbedding> aqd_queries;
  aqd_queries.reserve(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto row = queries.row(q);
    const Vec z(row.begin(), row.end());
    aqd_queries.push_back(make_query(z, index.num_books()));
  }

  std::vector<Ranking> aqd_rankings(queries.size());
  std::vector<Ranking> exact_rankings(queries.size());
  auto run_aqd = [&] {
    for (std::size_t q = 0; q < queries.size(); ++q)
      aqd_rankings[q] = aqd_search_fast(aqd_queries[q], index, top_n);
  };
  auto run_exact = [&] {
    for (std::size_t q = 0; q < queries.size(); ++q)
      exact_rankings[q] = exact_search(queries.row(q), database, top_n);
  };
  auto time_ms = [](auto&& fn) {
    const auto start = Clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };

  run_aqd();
  run_exact();
  std::vector<double> aqd_times, exact_times;
  for (std::size_t r = 0; r < repetitions; ++r) {
    aqd_times.push_back(time_ms(run_aqd));
    exact_times.push_back(time_ms(run_exact));
  }

  const double per_1k = 1000.0 / static_cast<double>(queries.size());
  report.repetitions = repetitions;
  report.queries = queries.size();
  report.database_size = index.size();
  report.aqd_ms_per_1k = median(aqd_times) * per_1k;
  report.exact_ms_per_1k = median(exact_times) * per_1k;
  report.speedup = report.exact_ms_per_1k / report.aqd_ms_per_1k;

  const RelevanceOracle oracle(index.ids(), index.labels());
  report.aqd_map = map_eval(aqd_rankings, queries.labels, oracle).map;
  report.exact_map = map_eval(exact_rankings, queries.labels, oracle).map;
  return report;
}

}  // namespace phpq
