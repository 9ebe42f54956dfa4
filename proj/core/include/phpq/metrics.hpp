#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phpq/losses.hpp"
#include "phpq/retrieval.hpp"

namespace phpq {

/// Maps database item ids to category labels.
class RelevanceOracle {
 public:
  RelevanceOracle(std::span<const ItemId> ids, std::span<const Label> labels);
  Label label_of(ItemId id) const;
  std::size_t class_count(Label label) const;
  std::size_t size() const noexcept { return size_; }

 private:
  std::vector<std::pair<ItemId, Label>> sorted_;
  std::vector<std::pair<Label, std::size_t>> counts_;
  std::size_t size_ = 0;
};

/// (1/R) * sum over relevant ranks r of precision@r, where R is the number of
/// relevant entries in `relevance`; 0 when R == 0.
double average_precision(std::span<const std::uint8_t> relevance);

struct MapResult {
  double map = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

/// Mean AP over queries. Queries whose category has no database item are
/// excluded with a warning; throws ParamError when none remain.
MapResult map_eval(std::span<const Ranking> rankings, std::span<const Label> query_labels,
                   const RelevanceOracle& database);

/// Mean precision among the top N hits for every N in `cutoffs`.
std::vector<double> p_at_n(std::span<const Ranking> rankings, std::span<const Label> query_labels,
                           const RelevanceOracle& database, std::span<const std::size_t> cutoffs);

struct SpeedReport {
  std::size_t repetitions = 0;
  std::size_t queries = 0;
  std::size_t database_size = 0;
  double aqd_ms_per_1k = 0.0;    // median over repetitions
  double exact_ms_per_1k = 0.0;
  double speedup = 0.0;
  double aqd_map = 0.0;
  double exact_map = 0.0;

  bool empty() const noexcept { return repetitions == 0; }
};

/// Times 32-bit lookup-table AQD search against 32-bit exact inner-product
/// search over every query in `queries`. One untimed warm-up pass precedes
/// the timed repetitions. repetitions == 0 yields an empty report.
SpeedReport speed_benchmark(const RetrievalIndex& index, const EmbeddingTableF32& database,
                            const EmbeddingTableF32& queries, std::size_t top_n,
                            std::size_t repetitions);

}  // namespace phpq
