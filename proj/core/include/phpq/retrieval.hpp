#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "phpq/losses.hpp"
#include "phpq/model.hpp"
#include "phpq/numerics.hpp"
#include "phpq/pooling.hpp"
#include "phpq/quantization.hpp"

namespace phpq {

using ItemId = std::int64_t;

/// Hard-quantized database. Codes are stored item-major (N x M) in one
/// contiguous buffer so a lookup-table scan touches memory sequentially.
/// The codebook is frozen once the index exists.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  /// Empty index over the normalized codewords of `codebook`.
  explicit RetrievalIndex(const Codebook& codebook);
  /// `effective` must be M x K x d with unit-norm rows.
  explicit RetrievalIndex(DenseArray effective);

  void add(const QuantCode& code, Label label, ItemId id);

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t num_books() const noexcept { return num_books_; }
  std::size_t book_size() const noexcept { return book_size_; }
  std::size_t sub_dim() const noexcept { return sub_dim_; }

  const DenseArray& codebook() const noexcept { return codebook_; }
  std::span<const std::uint16_t> codes() const noexcept { return codes_; }
  std::span<const Label> labels() const noexcept { return labels_; }
  std::span<const ItemId> ids() const noexcept { return ids_; }
  QuantCode code(std::size_t item) const;

 private:
  std::size_t num_books_ = 0;
  std::size_t book_size_ = 0;
  std::size_t sub_dim_ = 0;
  DenseArray codebook_;
  std::vector<std::uint16_t> codes_;
  std::vector<Label> labels_;
  std::vector<ItemId> ids_;
};

/// Query side of AQD: the query embedding split into M unit sub-vectors.
struct QueryEmbedding {
  std::size_t num_books = 0;
  std::size_t sub_dim = 0;
  Vec units;  // M x d

  std::span<const double> sub(std::size_t m) const {
    return std::span<const double>(units).subspan(m * sub_dim, sub_dim);
  }
};

QueryEmbedding make_query(std::span<const double> z, std::size_t num_books);

/// Xi[m][k] = <v_m, c_m^k>.
struct LookupTable {
  std::size_t num_books = 0;
  std::size_t book_size = 0;
  Vec entries;  // M x K

  double at(std::size_t m, std::size_t k) const { return entries[m * book_size + k]; }
};

LookupTable build_lookup(const QueryEmbedding& query, const DenseArray& effective);

struct SearchHit {
  ItemId id = 0;
  double score = 0.0;
  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

using Ranking = std::vector<SearchHit>;

/// Top `top_n` hits by descending score, ties by ascending id. An item whose
/// id equals `exclude` is skipped.
Ranking aqd_search(const QueryEmbedding& query, const RetrievalIndex& index, std::size_t top_n,
                   std::optional<ItemId> exclude = std::nullopt);

/// Same ranking rule with a 32-bit lookup table.
Ranking aqd_search_fast(const QueryEmbedding& query, const RetrievalIndex& index,
                        std::size_t top_n, std::optional<ItemId> exclude = std::nullopt);

/// sum_m <v_m, c_m^{i_m}> evaluated without a lookup table.
double aqd_direct(const QueryEmbedding& query, const RetrievalIndex& index, std::size_t item);

/// Dense database embeddings (N x D) for the exact baseline.
template <class T>
struct BasicEmbeddingTable {
  std::size_t dim = 0;
  std::vector<T> data;
  std::vector<Label> labels;
  std::vector<ItemId> ids;

  std::size_t size() const noexcept { return ids.size(); }
  std::span<const T> row(std::size_t i) const {
    return std::span<const T>(data).subspan(i * dim, dim);
  }
  void add(std::span<const T> embedding, Label label, ItemId id);
};

using EmbeddingTable = BasicEmbeddingTable<double>;
using EmbeddingTableF32 = BasicEmbeddingTable<float>;

EmbeddingTableF32 to_f32(const EmbeddingTable& table);

/// Ranks by full inner product with `query`.
Ranking exact_search(std::span<const double> query, const EmbeddingTable& table,
                     std::size_t top_n, std::optional<ItemId> exclude = std::nullopt);
Ranking exact_search(std::span<const float> query, const EmbeddingTableF32& table,
                     std::size_t top_n, std::optional<ItemId> exclude = std::nullopt);

/// z with each of its M sub-vectors l2-normalized.
Vec normalize_subvectors(std::span<const double> z, std::size_t num_books);

/// Embeds and hard-encodes every item.
RetrievalIndex encode_database(const ModelParams& params,
                               std::span<const PyramidDescriptors> items,
                               std::span<const Label> labels, std::span<const ItemId> ids);

/// Sub-normalized embeddings, the exact counterpart of AQD scoring.
EmbeddingTable embed_database(const ModelParams& params,
                              std::span<const PyramidDescriptors> items,
                              std::span<const Label> labels, std::span<const ItemId> ids);

}  // namespace phpq
