#include "phpq/retrieval.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <string>

#include "phpq/error.hpp"
#include "phpq/training.hpp"

namespace phpq {
namespace {

Ranking select_top(std::span<const double> scores, std::span<const ItemId> ids,
                   std::size_t top_n, std::optional<ItemId> exclude) {
  if (ids.empty()) throw ParamError("search over an empty database");
  if (top_n < 1 || top_n > ids.size()) {
    throw ParamError("topN must lie in [1, " + std::to_string(ids.size()) + "], got " +
                     std::to_string(top_n));
  }
  std::vector<std::uint32_t> order;
  order.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (exclude && ids[i] == *exclude) continue;
    order.push_back(static_cast<std::uint32_t>(i));
  }
  const std::size_t keep = std::min(top_n, order.size());
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  };
  if (keep < order.size()) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                     order.end(), better);
    order.resize(keep);
  }
  std::sort(order.begin(), order.end(), better);
  Ranking out;
  out.reserve(keep);
  for (auto i : order) out.push_back({ids[i], scores[i]});
  return out;
}

float dot_f32(std::span<const float> a, std::span<const float> b) noexcept {
  // Independent lanes let the compiler vectorize without reassociation flags.
  std::array<float, 8> acc{};
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  float total = 0.0f;
  for (; i < n; ++i) total += a[i] * b[i];
  return total + ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

}  // namespace

RetrievalIndex::RetrievalIndex(const Codebook& codebook) : RetrievalIndex(codebook.effective()) {}

RetrievalIndex::RetrievalIndex(DenseArray effective)
    : num_books_(effective.extent(0)),
      book_size_(effective.extent(1)),
      sub_dim_(effective.extent(2)),
      codebook_(std::move(effective)) {
  if (codebook_.rank() != 3) throw ShapeError("index codebook must be M x K x d");
  if (book_size_ < 2 || book_size_ > std::numeric_limits<std::uint16_t>::max() + 1u) {
    throw ParamError("index supports 2 <= K <= 65536");
  }
}

void RetrievalIndex::add(const QuantCode& code, Label label, ItemId id) {
  if (code.indices.size() != num_books_) throw ShapeError("index add: code length != M");
  for (auto idx : code.indices) {
    if (idx >= book_size_) throw ParamError("index add: codeword index out of range");
    codes_.push_back(static_cast<std::uint16_t>(idx));
  }
  labels_.push_back(label);
  ids_.push_back(id);
}

QuantCode RetrievalIndex::code(std::size_t item) const {
  QuantCode c;
  const auto row = codes().subspan(item * num_books_, num_books_);
  c.indices.assign(row.begin(), row.end());
  return c;
}

QueryEmbedding make_query(std::span<const double> z, std::size_t num_books) {
  const auto parts = split_embedding(z, num_books);
  QueryEmbedding q{num_books, z.size() / num_books, {}};
  q.units.reserve(z.size());
  for (const auto& p : parts) {
    const Vec u = l2_normalize(p);
    q.units.insert(q.units.end(), u.begin(), u.end());
  }
  return q;
}

Vec normalize_subvectors(std::span<const double> z, std::size_t num_books) {
  return make_query(z, num_books).units;
}

LookupTable build_lookup(const QueryEmbedding& query, const DenseArray& effective) {
  if (effective.rank() != 3 || effective.extent(0) != query.num_books ||
      effective.extent(2) != query.sub_dim) {
    throw ShapeError("build_lookup: query and codebook shapes do not compose");
  }
  LookupTable table{query.num_books, effective.extent(1), {}};
  table.entries.resize(table.num_books * table.book_size);
  for (std::size_t m = 0; m < table.num_books; ++m) {
    const auto book = sub_codebook(effective, m);
    const auto v = query.sub(m);
    for (std::size_t k = 0; k < table.book_size; ++k) {
      table.entries[m * table.book_size + k] = dot(v, book.codeword(k));
    }
  }
  return table;
}

Ranking aqd_search(const QueryEmbedding& query, const RetrievalIndex& index, std::size_t top_n,
                   std::optional<ItemId> exclude) {
  if (index.empty()) throw ParamError("aqd_search: empty index");
  const LookupTable lut = build_lookup(query, index.codebook());
  const std::size_t m_total = index.num_books();
  const std::size_t k_total = index.book_size();
  const auto codes = index.codes();
  std::vector<double> scores(index.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const std::uint16_t* row = codes.data() + i * m_total;
    double s = 0.0;
    for (std::size_t m = 0; m < m_total; ++m) s += lut.entries[m * k_total + row[m]];
    scores[i] = s;
  }
  return select_top(scores, index.ids(), top_n, exclude);
}

Ranking aqd_search_fast(const QueryEmbedding& query, const RetrievalIndex& index,
                        std::size_t top_n, std::optional<ItemId> exclude) {
  if (index.empty()) throw ParamError("aqd_search: empty index");
  const LookupTable lut = build_lookup(query, index.codebook());
  const std::vector<float> table(lut.entries.begin(), lut.entries.end());
  const std::size_t m_total = index.num_books();
  const std::size_t k_total = index.book_size();
  const auto codes = index.codes();
  std::vector<double> scores(index.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const std::uint16_t* row = codes.data() + i * m_total;
    float s = 0.0f;
    for (std::size_t m = 0; m < m_total; ++m) s += table[m * k_total + row[m]];
    scores[i] = s;
  }
  return select_top(scores, index.ids(), top_n, exclude);
}

double aqd_direct(const QueryEmbedding& query, const RetrievalIndex& index, std::size_t item) {
  const QuantCode c = index.code(item);
  double s = 0.0;
  for (std::size_t m = 0; m < index.num_books(); ++m) {
    s += dot(query.sub(m), sub_codebook(index.codebook(), m).codeword(c.indices[m]));
  }
  return s;
}

template <class T>
void BasicEmbeddingTable<T>::add(std::span<const T> embedding, Label label, ItemId id) {
  if (dim == 0) dim = embedding.size();
  if (embedding.size() != dim) throw ShapeError("embedding table: width mismatch");
  data.insert(data.end(), embedding.begin(), embedding.end());
  labels.push_back(label);
  ids.push_back(id);
}

template struct BasicEmbeddingTable<double>;
template struct BasicEmbeddingTable<float>;

EmbeddingTableF32 to_f32(const EmbeddingTable& table) {
  EmbeddingTableF32 out;
  out.dim = table.dim;
  out.data.assign(table.data.begin(), table.data.end());
  out.labels = table.labels;
  out.ids = table.ids;
  return out;
}

Ranking exact_search(std::span<const double> query, const EmbeddingTable& table,
                     std::size_t top_n, std::optional<ItemId> exclude) {
  if (table.size() == 0) throw ParamError("exact_search: empty database");
  if (query.size() != table.dim) throw ShapeError("exact_search: query width mismatch");
  std::vector<double> scores(table.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = dot(query, table.row(i));
  return select_top(scores, table.ids, top_n, exclude);
}

Ranking exact_search(std::span<const float> query, const EmbeddingTableF32& table,
                     std::size_t top_n, std::optional<ItemId> exclude) {
  if (table.size() == 0) throw ParamError("exact_search: empty database");
  if (query.size() != table.dim) throw ShapeError("exact_search: query width mismatch");
  std::vector<double> scores(table.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = dot_f32(query, table.row(i));
  return select_top(scores, table.ids, top_n, exclude);
}

RetrievalIndex encode_database(const ModelParams& params,
                               std::span<const PyramidDescriptors> items,
                               std::span<const Label> labels, std::span<const ItemId> ids) {
  if (items.size() != labels.size() || items.size() != ids.size()) {
    throw ShapeError("encode_database: items, labels and ids must align");
  }
  RetrievalIndex index(params.codebook);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Vec z = embed(params, items[i]);
    index.add(hard_encode(z, index.codebook()), labels[i], ids[i]);
  }
  return index;
}

EmbeddingTable embed_database(const ModelParams& params,
                              std::span<const PyramidDescriptors> items,
                              std::span<const Label> labels, std::span<const ItemId> ids) {
  if (items.size() != labels.size() || items.size() != ids.size()) {
    throw ShapeError("embed_database: items, labels and ids must align");
  }
  EmbeddingTable table;
  table.dim = params.hyper.embedding_dim;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Vec z = normalize_subvectors(embed(params, items[i]), params.hyper.num_books);
    table.add(z, labels[i], ids[i]);
  }
  return table;
}

}  // namespace phpq
