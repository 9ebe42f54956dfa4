#include "phpq/quantization.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <string>

#include "phpq/error.hpp"

namespace phpq {

Codebook Codebook::random(std::size_t num_books, std::size_t book_size, std::size_t sub_dim,
                          std::mt19937_64& rng) {
  Codebook cb{num_books, book_size, sub_dim, DenseArray({num_books, book_size, sub_dim})};
  cb.validate();
  fill_gaussian(cb.raw.values(), rng);
  return cb;
}

void Codebook::validate() const {
  if (num_books == 0 || sub_dim == 0) throw ParamError("codebook needs M >= 1 and d >= 1");
  if (book_size < 2) throw ParamError("codebook needs K >= 2");
  if (raw.shape() != std::vector<std::size_t>{num_books, book_size, sub_dim}) {
    throw ShapeError("codebook parameters must be shaped M x K x d");
  }
}

DenseArray Codebook::effective() const {
  DenseArray out(raw.shape());
  const auto src = raw.values();
  auto dst = out.values();
  for (std::size_t row = 0; row < num_books * book_size; ++row) {
    const Vec unit = l2_normalize(src.subspan(row * sub_dim, sub_dim));
    std::copy(unit.begin(), unit.end(), dst.begin() + static_cast<std::ptrdiff_t>(row * sub_dim));
  }
  return out;
}

SubCodebookView sub_codebook(const DenseArray& effective, std::size_t m) {
  const std::size_t k = effective.extent(1);
  const std::size_t d = effective.extent(2);
  return {effective.values().subspan(m * k * d, k * d), k, d};
}

std::size_t code_field_bits(std::size_t book_size) {
  if (book_size < 2) throw ParamError("K must be >= 2");
  return static_cast<std::size_t>(std::bit_width(book_size - 1));
}

std::vector<Vec> split_embedding(std::span<const double> z, std::size_t num_books) {
  if (num_books == 0 || z.size() % num_books != 0) {
    throw ParamError("embedding length " + std::to_string(z.size()) +
                     " is not divisible by M=" + std::to_string(num_books));
  }
  const std::size_t d = z.size() / num_books;
  std::vector<Vec> parts;
  parts.reserve(num_books);
  for (std::size_t m = 0; m < num_books; ++m) {
    const auto s = z.subspan(m * d, d);
    parts.emplace_back(s.begin(), s.end());
  }
  return parts;
}

Vec attention(std::span<const double> z_m, const SubCodebookView& codebook, double alpha) {
  if (z_m.size() != codebook.sub_dim) throw ShapeError("attention: sub-vector width mismatch");
  Vec sims(codebook.book_size);
  for (std::size_t k = 0; k < codebook.book_size; ++k) sims[k] = dot(z_m, codebook.codeword(k));
  return softmax_scaled(sims, 2.0 * alpha);
}

PartialRefinement partial_refine(std::span<const double> scores, std::size_t kappa) {
  const std::size_t k_total = scores.size();
  if (kappa < 1 || kappa > k_total) {
    throw ParamError("kappa must lie in [1, " + std::to_string(k_total) + "], got " +
                     std::to_string(kappa));
  }
  PartialRefinement out;
  if (kappa == k_total) {
    out.refined.assign(scores.begin(), scores.end());
    out.mask.assign(k_total, 1);
    return out;
  }

  std::vector<std::size_t> order(k_total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kappa),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });

  out.mask.assign(k_total, 0);
  out.refined.assign(k_total, 0.0);
  double kept = 0.0;
  for (std::size_t i = 0; i < kappa; ++i) {
    out.mask[order[i]] = 1;
    kept += scores[order[i]];
  }
  for (std::size_t k = 0; k < k_total; ++k) {
    if (out.mask[k]) out.refined[k] = scores[k] / kept;
  }
  return out;
}

Vec soft_reconstruct(std::span<const double> refined, const SubCodebookView& codebook) {
  if (refined.size() != codebook.book_size) throw ShapeError("soft_reconstruct: K mismatch");
  Vec out(codebook.sub_dim, 0.0);
  for (std::size_t k = 0; k < codebook.book_size; ++k) {
    const double w = refined[k];
    if (w == 0.0) continue;
    const auto c = codebook.codeword(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * c[j];
  }
  return out;
}

QuantCode hard_encode(std::span<const double> z, const DenseArray& effective) {
  const std::size_t m_total = effective.extent(0);
  const auto parts = split_embedding(z, m_total);
  QuantCode code;
  code.indices.resize(m_total);
  for (std::size_t m = 0; m < m_total; ++m) {
    const auto book = sub_codebook(effective, m);
    if (parts[m].size() != book.sub_dim) throw ShapeError("hard_encode: sub-vector width");
    const Vec unit = l2_normalize(parts[m]);
    std::size_t best = 0;
    double best_sim = dot(unit, book.codeword(0));
    for (std::size_t k = 1; k < book.book_size; ++k) {
      const double sim = dot(unit, book.codeword(k));
      if (sim > best_sim) {
        best_sim = sim;
        best = k;
      }
    }
    code.indices[m] = static_cast<std::uint32_t>(best);
  }
  return code;
}

QuantCode hard_encode(std::span<const double> z, const Codebook& codebook) {
  return hard_encode(z, codebook.effective());
}

SoftQuantForward soft_quantize(std::span<const double> z, const DenseArray& effective,
                               std::size_t num_books, double alpha, std::size_t kappa) {
  if (!(alpha > 0.0)) throw ParamError("alpha must be positive");
  SoftQuantForward fwd;
  fwd.alpha = alpha;
  fwd.kappa = kappa;
  fwd.sub_raw = split_embedding(z, num_books);
  fwd.reconstruction.reserve(z.size());
  for (std::size_t m = 0; m < num_books; ++m) {
    const auto book = sub_codebook(effective, m);
    if (fwd.sub_raw[m].size() != book.sub_dim) {
      throw ShapeError("soft_quantize: embedding width does not match M * d");
    }
    fwd.sub_unit.push_back(l2_normalize(fwd.sub_raw[m]));
    fwd.scores.push_back(attention(fwd.sub_unit.back(), book, alpha));
    fwd.refined.push_back(partial_refine(fwd.scores.back(), kappa));
    const Vec part = soft_reconstruct(fwd.refined.back().refined, book);
    fwd.reconstruction.insert(fwd.reconstruction.end(), part.begin(), part.end());
  }
  fwd.valid = true;
  return fwd;
}

SoftQuantForward soft_quantize(std::span<const double> z, const Codebook& codebook,
                               double alpha, std::size_t kappa) {
  return soft_quantize(z, codebook.effective(), codebook.num_books, alpha, kappa);
}

Vec quant_backward_effective(const SoftQuantForward& cache, const DenseArray& effective,
                             std::span<const double> upstream, DenseArray& d_effective) {
  if (!cache.valid) throw StateError("quant_backward: no forward cache");
  if (upstream.size() != cache.reconstruction.size()) {
    throw ShapeError("quant_backward: upstream width mismatch");
  }
  if (d_effective.shape() != effective.shape()) {
    throw ShapeError("quant_backward: gradient buffer shape mismatch");
  }
  const std::size_t m_total = cache.sub_raw.size();
  const std::size_t k_total = effective.extent(1);
  const std::size_t d = effective.extent(2);
  const double score_scale = 2.0 * cache.alpha;

  Vec dz;
  dz.reserve(upstream.size());
  for (std::size_t m = 0; m < m_total; ++m) {
    const auto book = sub_codebook(effective, m);
    const auto g = upstream.subspan(m * d, d);
    const auto& refined = cache.refined[m].refined;
    const auto& mask = cache.refined[m].mask;
    const auto& unit = cache.sub_unit[m];
    auto d_book = d_effective.values().subspan(m * k_total * d, k_total * d);

    // z^_m = sum_k p~_k c_k
    Vec d_refined(k_total, 0.0);
    for (std::size_t k = 0; k < k_total; ++k) {
      if (!mask[k]) continue;
      d_refined[k] = dot(g, book.codeword(k));
      for (std::size_t j = 0; j < d; ++j) d_book[k * d + j] += refined[k] * g[j];
    }

    // p~ restricted to the mask is a softmax over the surviving scores, so
    // the renormalization and the softmax collapse into one Jacobian.
    double mean = 0.0;
    for (std::size_t k = 0; k < k_total; ++k) mean += refined[k] * d_refined[k];
    Vec d_unit(d, 0.0);
    for (std::size_t k = 0; k < k_total; ++k) {
      if (!mask[k]) continue;
      const double d_score = refined[k] * (d_refined[k] - mean) * score_scale;
      const auto c = book.codeword(k);
      for (std::size_t j = 0; j < d; ++j) {
        d_unit[j] += d_score * c[j];
        d_book[k * d + j] += d_score * unit[j];
      }
    }

    const Vec d_sub = l2_normalize_backward(cache.sub_raw[m], d_unit);
    dz.insert(dz.end(), d_sub.begin(), d_sub.end());
  }
  return dz;
}

DenseArray codebook_backward(const Codebook& codebook, const DenseArray& d_effective) {
  if (d_effective.shape() != codebook.raw.shape()) {
    throw ShapeError("codebook_backward: shape mismatch");
  }
  DenseArray d_raw(codebook.raw.shape());
  const std::size_t d = codebook.sub_dim;
  const auto raw = codebook.raw.values();
  const auto upstream = d_effective.values();
  auto out = d_raw.values();
  for (std::size_t row = 0; row < codebook.num_books * codebook.book_size; ++row) {
    const auto up = upstream.subspan(row * d, d);
    if (std::all_of(up.begin(), up.end(), [](double x) { return x == 0.0; })) continue;
    const Vec g = l2_normalize_backward(raw.subspan(row * d, d), up);
    std::copy(g.begin(), g.end(), out.begin() + static_cast<std::ptrdiff_t>(row * d));
  }
  return d_raw;
}

QuantGradients quant_backward(const SoftQuantForward& cache, const Codebook& codebook,
                              std::span<const double> upstream) {
  const DenseArray effective = codebook.effective();
  DenseArray d_effective(effective.shape());
  Vec dz = quant_backward_effective(cache, effective, upstream, d_effective);
  return {codebook_backward(codebook, d_effective), std::move(dz)};
}

void kmeans_warm_start(Codebook& codebook, const DenseArray& embeddings,
                       std::size_t iterations, std::mt19937_64& rng) {
  codebook.validate();
  if (embeddings.rank() != 2 || embeddings.extent(1) != codebook.embedding_dim()) {
    throw ShapeError("kmeans_warm_start: embeddings must be N x (M*d)");
  }
  const std::size_t n = embeddings.extent(0);
  const std::size_t k_total = codebook.book_size;
  const std::size_t d = codebook.sub_dim;
  if (n < k_total) throw ParamError("kmeans_warm_start: need at least K samples");

  for (std::size_t m = 0; m < codebook.num_books; ++m) {
    std::vector<Vec> points;
    points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      points.push_back(l2_normalize(embeddings.row(i).subspan(m * d, d)));
    }
    std::vector<std::size_t> pick(n);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    std::shuffle(pick.begin(), pick.end(), rng);
    std::vector<Vec> centers;
    for (std::size_t k = 0; k < k_total; ++k) centers.push_back(points[pick[k]]);

    std::vector<std::size_t> assign(n, 0);
    for (std::size_t it = 0; it < iterations; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_sim = dot(points[i], centers[0]);
        for (std::size_t k = 1; k < k_total; ++k) {
          const double sim = dot(points[i], centers[k]);
          if (sim > best_sim) {
            best_sim = sim;
            best = k;
          }
        }
        assign[i] = best;
      }
      std::vector<Vec> sums(k_total, Vec(d, 0.0));
      std::vector<std::size_t> counts(k_total, 0);
      for (std::size_t i = 0; i < n; ++i) {
        ++counts[assign[i]];
        for (std::size_t j = 0; j < d; ++j) sums[assign[i]][j] += points[i][j];
      }
      for (std::size_t k = 0; k < k_total; ++k) {
        // empty clusters keep their previous center
        if (counts[k] > 0) centers[k] = l2_normalize(sums[k]);
      }
    }
    for (std::size_t k = 0; k < k_total; ++k) {
      std::copy(centers[k].begin(), centers[k].end(),
                codebook.raw.values().begin() +
                    static_cast<std::ptrdiff_t>((m * k_total + k) * d));
    }
  }
}

}  // namespace phpq
