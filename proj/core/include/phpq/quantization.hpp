#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "phpq/numerics.hpp"

namespace phpq {

/// M sub-codebooks of K codewords of length d. `raw` holds unconstrained
/// trainable parameters; the codewords used everywhere are their l2
/// normalizations (see effective()).
struct Codebook {
  std::size_t num_books = 0;      // M
  std::size_t book_size = 0;      // K
  std::size_t sub_dim = 0;        // d
  DenseArray raw;                 // M x K x d

  static Codebook random(std::size_t num_books, std::size_t book_size, std::size_t sub_dim,
                         std::mt19937_64& rng);

  std::size_t embedding_dim() const noexcept { return num_books * sub_dim; }
  /// Row-normalized copy of `raw`.
  DenseArray effective() const;
  void validate() const;
};

/// Read-only view of one normalized sub-codebook (K x d, row-major).
struct SubCodebookView {
  std::span<const double> data;
  std::size_t book_size;
  std::size_t sub_dim;

  std::span<const double> codeword(std::size_t k) const {
    return data.subspan(k * sub_dim, sub_dim);
  }
};

SubCodebookView sub_codebook(const DenseArray& effective, std::size_t m);

/// Codeword indices of one item, one per sub-codebook.
struct QuantCode {
  std::vector<std::uint32_t> indices;
  friend bool operator==(const QuantCode&, const QuantCode&) = default;
};

/// ceil(log2(K)) bits per code field.
std::size_t code_field_bits(std::size_t book_size);

std::vector<Vec> split_embedding(std::span<const double> z, std::size_t num_books);

/// softmax_k(2 * alpha * <z_m, c_m^k>). Inputs must already be normalized.
Vec attention(std::span<const double> z_m, const SubCodebookView& codebook, double alpha);

struct PartialRefinement {
  Vec refined;                      // p~, sums to 1
  std::vector<std::uint8_t> mask;   // pi, exactly kappa ones
};

/// Keeps the kappa largest scores (ties to the lower index), zeroes the rest
/// and renormalizes. kappa == K returns the scores untouched.
PartialRefinement partial_refine(std::span<const double> scores, std::size_t kappa);

/// sum_k p~_k c_k.
Vec soft_reconstruct(std::span<const double> refined, const SubCodebookView& codebook);

/// i_m = argmax_k <z_m, c_m^k>, ties to the lowest index.
QuantCode hard_encode(std::span<const double> z, const DenseArray& effective);
QuantCode hard_encode(std::span<const double> z, const Codebook& codebook);

/// Forward state of soft quantization for one embedding.
struct SoftQuantForward {
  bool valid = false;
  double alpha = 0.0;
  std::size_t kappa = 0;
  std::vector<Vec> sub_raw;    // z_m before normalization
  std::vector<Vec> sub_unit;   // z_m / ||z_m||
  std::vector<Vec> scores;     // p_m
  std::vector<PartialRefinement> refined;
  Vec reconstruction;          // z^ (length D)
};

SoftQuantForward soft_quantize(std::span<const double> z, const DenseArray& effective,
                               std::size_t num_books, double alpha, std::size_t kappa);
SoftQuantForward soft_quantize(std::span<const double> z, const Codebook& codebook,
                               double alpha, std::size_t kappa);

/// Reverse pass up to the normalized codewords: adds dL/d(effective codebook)
/// into `d_effective` (M x K x d) and returns dL/dz. Masked-out codewords
/// receive exactly zero.
Vec quant_backward_effective(const SoftQuantForward& cache, const DenseArray& effective,
                             std::span<const double> upstream, DenseArray& d_effective);

/// Maps dL/d(effective codewords) to dL/d(raw codewords).
DenseArray codebook_backward(const Codebook& codebook, const DenseArray& d_effective);

struct QuantGradients {
  DenseArray codebook_raw;  // M x K x d
  Vec z;
};

QuantGradients quant_backward(const SoftQuantForward& cache, const Codebook& codebook,
                              std::span<const double> upstream);

/// Spherical k-means over normalized sub-vectors of `embeddings` (N x D),
/// written into codebook.raw. Used as an optional warm start.
void kmeans_warm_start(Codebook& codebook, const DenseArray& embeddings,
                       std::size_t iterations, std::mt19937_64& rng);

}  // namespace phpq
