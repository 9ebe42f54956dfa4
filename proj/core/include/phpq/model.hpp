#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "phpq/losses.hpp"
#include "phpq/numerics.hpp"
#include "phpq/pooling.hpp"
#include "phpq/quantization.hpp"

namespace phpq {

/// Every fixed hyperparameter of the model.
struct ModelHyper {
  PyramidDims dims;
  std::size_t embedding_dim = 64;   // D
  std::size_t num_books = 4;        // M
  std::size_t book_size = 16;       // K
  std::size_t num_classes = 20;     // Nc
  FocusFactors rhos;
  FusionMode fusion = FusionMode::pyramid;
  double alpha = 16.0;
  std::size_t kappa = 5;
  LossConfig loss;

  std::size_t sub_dim() const { return embedding_dim / num_books; }
  std::size_t code_bits() const { return num_books * code_field_bits(book_size); }
  void validate() const;
  friend bool operator==(const ModelHyper&, const ModelHyper&) = default;
};

/// Ablation switches applied on top of a base configuration.
enum class Variant : std::uint8_t {
  standard,
  gap,             // all rho = 1
  gmp,             // all rho = infinity
  ascending_rho,   // rho = (1, 2, 3)
  last_stage,      // skip fusion, pool stage4 only
  full_attention,  // kappa = K
  no_contrastive,  // gamma = 0
};

const char* to_string(Variant v) noexcept;
Variant parse_variant(const std::string& name);
ModelHyper apply_variant(ModelHyper hyper, Variant variant);

/// Full trainable state: fusion chain, codebook, classifier on z^.
struct ModelParams {
  ModelHyper hyper;
  PhpParams php;
  Codebook codebook;
  LinearLayer classifier;  // Nc x D, with bias

  static ModelParams init(const ModelHyper& hyper, std::uint64_t seed);

  /// Parameter tensors in a fixed order (optimizer and checkpoint layout).
  std::vector<DenseArray*> tensors();
  std::vector<const DenseArray*> tensors() const;
  void validate() const;
};

struct ModelGrads {
  PhpParams php;
  DenseArray codebook_raw;
  LinearLayer classifier;

  static ModelGrads zeros_like(const ModelParams& params);
  std::vector<const DenseArray*> tensors() const;
};

}  // namespace phpq
