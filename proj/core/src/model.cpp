#include "phpq/model.hpp"

#include <random>

#include "phpq/error.hpp"

namespace phpq {

void ModelHyper::validate() const {
  rhos.validate();
  loss.validate();
  if (num_books == 0 || embedding_dim % num_books != 0) {
    throw ParamError("embedding dimension D=" + std::to_string(embedding_dim) +
                     " must be divisible by M=" + std::to_string(num_books));
  }
  if (book_size < 2) throw ParamError("K must be >= 2");
  if (kappa < 1 || kappa > book_size) throw ParamError("kappa must lie in [1, K]");
  if (num_classes < 1) throw ParamError("need at least one class");
  if (!(alpha > 0.0)) throw ParamError("alpha must be positive");
}

const char* to_string(Variant v) noexcept {
  switch (v) {
    case Variant::standard: return "standard";
    case Variant::gap: return "gap";
    case Variant::gmp: return "gmp";
    case Variant::ascending_rho: return "ascending_rho";
    case Variant::last_stage: return "last_stage";
    case Variant::full_attention: return "full_attn";
    case Variant::no_contrastive: return "no_cl";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (auto v : {Variant::standard, Variant::gap, Variant::gmp, Variant::ascending_rho,
                 Variant::last_stage, Variant::full_attention, Variant::no_contrastive}) {
    if (name == to_string(v)) return v;
  }
  throw ParamError("unknown variant '" + name + "'");
}

ModelHyper apply_variant(ModelHyper hyper, Variant variant) {
  switch (variant) {
    case Variant::standard: break;
    case Variant::gap: hyper.rhos = FocusFactors::average(); break;
    case Variant::gmp: hyper.rhos = FocusFactors::max(); break;
    case Variant::ascending_rho: hyper.rhos = FocusFactors::ascending(); break;
    case Variant::last_stage: hyper.fusion = FusionMode::last_stage_only; break;
    case Variant::full_attention: hyper.kappa = hyper.book_size; break;
    case Variant::no_contrastive: hyper.loss.gamma = 0.0; break;
  }
  return hyper;
}

ModelParams ModelParams::init(const ModelHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.hyper = hyper;
  p.php = PhpParams::init(hyper.dims, hyper.embedding_dim, rng);
  p.codebook = Codebook::random(hyper.num_books, hyper.book_size, hyper.sub_dim(), rng);
  p.classifier = LinearLayer::xavier(hyper.num_classes, hyper.embedding_dim, rng);
  return p;
}

std::vector<DenseArray*> ModelParams::tensors() {
  return {&php.fc1.weights,         &php.fc1.bias,   &php.fc2.weights,
          &php.fc2.bias,            &php.transform_g.weights,
          &php.transform_g.bias,    &codebook.raw,   &classifier.weights,
          &classifier.bias};
}

std::vector<const DenseArray*> ModelParams::tensors() const {
  auto mut = const_cast<ModelParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

void ModelParams::validate() const {
  hyper.validate();
  php.validate(hyper.dims);
  codebook.validate();
  classifier.validate();
  if (php.embedding_dim() != hyper.embedding_dim ||
      codebook.embedding_dim() != hyper.embedding_dim ||
      codebook.num_books != hyper.num_books || codebook.book_size != hyper.book_size ||
      classifier.in_dim() != hyper.embedding_dim ||
      classifier.out_dim() != hyper.num_classes) {
    throw ShapeError("model parameters disagree with the hyperparameters");
  }
}

ModelGrads ModelGrads::zeros_like(const ModelParams& params) {
  return {params.php.zeros_like(), DenseArray(params.codebook.raw.shape()),
          LinearLayer::zeros(params.classifier.out_dim(), params.classifier.in_dim(),
                             params.classifier.has_bias)};
}

std::vector<const DenseArray*> ModelGrads::tensors() const {
  return {&php.fc1.weights,      &php.fc1.bias,   &php.fc2.weights,
          &php.fc2.bias,         &php.transform_g.weights,
          &php.transform_g.bias, &codebook_raw,   &classifier.weights,
          &classifier.bias};
}

}  // namespace phpq
