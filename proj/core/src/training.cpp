#include "phpq/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "phpq/error.hpp"

namespace phpq {

std::vector<PyramidDescriptors> pool_dataset(std::span<const FeatureMapSet> samples,
                                             const FocusFactors& rhos) {
  std::vector<PyramidDescriptors> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(pool_pyramid(s, rhos));
  return out;
}

Vec embed(const ModelParams& params, const PyramidDescriptors& descriptors) {
  return php_forward(descriptors, params.php, params.hyper.fusion).z;
}

BatchForward forward_batch(const ModelParams& params,
                           std::span<const PyramidDescriptors> batch,
                           std::span<const Label> labels) {
  if (batch.empty()) throw ParamError("forward_batch: empty batch");
  if (labels.size() != batch.size()) throw ShapeError("forward_batch: one label per sample");
  const ModelHyper& hyper = params.hyper;
  const std::size_t n = batch.size();
  const std::size_t dim = hyper.embedding_dim;

  BatchForward fwd;
  fwd.labels.assign(labels.begin(), labels.end());
  fwd.effective = params.codebook.effective();
  fwd.reconstructions = DenseArray({n, dim});
  fwd.php.reserve(n);
  fwd.quant.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    fwd.php.push_back(php_forward(batch[i], params.php, hyper.fusion));
    fwd.quant.push_back(soft_quantize(fwd.php.back().z, fwd.effective, hyper.num_books,
                                      hyper.alpha, hyper.kappa));
    const auto& rec = fwd.quant.back().reconstruction;
    std::copy(rec.begin(), rec.end(), fwd.reconstructions.row(i).begin());
  }

  fwd.logits = DenseArray({n, hyper.num_classes});
  for (std::size_t i = 0; i < n; ++i) {
    const Vec o = linear_forward(params.classifier, fwd.reconstructions.row(i));
    std::copy(o.begin(), o.end(), fwd.logits.row(i).begin());
  }

  fwd.sr_cel = sr_cel(fwd.logits, labels, hyper.loss.tau);
  fwd.loss.sr_cel = fwd.sr_cel.value;
  if (hyper.loss.gamma > 0.0 && n >= 2) {
    fwd.contrastive = contrastive(fwd.reconstructions, labels, hyper.loss);
    fwd.loss.contrastive = fwd.contrastive.value;
  } else {
    fwd.contrastive = LossValue{0.0, DenseArray({n, dim}), {}};
  }
  fwd.loss.total = total_loss(fwd.loss.sr_cel, fwd.loss.contrastive, hyper.loss.gamma);
  fwd.valid = true;
  return fwd;
}

BatchForward forward_batch(const ModelParams& params, std::span<const FeatureMapSet> batch) {
  std::vector<PyramidDescriptors> pooled;
  std::vector<Label> labels;
  for (const auto& s : batch) {
    if (!s.label) throw InputError("forward_batch: sample without label");
    pooled.push_back(pool_pyramid(s, params.hyper.rhos));
    labels.push_back(*s.label);
  }
  return forward_batch(params, pooled, labels);
}

ModelGrads backward_from(const ModelParams& params, const BatchForward& forward,
                         const DenseArray& d_logits, const DenseArray& d_reconstructions) {
  if (!forward.valid) throw StateError("backward_batch: no forward cache");
  if (d_logits.shape() != forward.logits.shape() ||
      d_reconstructions.shape() != forward.reconstructions.shape()) {
    throw ShapeError("backward_batch: upstream gradient shapes do not match the forward pass");
  }
  const std::size_t n = forward.php.size();
  ModelGrads grads = ModelGrads::zeros_like(params);
  DenseArray d_effective(forward.effective.shape());

  // Fixed sample order keeps the accumulation reproducible.
  for (std::size_t i = 0; i < n; ++i) {
    Vec d_rec = linear_backward(params.classifier, forward.reconstructions.row(i),
                                d_logits.row(i), grads.classifier);
    const auto extra = d_reconstructions.row(i);
    for (std::size_t j = 0; j < d_rec.size(); ++j) d_rec[j] += extra[j];
    const Vec d_z =
        quant_backward_effective(forward.quant[i], forward.effective, d_rec, d_effective);
    php_backward_accumulate(forward.php[i], params.php, d_z, grads.php);
  }
  grads.codebook_raw = codebook_backward(params.codebook, d_effective);
  return grads;
}

ModelGrads backward_batch(const ModelParams& params, const BatchForward& forward) {
  if (!forward.valid) throw StateError("backward_batch: no forward cache");
  DenseArray d_rec = forward.contrastive.grad;
  const double gamma = params.hyper.loss.gamma;
  for (double& x : d_rec.values()) x *= gamma;
  return backward_from(params, forward, forward.sr_cel.grad, d_rec);
}

void TrainConfig::validate(const ModelHyper& hyper) const {
  if (batch_size < 1) throw ParamError("batch size must be >= 1");
  if (hyper.loss.gamma > 0.0 && batch_size < 2) {
    throw ParamError("batch size must be >= 2 when the contrastive weight is positive");
  }
  if (learning_rate < 0.0) throw ParamError("learning rate must be >= 0");
}

TrainResult train(ModelParams params, std::span<const PyramidDescriptors> samples,
                  std::span<const Label> labels, const TrainConfig& config,
                  const EpochHook& hook) {
  params.validate();
  config.validate(params.hyper);
  if (samples.empty()) throw ParamError("train: empty dataset");
  if (labels.size() != samples.size()) throw ShapeError("train: one label per sample");

  std::mt19937_64 rng(config.seed);
  if (config.kmeans_init) {
    const std::size_t n = samples.size();
    DenseArray embeddings({n, params.hyper.embedding_dim});
    for (std::size_t i = 0; i < n; ++i) {
      const Vec z = embed(params, samples[i]);
      std::copy(z.begin(), z.end(), embeddings.row(i).begin());
    }
    kmeans_warm_start(params.codebook, embeddings, config.kmeans_iterations, rng);
  }

  TrainResult result{std::move(params), {}, AdamOptimizer({config.learning_rate}), {}};
  ModelParams& model = result.params;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best_map = -1.0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<PyramidDescriptors> batch;
      std::vector<Label> batch_labels;
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(samples[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      const BatchForward fwd = forward_batch(model, batch, batch_labels);
      if (!std::isfinite(fwd.loss.total)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + " (samples " +
                           std::to_string(start) + ".." + std::to_string(stop - 1) + ")");
      }
      const ModelGrads grads = backward_batch(model, fwd);

      const auto values = model.tensors();
      const auto grad_tensors = grads.tensors();
      std::vector<ParamSlot> slots;
      for (std::size_t t = 0; t < values.size(); ++t) slots.push_back({values[t], grad_tensors[t]});
      result.optimizer.step(slots);

      const double weight = static_cast<double>(stop - start);
      log.loss.sr_cel += fwd.loss.sr_cel * weight;
      log.loss.contrastive += fwd.loss.contrastive * weight;
      log.loss.total += fwd.loss.total * weight;
    }
    const double inv = 1.0 / static_cast<double>(order.size());
    log.loss.sr_cel *= inv;
    log.loss.contrastive *= inv;
    log.loss.total *= inv;
    if (hook) {
      log.validation_map = hook(model, epoch);
      if (log.validation_map && *log.validation_map > best_map) {
        best_map = *log.validation_map;
        result.best_epoch = epoch;
      }
    }
    result.log.push_back(log);
  }
  return result;
}

}  // namespace phpq
