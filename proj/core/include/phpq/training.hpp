#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phpq/losses.hpp"
#include "phpq/model.hpp"
#include "phpq/optimizer.hpp"
#include "phpq/pooling.hpp"
#include "phpq/quantization.hpp"

namespace phpq {

/// Pools every sample once; feature maps are constants during training.
std::vector<PyramidDescriptors> pool_dataset(std::span<const FeatureMapSet> samples,
                                             const FocusFactors& rhos);

struct LossBreakdown {
  double sr_cel = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
};

struct BatchForward {
  bool valid = false;
  std::vector<Label> labels;
  std::vector<PhpForward> php;
  std::vector<SoftQuantForward> quant;
  DenseArray effective;        // normalized codebook snapshot
  DenseArray reconstructions;  // N x D
  DenseArray logits;           // N x Nc
  LossValue sr_cel;
  LossValue contrastive;
  LossBreakdown loss;
};

/// Embedding z of one pooled sample.
Vec embed(const ModelParams& params, const PyramidDescriptors& descriptors);

BatchForward forward_batch(const ModelParams& params,
                           std::span<const PyramidDescriptors> batch,
                           std::span<const Label> labels);
BatchForward forward_batch(const ModelParams& params, std::span<const FeatureMapSet> batch);

/// Reverse pass for explicit upstream gradients on the logits (N x Nc) and
/// the reconstructions (N x D).
ModelGrads backward_from(const ModelParams& params, const BatchForward& forward,
                         const DenseArray& d_logits, const DenseArray& d_reconstructions);

/// Gradient of forward.loss.total with respect to every parameter.
ModelGrads backward_batch(const ModelParams& params, const BatchForward& forward);

struct TrainConfig {
  std::size_t epochs = 70;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  bool kmeans_init = false;
  std::size_t kmeans_iterations = 10;

  void validate(const ModelHyper& hyper) const;
};

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown loss;  // sample-weighted mean over the epoch's batches
  std::optional<double> validation_map;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  AdamOptimizer optimizer;
  std::optional<std::size_t> best_epoch;  // by validation MAP, when logged
};

/// Called after every epoch; may return a validation MAP to log.
using EpochHook = std::function<std::optional<double>(const ModelParams&, std::size_t)>;

/// Mini-batch training with seeded per-epoch shuffling. The last partial batch
/// is kept. Throws NumericError naming the batch when the loss is not finite.
TrainResult train(ModelParams params, std::span<const PyramidDescriptors> samples,
                  std::span<const Label> labels, const TrainConfig& config,
                  const EpochHook& hook = {});

}  // namespace phpq
