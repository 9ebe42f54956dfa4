#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phpq/manifest.hpp"
#include "phpq/retrieval.hpp"
#include "phpq/training.hpp"
#include "phpq_cli/run_config.hpp"

namespace phpq::cli {

struct Dataset {
  DatasetManifest manifest;
  std::vector<FeatureMapSet> samples;  // aligned with manifest.items
  DatasetSplit split;
};

Dataset load_dataset(const RunConfig& config);

/// Trains from a fresh initialization, streaming one line per epoch to `log`.
TrainResult run_training(const RunConfig& config, const Dataset& data, std::ostream& log);

struct Evaluation {
  std::size_t num_books = 0;
  std::size_t book_size = 0;
  std::size_t code_bits = 0;
  std::size_t queries = 0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
  double aqd_map = 0.0;
  double exact_map = 0.0;
  std::vector<std::size_t> cutoffs;
  std::vector<double> aqd_precision;
  std::vector<double> exact_precision;
  std::vector<std::string> warnings;
};

/// Encodes the database split with `params`.
RetrievalIndex build_index(const ModelParams& params, const Dataset& data);

/// AQD rankings for every query item, in query-split order.
std::vector<Ranking> query_rankings(const ModelParams& params, const Dataset& data,
                                    const RetrievalIndex& index, std::size_t top_n);

/// MAP and P@N of AQD search and of the exact baseline over the query split.
/// Cutoffs larger than the database are dropped with a warning.
Evaluation evaluate(const ModelParams& params, const Dataset& data, const RunConfig& config,
                    const std::optional<RetrievalIndex>& index = std::nullopt);

nlohmann::json to_json(const Evaluation& e);
Evaluation evaluation_from_json(const nlohmann::json& j);

}  // namespace phpq::cli
