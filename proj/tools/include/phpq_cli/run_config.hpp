#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "phpq/manifest.hpp"
#include "phpq/model.hpp"
#include "phpq/training.hpp"

namespace phpq::cli {

// Every knob of one run. Keys in the JSON form and command-line flags use
// the member names verbatim.
struct RunConfig {
  std::string preset = "paper";

  // data
  std::string dataset;  // manifest path
  std::string protocol = "manifest";
  double query_fraction = 0.5;
  std::size_t query_per_class = 10;
  std::uint64_t split_seed = 0;

  // model
  std::size_t embedding_dim = 64;
  std::size_t num_books = 4;
  std::size_t book_size = 16;
  double alpha = 16.0;
  std::size_t kappa = 5;
  std::vector<double> rho = {3.0, 2.0, 1.0};
  std::string fusion = "pyramid";
  std::string variant = "standard";

  // loss
  double tau = 0.5;
  double m_plus = 0.0;
  double m_minus = 1.0;
  double gamma = 1.0;

  // training
  std::size_t epochs = 70;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  bool kmeans_init = false;
  std::size_t kmeans_iterations = 10;
  std::size_t validate_every = 0;  // 0 disables per-epoch validation MAP

  // evaluation
  std::size_t top_n = 0;  // 0 ranks the whole database
  std::vector<std::size_t> p_at_n = {10, 50, 100};
  std::vector<std::size_t> bit_budget_books = {2, 4, 6, 8};

  std::string output = "run";
};

/// Keys whose values a preset changes; the rest keep paper/desk defaults.
RunConfig preset_config(const std::string& name);

/// Throws ParamError on unknown keys or mistyped values.
void apply_json(RunConfig& config, const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

RunConfig load_run_config(const std::filesystem::path& path);

/// Names of every config key, in canonical order.
std::vector<std::string> config_keys();

/// Cross-field checks; throws ParamError naming the key.
void validate(const RunConfig& config);

ModelHyper model_hyper(const RunConfig& config, const DatasetManifest& manifest);
TrainConfig train_config(const RunConfig& config);
SplitProtocol split_protocol(const RunConfig& config);

/// `path` under PHPQ_OUTPUT_ROOT when that variable is set and `path` is
/// relative.
std::filesystem::path output_path(const std::filesystem::path& path);

}  // namespace phpq::cli
