#include "phpq_cli/run_config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "phpq/error.hpp"

namespace phpq::cli {

using nlohmann::json;

namespace {

template <class T>
void read_value(const json& j, T& out) {
  out = j.get<T>();
}

// Focus factors may be "inf" (max pooling), which JSON numbers cannot carry.
void read_value(const json& j, std::vector<double>& out) {
  out.clear();
  for (const json& v : j) {
    if (v.is_string() && v.get<std::string>() == "inf") out.push_back(kMaxPoolRho);
    else out.push_back(v.get<double>());
  }
}

template <class T>
json write_value(const T& v) {
  return v;
}

json write_value(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(std::isinf(x) ? json("inf") : json(x));
  return out;
}

template <class T>
void take(const json& j, const char* key, T& out) {
  try {
    read_value(j.at(key), out);
  } catch (const json::exception& e) {
    throw ParamError(std::string("config key '") + key + "': " + e.what());
  }
}

// Single place listing every key so parsing and printing cannot drift.
template <class Visitor>
void visit_fields(RunConfig& c, Visitor&& v) {
  v("preset", c.preset);
  v("dataset", c.dataset);
  v("protocol", c.protocol);
  v("query_fraction", c.query_fraction);
  v("query_per_class", c.query_per_class);
  v("split_seed", c.split_seed);
  v("embedding_dim", c.embedding_dim);
  v("num_books", c.num_books);
  v("book_size", c.book_size);
  v("alpha", c.alpha);
  v("kappa", c.kappa);
  v("rho", c.rho);
  v("fusion", c.fusion);
  v("variant", c.variant);
  v("tau", c.tau);
  v("m_plus", c.m_plus);
  v("m_minus", c.m_minus);
  v("gamma", c.gamma);
  v("epochs", c.epochs);
  v("batch_size", c.batch_size);
  v("learning_rate", c.learning_rate);
  v("seed", c.seed);
  v("kmeans_init", c.kmeans_init);
  v("kmeans_iterations", c.kmeans_iterations);
  v("validate_every", c.validate_every);
  v("top_n", c.top_n);
  v("p_at_n", c.p_at_n);
  v("bit_budget_books", c.bit_budget_books);
  v("output", c.output);
}

FusionMode parse_fusion(const std::string& name) {
  if (name == "pyramid") return FusionMode::pyramid;
  if (name == "last_stage") return FusionMode::last_stage_only;
  throw ParamError("fusion: expected 'pyramid' or 'last_stage', got '" + name + "'");
}

}  // namespace

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  if (name == "paper") return c;
  if (name == "desk") {
    c.preset = "desk";
    c.protocol = "cub";
    c.epochs = 30;
    c.batch_size = 32;
    c.learning_rate = 2e-2;
    c.kmeans_init = true;
    c.m_minus = 2.0;
    c.bit_budget_books = {2, 4, 8};
    return c;
  }
  throw ParamError("preset: expected 'paper' or 'desk', got '" + name + "'");
}

void apply_json(RunConfig& config, const json& j) {
  if (!j.is_object()) throw ParamError("run config must be a JSON object");
  RunConfig probe;
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    visit_fields(probe, [&](const char* name, auto&) { known = known || key == name; });
    if (!known) throw ParamError("unknown config key '" + key + "'");
  }
  // A preset resets defaults before the explicit keys land.
  if (j.contains("preset")) {
    std::string name;
    take(j, "preset", name);
    config = preset_config(name);
  }
  visit_fields(config, [&](const char* name, auto& field) {
    if (j.contains(name)) take(j, name, field);
  });
}

json to_json(const RunConfig& config) {
  json j = json::object();
  RunConfig copy = config;
  visit_fields(copy, [&](const char* name, auto& field) { j[name] = write_value(field); });
  return j;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  RunConfig c;
  visit_fields(c, [&](const char* name, auto&) { keys.emplace_back(name); });
  return keys;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParamError("config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  apply_json(c, j);
  return c;
}

void validate(const RunConfig& c) {
  preset_config(c.preset);
  parse_protocol(c.protocol);
  parse_fusion(c.fusion);
  parse_variant(c.variant);
  if (c.rho.size() != 3) throw ParamError("rho: expected three focus factors (stage2, stage3, stage4)");
  if (c.num_books == 0) throw ParamError("num_books: must be positive");
  if (c.book_size == 0) throw ParamError("book_size: must be positive");
  if (c.embedding_dim % c.num_books != 0)
    throw ParamError("num_books: must divide embedding_dim (" + std::to_string(c.embedding_dim) + ")");
  if (c.p_at_n.empty()) throw ParamError("p_at_n: at least one cutoff required");
  if (c.output.empty()) throw ParamError("output: must not be empty");
  for (std::size_t n : c.p_at_n)
    if (n == 0) throw ParamError("p_at_n: cutoffs must be positive");
}

ModelHyper model_hyper(const RunConfig& c, const DatasetManifest& manifest) {
  ModelHyper h;
  h.dims = manifest.dims;
  h.embedding_dim = c.embedding_dim;
  h.num_books = c.num_books;
  h.book_size = c.book_size;
  h.num_classes = manifest.num_classes;
  h.rhos = {c.rho.at(0), c.rho.at(1), c.rho.at(2)};
  h.fusion = parse_fusion(c.fusion);
  h.alpha = c.alpha;
  h.kappa = c.kappa;
  h.loss = {c.tau, c.m_plus, c.m_minus, c.gamma};
  h = apply_variant(h, parse_variant(c.variant));
  h.validate();
  return h;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.learning_rate = c.learning_rate;
  t.seed = c.seed;
  t.kmeans_init = c.kmeans_init;
  t.kmeans_iterations = c.kmeans_iterations;
  return t;
}

SplitProtocol split_protocol(const RunConfig& c) {
  return {parse_protocol(c.protocol), c.query_fraction, c.query_per_class, c.split_seed};
}

std::filesystem::path output_path(const std::filesystem::path& path) {
  const char* root = std::getenv("PHPQ_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0' || path.is_absolute()) return path;
  return std::filesystem::path(root) / path;
}

}  // namespace phpq::cli
