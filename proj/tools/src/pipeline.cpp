#include "phpq_cli/pipeline.hpp"

#include <algorithm>
#include <ostream>
#include <unordered_set>

#include "phpq/error.hpp"
#include "phpq/metrics.hpp"
#include "phpq/synthetic.hpp"

namespace phpq::cli {

namespace {

std::vector<PyramidDescriptors> pool_subset(const Dataset& data, const std::vector<std::size_t>& rows,
                                            const FocusFactors& rhos) {
  std::vector<PyramidDescriptors> out;
  out.reserve(rows.size());
  for (std::size_t i : rows) out.push_back(pool_pyramid(data.samples[i], rhos));
  return out;
}

std::vector<Label> labels_of(const Dataset& data, const std::vector<std::size_t>& rows) {
  std::vector<Label> out;
  for (std::size_t i : rows) out.push_back(data.manifest.items[i].label);
  return out;
}

std::vector<ItemId> ids_of(const Dataset& data, const std::vector<std::size_t>& rows) {
  std::vector<ItemId> out;
  for (std::size_t i : rows) out.push_back(data.manifest.items[i].id);
  return out;
}

std::optional<ItemId> self_exclusion(const std::unordered_set<ItemId>& database, ItemId id) {
  if (database.count(id)) return id;
  return std::nullopt;
}

}  // namespace

Dataset load_dataset(const RunConfig& config) {
  if (config.dataset.empty()) throw ParamError("dataset: a manifest path is required");
  const std::filesystem::path path(config.dataset);
  Dataset d;
  d.manifest = load_manifest(path);
  d.samples = load_samples(d.manifest, path.parent_path());
  d.split = split_dataset(d.manifest, split_protocol(config));
  if (d.split.train.empty()) throw InputError("dataset has no training items");
  if (d.split.query.empty()) throw InputError("dataset has no query items");
  return d;
}

TrainResult run_training(const RunConfig& config, const Dataset& data, std::ostream& log) {
  const ModelHyper hyper = model_hyper(config, data.manifest);
  const TrainConfig tc = train_config(config);
  const auto samples = pool_subset(data, data.split.train, hyper.rhos);
  const auto labels = labels_of(data, data.split.train);

  EpochHook hook = [&](const ModelParams& params, std::size_t epoch) -> std::optional<double> {
    if (config.validate_every == 0 || (epoch + 1) % config.validate_every != 0) return std::nullopt;
    return evaluate(params, data, config).aqd_map;
  };
  TrainResult result = train(ModelParams::init(hyper, config.seed), samples, labels, tc, hook);
  for (const EpochLog& e : result.log) {
    log << "epoch " << e.epoch << " loss " << e.loss.total << " sr_cel " << e.loss.sr_cel
        << " contrastive " << e.loss.contrastive;
    if (e.validation_map) log << " val_map " << *e.validation_map;
    log << '\n';
  }
  return result;
}

RetrievalIndex build_index(const ModelParams& params, const Dataset& data) {
  const auto rows = data.split.database;
  return encode_database(params, pool_subset(data, rows, params.hyper.rhos), labels_of(data, rows),
                         ids_of(data, rows));
}

std::vector<Ranking> query_rankings(const ModelParams& params, const Dataset& data,
                                    const RetrievalIndex& index, std::size_t top_n) {
  const std::unordered_set<ItemId> db_ids(index.ids().begin(), index.ids().end());
  std::vector<Ranking> out;
  for (std::size_t i : data.split.query) {
    const ItemId id = data.manifest.items[i].id;
    const auto excl = self_exclusion(db_ids, id);
    const std::size_t available = index.size() - (excl ? 1 : 0);
    const std::size_t n = top_n == 0 ? available : std::min(top_n, available);
    const Vec z = embed(params, pool_pyramid(data.samples[i], params.hyper.rhos));
    out.push_back(aqd_search(make_query(z, params.hyper.num_books), index, n, excl));
  }
  return out;
}

Evaluation evaluate(const ModelParams& params, const Dataset& data, const RunConfig& config,
                    const std::optional<RetrievalIndex>& prebuilt) {
  const ModelHyper& h = params.hyper;
  const RetrievalIndex index = prebuilt ? *prebuilt : build_index(params, data);
  if (index.empty()) throw InputError("evaluate: empty database split");

  const auto db_rows = data.split.database;
  const EmbeddingTable table =
      embed_database(params, pool_subset(data, db_rows, h.rhos), labels_of(data, db_rows),
                     ids_of(data, db_rows));
  const std::unordered_set<ItemId> db_ids(index.ids().begin(), index.ids().end());

  std::vector<Ranking> aqd = query_rankings(params, data, index, config.top_n);
  std::vector<Ranking> exact;
  for (std::size_t i : data.split.query) {
    const ItemId id = data.manifest.items[i].id;
    const auto excl = self_exclusion(db_ids, id);
    const std::size_t available = table.size() - (excl ? 1 : 0);
    const std::size_t n = config.top_n == 0 ? available : std::min(config.top_n, available);
    const Vec z = embed(params, pool_pyramid(data.samples[i], h.rhos));
    exact.push_back(exact_search(normalize_subvectors(z, h.num_books), table, n, excl));
  }
  const std::vector<Label> qlabels = labels_of(data, data.split.query);
  const RelevanceOracle oracle(index.ids(), index.labels());

  Evaluation e;
  e.num_books = h.num_books;
  e.book_size = h.book_size;
  e.code_bits = h.code_bits();
  e.queries = qlabels.size();
  const MapResult ma = map_eval(aqd, qlabels, oracle);
  const MapResult me = map_eval(exact, qlabels, oracle);
  e.aqd_map = ma.map;
  e.exact_map = me.map;
  e.evaluated = ma.evaluated;
  e.excluded = ma.excluded;
  e.warnings = ma.warnings;

  std::size_t shortest = aqd.front().size();
  for (const Ranking& r : aqd) shortest = std::min(shortest, r.size());
  for (std::size_t n : config.p_at_n) {
    if (n <= shortest) e.cutoffs.push_back(n);
    else e.warnings.push_back("P@" + std::to_string(n) + " skipped: rankings hold " +
                              std::to_string(shortest) + " items");
  }
  if (!e.cutoffs.empty()) {
    e.aqd_precision = p_at_n(aqd, qlabels, oracle, e.cutoffs);
    e.exact_precision = p_at_n(exact, qlabels, oracle, e.cutoffs);
  }
  return e;
}

nlohmann::json to_json(const Evaluation& e) {
  return {{"num_books", e.num_books},
          {"book_size", e.book_size},
          {"code_bits", e.code_bits},
          {"queries", e.queries},
          {"evaluated", e.evaluated},
          {"excluded", e.excluded},
          {"aqd_map", e.aqd_map},
          {"exact_map", e.exact_map},
          {"cutoffs", e.cutoffs},
          {"aqd_precision", e.aqd_precision},
          {"exact_precision", e.exact_precision},
          {"warnings", e.warnings}};
}

Evaluation evaluation_from_json(const nlohmann::json& j) {
  Evaluation e;
  try {
    j.at("num_books").get_to(e.num_books);
    j.at("book_size").get_to(e.book_size);
    j.at("code_bits").get_to(e.code_bits);
    j.at("queries").get_to(e.queries);
    j.at("evaluated").get_to(e.evaluated);
    j.at("excluded").get_to(e.excluded);
    j.at("aqd_map").get_to(e.aqd_map);
    j.at("exact_map").get_to(e.exact_map);
    j.at("cutoffs").get_to(e.cutoffs);
    j.at("aqd_precision").get_to(e.aqd_precision);
    j.at("exact_precision").get_to(e.exact_precision);
    j.at("warnings").get_to(e.warnings);
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("metrics document: ") + ex.what());
  }
  return e;
}

}  // namespace phpq::cli
