#include "phpq_cli/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "phpq/checkpoint.hpp"
#include "phpq/error.hpp"
#include "phpq/index_io.hpp"
#include "phpq/synthetic.hpp"
#include "phpq_cli/pipeline.hpp"
#include "phpq_cli/report.hpp"
#include "phpq_cli/run_config.hpp"
#include "phpq_cli/sweep.hpp"

namespace phpq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raw text of the config flags given on one subcommand.
struct ConfigArgs {
  std::string config_path;
  std::map<std::string, std::string> flags;
};

void add_config_options(CLI::App* sub, ConfigArgs& args) {
  sub->add_option("--config", args.config_path, "JSON run config");
  const json defaults = to_json(RunConfig{});
  for (const std::string& key : config_keys()) {
    std::string help = "config key (default " + defaults[key].dump() + ")";
    sub->add_option("--" + key, args.flags[key], help)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

json flag_value(const std::string& key, const std::string& raw, const json& default_value) {
  if (default_value.is_string()) return raw;
  std::string text = raw;
  if (default_value.is_array() && (text.empty() || text.front() != '[')) text = "[" + text + "]";
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    // "inf" inside a focus-factor list, or a bare word for a typed key.
    if (default_value.is_array()) {
      json out = json::array();
      std::stringstream ss(raw);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          out.push_back(json::parse(item));
        } catch (const json::exception&) {
          out.push_back(item);
        }
      }
      return out;
    }
    throw ParamError("--" + key + ": cannot parse '" + raw + "'");
  }
}

RunConfig resolve_config(const CLI::App* sub, const ConfigArgs& args, std::ostream& out) {
  json j = json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw InputError("cannot open config " + args.config_path);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ParamError("config " + args.config_path + ": " + e.what());
    }
    if (!j.is_object()) throw ParamError("run config must be a JSON object");
  }
  const json defaults = to_json(RunConfig{});
  for (const auto& [key, raw] : args.flags) {
    if (sub->count("--" + key) == 0) continue;
    j[key] = flag_value(key, raw, defaults[key]);
  }
  RunConfig c;
  apply_json(c, j);
  validate(c);
  out << "config " << to_json(c).dump() << '\n';
  return c;
}

fs::path prepare_output(const RunConfig& c) {
  const fs::path dir = output_path(c.output);
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << to_json(c).dump(2) << '\n';
  return dir;
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Table> evaluation_tables(const Evaluation& e) {
  Table summary;
  summary.title = "retrieval";
  summary.header = {"bits", "M", "K", "queries", "aqd_map", "exact_map"};
  summary.rows.push_back({std::to_string(e.code_bits), std::to_string(e.num_books),
                          std::to_string(e.book_size), std::to_string(e.evaluated),
                          format_metric(e.aqd_map), format_metric(e.exact_map)});
  Table precision;
  precision.title = "precision at N";
  precision.header = {"N", "aqd", "exact"};
  for (std::size_t i = 0; i < e.cutoffs.size(); ++i) {
    precision.rows.push_back({std::to_string(e.cutoffs[i]), format_metric(e.aqd_precision[i]),
                              format_metric(e.exact_precision[i])});
  }
  return {summary, precision};
}

void print_tables(std::ostream& out, const std::vector<Table>& tables) {
  for (const Table& t : tables) write_markdown(out, t);
}

int cmd_gen_data(const SyntheticSpec& spec, const std::string& dir, std::ostream& out) {
  SyntheticDataset data = generate_synthetic(spec);
  const fs::path root = output_path(dir);
  const fs::path manifest = write_dataset(root, data);
  out << "wrote " << data.samples.size() << " items, " << spec.num_classes() << " classes\n";
  out << "manifest " << manifest.string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const Dataset data = load_dataset(c);
  const fs::path dir = prepare_output(c);
  const ModelHyper hyper = model_hyper(c, data.manifest);
  out << "model D=" << hyper.embedding_dim << " M=" << hyper.num_books << " K=" << hyper.book_size
      << " kappa=" << hyper.kappa << " alpha=" << hyper.alpha << " gamma=" << hyper.loss.gamma
      << " bits=" << hyper.code_bits() << '\n';
  std::ostringstream epochs;
  const TrainResult result = run_training(c, data, epochs);
  out << epochs.str();

  std::ofstream log(dir / "train_log.tsv");
  log << "epoch\ttotal\tsr_cel\tcontrastive\tval_map\n";
  for (const EpochLog& e : result.log) {
    log << e.epoch << '\t' << e.loss.total << '\t' << e.loss.sr_cel << '\t' << e.loss.contrastive
        << '\t' << (e.validation_map ? format_metric(*e.validation_map) : "") << '\n';
  }
  if (result.best_epoch) out << "best validation epoch " << *result.best_epoch << '\n';
  save_checkpoint(dir / "checkpoint.bin", {result.params, result.optimizer});
  out << "checkpoint " << (dir / "checkpoint.bin").string() << '\n';
  return 0;
}

int cmd_encode(const RunConfig& c, const std::string& ckpt, const std::string& index_path,
               std::ostream& out) {
  const Dataset data = load_dataset(c);
  const fs::path dir = prepare_output(c);
  const Checkpoint cp = load_checkpoint(or_default(ckpt, dir / "checkpoint.bin"));
  const RetrievalIndex index = build_index(cp.params, data);
  const fs::path path = or_default(index_path, dir / "index.bin");
  save_index(path, index);
  out << "index " << path.string() << " items " << index.size() << " bits/item "
      << cp.params.hyper.code_bits() << '\n';
  return 0;
}

std::optional<RetrievalIndex> maybe_index(const std::string& given, const fs::path& fallback) {
  if (!given.empty()) return load_index(given);
  if (fs::exists(fallback)) return load_index(fallback);
  return std::nullopt;
}

int cmd_search(const RunConfig& c, const std::string& ckpt, const std::string& index_path,
               std::ostream& out) {
  const Dataset data = load_dataset(c);
  const fs::path dir = prepare_output(c);
  const Checkpoint cp = load_checkpoint(or_default(ckpt, dir / "checkpoint.bin"));
  const auto loaded = maybe_index(index_path, dir / "index.bin");
  const RetrievalIndex index = loaded ? *loaded : build_index(cp.params, data);
  const auto rankings = query_rankings(cp.params, data, index, c.top_n);

  std::ofstream tsv(dir / "rankings.tsv");
  tsv << "query_id\trank\titem_id\tscore\n";
  std::size_t rows = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const ItemId qid = data.manifest.items[data.split.query[q]].id;
    for (std::size_t r = 0; r < rankings[q].size(); ++r) {
      char score[32];
      std::snprintf(score, sizeof(score), "%.9g", rankings[q][r].score);
      tsv << qid << '\t' << r + 1 << '\t' << rankings[q][r].id << '\t' << score << '\n';
      ++rows;
    }
  }
  out << "rankings " << (dir / "rankings.tsv").string() << " queries " << rankings.size()
      << " rows " << rows << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& c, const std::string& ckpt, const std::string& index_path,
                 std::ostream& out, std::ostream& err) {
  const Dataset data = load_dataset(c);
  const fs::path dir = prepare_output(c);
  const Checkpoint cp = load_checkpoint(or_default(ckpt, dir / "checkpoint.bin"));
  const Evaluation e = evaluate(cp.params, data, c, maybe_index(index_path, dir / "index.bin"));
  for (const std::string& w : e.warnings) err << "warning: " << w << '\n';
  std::ofstream(dir / "metrics.json") << to_json(e).dump(2) << '\n';
  const auto tables = evaluation_tables(e);
  save_tables(dir / "metrics", tables);
  print_tables(out, tables);
  out << "MAP " << format_metric(e.aqd_map) << '\n';
  return 0;
}

int cmd_sweep(const RunConfig& c, const std::string& param, const std::string& values,
              const std::string& seeds, std::ostream& out) {
  const Dataset data = load_dataset(c);
  const fs::path dir = prepare_output(c);
  std::vector<std::uint64_t> seed_list;
  for (const std::string& s : split_list(seeds)) {
    try {
      seed_list.push_back(std::stoull(s));
    } catch (const std::exception&) {
      throw ParamError("--seeds: '" + s + "' is not an integer");
    }
  }
  const SweepResult result = run_sweep(c, data, param, split_list(values), seed_list, out);
  const std::vector<Table> tables{sweep_table(result), sweep_detail(result)};
  save_tables(dir / ("sweep_" + param), tables);
  print_tables(out, tables);
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& stem, std::ostream& out) {
  if (inputs.empty()) throw ParamError("report: no metrics files given");
  Table maps;
  maps.title = "MAP per bit budget";
  maps.header = {"run", "bits", "aqd_map", "exact_map"};
  std::set<std::size_t> cutoffs;
  std::vector<std::pair<std::string, Evaluation>> runs;
  for (const std::string& path : inputs) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw InputError(path + ": " + e.what());
    }
    const Evaluation e = evaluation_from_json(j);
    const fs::path p(path);
    const std::string label = p.has_parent_path() ? p.parent_path().filename().string() : p.stem().string();
    maps.rows.push_back({label, std::to_string(e.code_bits), format_metric(e.aqd_map),
                         format_metric(e.exact_map)});
    cutoffs.insert(e.cutoffs.begin(), e.cutoffs.end());
    runs.emplace_back(label, e);
  }
  Table precision;
  precision.title = "AQD precision at N";
  precision.header = {"run"};
  for (std::size_t n : cutoffs) precision.header.push_back("P@" + std::to_string(n));
  for (const auto& [label, e] : runs) {
    std::vector<std::string> row{label};
    for (std::size_t n : cutoffs) {
      std::string cell = "-";
      for (std::size_t i = 0; i < e.cutoffs.size(); ++i)
        if (e.cutoffs[i] == n) cell = format_metric(e.aqd_precision[i]);
      row.push_back(cell);
    }
    precision.rows.push_back(std::move(row));
  }
  const std::vector<Table> tables{maps, precision};
  save_tables(output_path(stem), tables);
  print_tables(out, tables);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"phpq: pyramid hybrid pooling quantization for fine-grained retrieval"};
  app.require_subcommand(1);

  SyntheticSpec spec;
  std::string data_dir = "data";
  std::string stage_dims;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic fine-grained dataset");
  gen->add_option("--out", data_dir, "output directory")->capture_default_str();
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_option("--meta_classes", spec.meta_classes)->capture_default_str();
  gen->add_option("--subclasses_per_meta", spec.subclasses_per_meta)->capture_default_str();
  gen->add_option("--samples_per_class", spec.samples_per_class)->capture_default_str();
  gen->add_option("--stage_dims", stage_dims, "H2,W2,C2,H3,W3,C3,H4,W4,C4");
  gen->add_option("--patch_size", spec.patch_size)->capture_default_str();
  gen->add_option("--part_strength", spec.part_strength)->capture_default_str();
  gen->add_option("--meta_strength", spec.meta_strength)->capture_default_str();
  gen->add_option("--noise", spec.noise)->capture_default_str();
  gen->add_option("--clutter_spikes", spec.clutter_spikes)->capture_default_str();
  gen->add_option("--clutter_strength", spec.clutter_strength)->capture_default_str();
  gen->add_option("--query_fraction", spec.query_fraction)->capture_default_str();

  ConfigArgs train_args, encode_args, search_args, eval_args, sweep_args;
  auto* train_cmd = app.add_subcommand("train", "train a model, write checkpoint and log");
  add_config_options(train_cmd, train_args);

  std::string ckpt, index_path;
  auto* encode_cmd = app.add_subcommand("encode", "hard-encode the database split into an index");
  add_config_options(encode_cmd, encode_args);
  encode_cmd->add_option("--checkpoint", ckpt, "default <output>/checkpoint.bin");
  encode_cmd->add_option("--index", index_path, "default <output>/index.bin");

  auto* search_cmd = app.add_subcommand("search", "rank the database for every query item");
  add_config_options(search_cmd, search_args);
  search_cmd->add_option("--checkpoint", ckpt, "default <output>/checkpoint.bin");
  search_cmd->add_option("--index", index_path, "default <output>/index.bin when present");

  auto* eval_cmd = app.add_subcommand("evaluate", "MAP and P@N for AQD and exact search");
  add_config_options(eval_cmd, eval_args);
  eval_cmd->add_option("--checkpoint", ckpt, "default <output>/checkpoint.bin");
  eval_cmd->add_option("--index", index_path, "default <output>/index.bin when present");

  std::string param, values, seeds = "0";
  auto* sweep_cmd = app.add_subcommand("sweep", "train+evaluate over parameter values and seeds");
  add_config_options(sweep_cmd, sweep_args);
  sweep_cmd->add_option("--param", param, "alpha, tau, kappa or rho_order")->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")->required();
  sweep_cmd->add_option("--seeds", seeds, "comma-separated seeds")->capture_default_str();

  std::vector<std::string> inputs;
  std::string report_stem = "report";
  auto* report_cmd = app.add_subcommand("report", "tabulate metrics.json files");
  report_cmd->add_option("inputs", inputs, "metrics.json files")->required();
  report_cmd->add_option("--out", report_stem, "output stem for .tsv and .md")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (gen->parsed()) {
      if (!stage_dims.empty()) {
        std::vector<std::size_t> v;
        for (const std::string& s : split_list(stage_dims)) {
          try {
            v.push_back(std::stoul(s));
          } catch (const std::exception&) {
            throw ParamError("stage_dims: '" + s + "' is not a count");
          }
        }
        if (v.size() != 9) throw ParamError("stage_dims: expected 9 values");
        spec.dims = {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {v[6], v[7], v[8]}};
      }
      return cmd_gen_data(spec, data_dir, out);
    }
    if (train_cmd->parsed()) return cmd_train(resolve_config(train_cmd, train_args, out), out);
    if (encode_cmd->parsed())
      return cmd_encode(resolve_config(encode_cmd, encode_args, out), ckpt, index_path, out);
    if (search_cmd->parsed())
      return cmd_search(resolve_config(search_cmd, search_args, out), ckpt, index_path, out);
    if (eval_cmd->parsed())
      return cmd_evaluate(resolve_config(eval_cmd, eval_args, out), ckpt, index_path, out, err);
    if (sweep_cmd->parsed())
      return cmd_sweep(resolve_config(sweep_cmd, sweep_args, out), param, values, seeds, out);
    if (report_cmd->parsed()) return cmd_report(inputs, report_stem, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace phpq::cli
