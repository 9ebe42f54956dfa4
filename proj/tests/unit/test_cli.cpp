#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phpq/checkpoint.hpp"
#include "phpq/error.hpp"
#include "phpq_cli/commands.hpp"
#include "phpq_cli/run_config.hpp"
#include "phpq_cli/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace phpq;
using namespace phpq::cli;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "phpq");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("phpq_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small dataset shared by the command tests.
const fs::path& tiny_data() {
  static const fs::path dir = [] {
    const fs::path d = scratch("data");
    const auto r = run({"gen-data", "--out", (d / "ds").string(), "--seed", "3", "--meta_classes",
                        "2", "--subclasses_per_meta", "2", "--samples_per_class", "12"});
    REQUIRE(r.code == 0);
    return d / "ds";
  }();
  return dir;
}

std::vector<std::string> base_flags(const fs::path& out) {
  return {"--preset",     "desk", "--dataset", (tiny_data() / "manifest.tsv").string(),
          "--output",     out.string(), "--epochs", "2", "--embedding_dim", "8",
          "--num_books",  "2",   "--book_size", "4", "--kappa", "2",
          "--batch_size", "8",   "--p_at_n", "1,5"};
}

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<std::string> cmd(const std::string& name, const std::vector<std::string>& flags) {
  return with({name}, flags);
}

}  // namespace

TEST_CASE("run config rejects unknown keys and applies presets") {
  RunConfig c;
  CHECK_THROWS_AS(apply_json(c, json{{"not_a_key", 1}}), ParamError);
  CHECK_THROWS_AS(apply_json(c, json{{"alpha", "high"}}), ParamError);

  RunConfig d;
  apply_json(d, json{{"preset", "desk"}, {"alpha", 4.0}});
  CHECK(d.preset == "desk");
  CHECK(d.alpha == 4.0);
  CHECK(d.learning_rate == preset_config("desk").learning_rate);
  CHECK_THROWS_AS(preset_config("huge"), ParamError);
}

TEST_CASE("run config round-trips every key, including an infinite focus factor") {
  RunConfig c = preset_config("desk");
  c.rho = {3.0, INFINITY, 1.0};
  c.p_at_n = {7};
  const json j = to_json(c);
  CHECK(j.size() == config_keys().size());
  CHECK(j["rho"][1] == "inf");
  RunConfig back;
  apply_json(back, j);
  CHECK(to_json(back) == j);
  CHECK(std::isinf(back.rho[1]));
}

TEST_CASE("validate names the offending key") {
  RunConfig c = preset_config("desk");
  c.embedding_dim = 10;
  c.num_books = 4;
  try {
    validate(c);
    FAIL("expected ParamError");
  } catch (const ParamError& e) {
    CHECK(std::string(e.what()).find("num_books") != std::string::npos);
  }
}

TEST_CASE("output paths honour PHPQ_OUTPUT_ROOT") {
  ::setenv("PHPQ_OUTPUT_ROOT", "/tmp/phpq_root", 1);
  CHECK(output_path("run") == fs::path("/tmp/phpq_root/run"));
  CHECK(output_path("/abs/run") == fs::path("/abs/run"));
  ::unsetenv("PHPQ_OUTPUT_ROOT");
  CHECK(output_path("run") == fs::path("run"));
}

TEST_CASE("gen-data") {
  SUBCASE("invalid dims exit nonzero and name the field") {
    const auto r = run({"gen-data", "--out", scratch("bad").string(), "--stage_dims",
                        "4,4,8,0,2,8,2,2,8"});
    CHECK(r.code != 0);
    CHECK(r.err.find("stage_dims") != std::string::npos);
  }
  SUBCASE("same seed produces an identical tree") {
    const fs::path root = scratch("same");
    for (const char* name : {"a", "b"}) {
      const auto r = run({"gen-data", "--out", (root / name).string(), "--seed", "9",
                          "--meta_classes", "2", "--subclasses_per_meta", "2",
                          "--samples_per_class", "3"});
      REQUIRE(r.code == 0);
    }
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
      if (!e.is_regular_file()) continue;
      const fs::path rel = fs::relative(e.path(), root / "a");
      CHECK(slurp(e.path()) == slurp(root / "b" / rel));
      ++files;
    }
    CHECK(files == 13);
  }
}

TEST_CASE("unknown flags and bad values exit nonzero") {
  CHECK(run({"train", "--no_such_key", "1"}).code != 0);
  const auto r = run(cmd("train", with(base_flags(scratch("badval")), {"--alpha", "x"})));
  CHECK(r.code != 0);
  CHECK(r.err.find("alpha") != std::string::npos);
  CHECK(run({"evaluate", "--dataset", "/nonexistent/manifest.tsv"}).code != 0);
}

TEST_CASE("train with zero epochs writes the initial parameters") {
  const fs::path out = scratch("zero");
  const auto r = run(cmd("train", with(base_flags(out), {"--epochs", "0", "--preset", "paper",
                                                         "--seed", "5", "--embedding_dim", "8",
                                                         "--num_books", "2", "--book_size", "4",
                                                         "--kappa", "2", "--batch_size", "8"})));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("config ") == 0);
  const Checkpoint cp = load_checkpoint(out / "checkpoint.bin");
  const ModelParams init = ModelParams::init(cp.params.hyper, 5);
  const auto a = cp.params.tensors();
  const auto b = init.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    const auto x = a[t]->values();
    const auto y = b[t]->values();
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == y[i]);
  }
  CHECK(fs::exists(out / "config.json"));
  CHECK(fs::exists(out / "train_log.tsv"));
}

TEST_CASE("the full-attention variant stores kappa = K") {
  const fs::path out = scratch("full");
  REQUIRE(run(cmd("train", with(base_flags(out), {"--variant", "full_attn"}))).code == 0);
  const Checkpoint cp = load_checkpoint(out / "checkpoint.bin");
  CHECK(cp.params.hyper.kappa == cp.params.hyper.book_size);
}

TEST_CASE("train, encode, search and evaluate") {
  const fs::path out = scratch("pipeline");
  const auto flags = base_flags(out);
  REQUIRE(run(cmd("train", flags)).code == 0);
  const auto log = slurp(out / "train_log.tsv");
  CHECK(log.rfind("epoch\ttotal\tsr_cel\tcontrastive\tval_map\n", 0) == 0);
  REQUIRE(run(cmd("encode", flags)).code == 0);
  CHECK(fs::exists(out / "index.bin"));

  SUBCASE("top_n = 1 gives one row per query") {
    const auto r = run(cmd("search", with(flags, {"--top_n", "1"})));
    REQUIRE(r.code == 0);
    std::istringstream tsv(slurp(out / "rankings.tsv"));
    std::string line;
    std::getline(tsv, line);
    CHECK(line == "query_id\trank\titem_id\tscore");
    std::size_t rows = 0;
    while (std::getline(tsv, line)) {
      CHECK(line.find("\t1\t") != std::string::npos);
      ++rows;
    }
    CHECK(rows == 24);  // half of 48 items are queries
  }

  SUBCASE("evaluation is deterministic and MAP lies in [0, 1]") {
    REQUIRE(run(cmd("evaluate", flags)).code == 0);
    const std::string first = slurp(out / "metrics.json");
    REQUIRE(run(cmd("evaluate", flags)).code == 0);
    CHECK(slurp(out / "metrics.json") == first);
    const json m = json::parse(first);
    CHECK(m["aqd_map"].get<double>() >= 0.0);
    CHECK(m["aqd_map"].get<double>() <= 1.0);
    CHECK(m["exact_map"].get<double>() <= 1.0);
    CHECK(fs::exists(out / "metrics.tsv"));
    CHECK(fs::exists(out / "metrics.md"));

    const fs::path stem = out / "summary";
    const auto r = run({"report", (out / "metrics.json").string(), "--out", stem.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("MAP per bit budget") != std::string::npos);
    CHECK(fs::exists(stem.string() + ".tsv"));
  }

  SUBCASE("cutoffs beyond the ranking are skipped with a warning") {
    const auto r = run(cmd("evaluate", with(flags, {"--p_at_n", "1,1000"})));
    REQUIRE(r.code == 0);
    CHECK(r.err.find("warning") != std::string::npos);
    CHECK(json::parse(slurp(out / "metrics.json"))["cutoffs"].size() == 1);
  }
}

TEST_CASE("a one-point sweep matches train + evaluate") {
  const fs::path out = scratch("sweep");
  const fs::path single = scratch("single");
  const auto sweep = run(cmd("sweep", with(base_flags(out), {"--bit_budget_books", "2", "--param",
                                                             "alpha", "--values", "4", "--seeds",
                                                             "0"})));
  REQUIRE(sweep.code == 0);
  CHECK(fs::exists(out / "sweep_alpha.tsv"));

  const auto flags = with(base_flags(single), {"--alpha", "4"});
  REQUIRE(run(cmd("train", flags)).code == 0);
  REQUIRE(run(cmd("evaluate", flags)).code == 0);
  const double map = json::parse(slurp(single / "metrics.json"))["aqd_map"].get<double>();

  std::istringstream tsv(slurp(out / "sweep_alpha.tsv"));
  std::string line;
  bool found = false;
  while (std::getline(tsv, line)) {
    if (line.rfind("4\t", 0) == 0) {
      CHECK(line.substr(2, 6) == format_metric(map));
      found = true;
      break;
    }
  }
  CHECK(found);
}

TEST_CASE("a failing sweep point is recorded and the sweep continues") {
  const fs::path out = scratch("sweep_fail");
  const auto r = run(cmd("sweep", with(base_flags(out), {"--bit_budget_books", "2", "--param",
                                                         "tau", "--values", "0,1", "--seeds",
                                                         "0"})));
  REQUIRE(r.code == 0);
  const std::string table = slurp(out / "sweep_tau.tsv");
  CHECK(table.find("failed") != std::string::npos);
  CHECK(table.find("\n1\t0.") != std::string::npos);
}

TEST_CASE("sweep values are checked") {
  RunConfig c = preset_config("desk");
  apply_sweep_value(c, "kappa", "K");
  CHECK(c.kappa == c.book_size);
  apply_sweep_value(c, "rho_order", "ascending");
  CHECK(c.rho == std::vector<double>{1.0, 2.0, 3.0});
  CHECK_THROWS_AS(apply_sweep_value(c, "kappa", "-1"), ParamError);
  CHECK_THROWS_AS(apply_sweep_value(c, "gamma", "1"), ParamError);
}
