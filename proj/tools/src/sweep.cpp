#include "phpq_cli/sweep.hpp"

#include <ostream>
#include <sstream>

#include "phpq/error.hpp"
#include "phpq/quantization.hpp"

namespace phpq::cli {

namespace {

double parse_number(const std::string& param, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size()) throw ParamError(param + ": '" + value + "' is not a number");
  return v;
}

}  // namespace

void apply_sweep_value(RunConfig& config, const std::string& param, const std::string& value) {
  if (param == "alpha") {
    config.alpha = parse_number(param, value);
  } else if (param == "tau") {
    config.tau = parse_number(param, value);
  } else if (param == "kappa") {
    if (value == "K") {
      config.kappa = config.book_size;
    } else {
      const double k = parse_number(param, value);
      if (k < 1.0 || k != static_cast<double>(static_cast<std::size_t>(k)))
        throw ParamError("kappa: '" + value + "' is not a positive integer");
      config.kappa = static_cast<std::size_t>(k);
    }
  } else if (param == "rho_order") {
    if (value == "descending") config.rho = {3.0, 2.0, 1.0};
    else if (value == "ascending") config.rho = {1.0, 2.0, 3.0};
    else if (value == "average") config.rho = {1.0, 1.0, 1.0};
    else if (value == "max") config.rho = {kMaxPoolRho, kMaxPoolRho, kMaxPoolRho};
    else throw ParamError("rho_order: expected descending, ascending, average or max, got '" + value + "'");
  } else {
    throw ParamError("sweep parameter must be alpha, tau, kappa or rho_order, got '" + param + "'");
  }
}

SweepResult run_sweep(const RunConfig& base, const Dataset& data, const std::string& param,
                      const std::vector<std::string>& values,
                      const std::vector<std::uint64_t>& seeds, std::ostream& log) {
  if (values.empty()) throw ParamError("sweep: no values given");
  if (seeds.empty()) throw ParamError("sweep: no seeds given");
  {
    RunConfig probe = base;
    apply_sweep_value(probe, param, values.front());  // reject unknown params up front
  }

  SweepResult result{param, values, {}, {}};
  for (std::size_t m : base.bit_budget_books) {
    if (m == 0 || base.embedding_dim % m != 0) {
      log << "sweep: skipping M=" << m << " (does not divide D=" << base.embedding_dim << ")\n";
      continue;
    }
    result.books.push_back(m);
  }

  for (const std::string& value : values) {
    for (std::size_t m : result.books) {
      for (std::uint64_t seed : seeds) {
        SweepRun run;
        run.value = value;
        run.num_books = m;
        run.code_bits = m * code_field_bits(base.book_size);
        run.seed = seed;
        try {
          RunConfig c = base;
          c.num_books = m;
          c.seed = seed;
          apply_sweep_value(c, param, value);
          validate(c);
          std::ostringstream quiet;
          const TrainResult trained = run_training(c, data, quiet);
          run.evaluation = evaluate(trained.params, data, c);
          run.ok = true;
        } catch (const std::exception& e) {
          run.error = e.what();
        }
        log << "sweep " << param << "=" << value << " M=" << m << " seed=" << seed << ": "
            << (run.ok ? "map " + format_metric(run.evaluation.aqd_map) : "failed: " + run.error)
            << '\n';
        result.runs.push_back(std::move(run));
      }
    }
  }
  return result;
}

Table sweep_table(const SweepResult& r) {
  Table t;
  t.title = "mean AQD MAP over seeds, " + r.param + " sweep";
  t.header.push_back(r.param);
  for (std::size_t m : r.books) {
    std::size_t bits = 0;
    for (const SweepRun& run : r.runs)
      if (run.num_books == m) bits = run.code_bits;
    t.header.push_back(std::to_string(bits) + " bits");
  }
  for (const std::string& value : r.values) {
    std::vector<std::string> row{value};
    for (std::size_t m : r.books) {
      double sum = 0.0;
      std::size_t ok = 0, failed = 0;
      for (const SweepRun& run : r.runs) {
        if (run.value != value || run.num_books != m) continue;
        if (run.ok) {
          sum += run.evaluation.aqd_map;
          ++ok;
        } else {
          ++failed;
        }
      }
      if (ok == 0) row.push_back("failed");
      else row.push_back(format_metric(sum / static_cast<double>(ok)) +
                         (failed ? " (" + std::to_string(failed) + " failed)" : ""));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table sweep_detail(const SweepResult& r) {
  Table t;
  t.title = "runs";
  t.header = {r.param, "M", "bits", "seed", "aqd_map", "exact_map", "status"};
  for (const SweepRun& run : r.runs) {
    t.rows.push_back({run.value, std::to_string(run.num_books), std::to_string(run.code_bits),
                      std::to_string(run.seed),
                      run.ok ? format_metric(run.evaluation.aqd_map) : "",
                      run.ok ? format_metric(run.evaluation.exact_map) : "",
                      run.ok ? "ok" : "failed: " + run.error});
  }
  return t;
}

}  // namespace phpq::cli
