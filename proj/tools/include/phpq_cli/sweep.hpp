#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "phpq_cli/pipeline.hpp"
#include "phpq_cli/report.hpp"
#include "phpq_cli/run_config.hpp"

namespace phpq::cli {

/// Sets one swept parameter. `param` is alpha, tau, kappa (value "K" means
/// the book size) or rho_order (descending, ascending, average, max).
void apply_sweep_value(RunConfig& config, const std::string& param, const std::string& value);

struct SweepRun {
  std::string value;
  std::size_t num_books = 0;
  std::size_t code_bits = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Evaluation evaluation;
};

struct SweepResult {
  std::string param;
  std::vector<std::string> values;
  std::vector<std::size_t> books;  // columns, from bit_budget_books
  std::vector<SweepRun> runs;
};

/// One train+evaluate per (value, bit budget, seed). A failing run is
/// recorded and the sweep moves on. Budgets whose M does not divide D are
/// skipped with a note in `log`.
SweepResult run_sweep(const RunConfig& base, const Dataset& data, const std::string& param,
                      const std::vector<std::string>& values,
                      const std::vector<std::uint64_t>& seeds, std::ostream& log);

/// Rows = values, columns = bit budgets, cells = mean AQD MAP over seeds.
Table sweep_table(const SweepResult& result);
/// One row per run.
Table sweep_detail(const SweepResult& result);

}  // namespace phpq::cli
