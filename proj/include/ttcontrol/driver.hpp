#pragma once

#include <string>
#include <vector>

#include "ttcontrol/config.hpp"
#include "ttcontrol/value_model.hpp"

//! Batch experiment commands behind the command-line tool: solve a value
//! function and checkpoint it, evaluate a checkpointed feedback law against
//! the baselines, and compare several configurations side by side. Commands
//! throw config_error for bad inputs and numeric_error for solver failures;
//! the tool maps those to exit codes.
namespace ttc {

struct SolveSummary {
  std::string checkpoint_file;
  double wall_time = 0.0;  // seconds inside the solver, file IO excluded
  Eigen::Index intervals = 0;
};

struct EvaluationSummary {
  double feedback_mean_cost = 0.0;
  double lqr_mean_cost = 0.0;
  double open_loop_mean_cost = 0.0;  // NaN when the open-loop baseline is off
  Eigen::Index counted = 0;          // initial conditions entering the means
  Eigen::Index omitted = 0;
};

//! Runs the solver for a parsed config and writes `<prefix>value_path.vfp`,
//! `<prefix>diagnostics.csv` and the residual-series plot data into out_dir.
SolveSummary run_solve(const RunConfig& config, const std::string& out_dir,
                       const std::string& prefix, ValueFunctionPath* path_out = nullptr);

//! Simulates the feedback law and the baselines over the configured initial
//! conditions and writes row, aggregate and trajectory CSVs into out_dir.
EvaluationSummary run_evaluation(const RunConfig& config, const ValueFunctionPath& path,
                                 const std::string& out_dir, const std::string& prefix);

void cmd_solve(const std::string& config_path, const std::string& out_dir);
void cmd_evaluate(const std::string& checkpoint_path, const std::string& config_path,
                  const std::string& out_dir);
void cmd_compare(const std::vector<std::string>& config_paths, const std::string& out_dir);

}  // namespace ttc
