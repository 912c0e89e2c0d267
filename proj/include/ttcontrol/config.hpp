#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "ttcontrol/hjb_solver.hpp"
#include "ttcontrol/ocp.hpp"

//! Run configuration: the benchmark problem, the solver knobs and the
//! evaluation protocol, read from a TOML-syntax text file with the flat
//! sections [problem], [solver] and [evaluate]. Unknown keys and sections
//! are hard errors so typos cannot silently fall back to defaults.
namespace ttc {

struct EvalConfig {
  Eigen::Index initial_conditions = 100;
  ICKind kind = ICKind::poly;
  std::uint64_t seed = 1;
  double sim_tau = 0.001;
  Integrator integrator = Integrator::euler;
  bool open_loop = true;           // include the open-loop optimizer per IC
  int open_loop_max_iterations = 400;
  double open_loop_tolerance = 1e-8;
  Eigen::Index traces = 1;         // leading ICs that get a trajectory CSV
};

struct RunConfig {
  // [problem]
  Eigen::Index dimension = 12;
  double sigma = 1.0;
  double gamma = 0.1;
  double terminal_weight = 1.0;
  bool cubic = true;

  SolverConfig solver;
  EvalConfig evaluate;
};

//! Interior ranks used when the config omits them: 3 at both boundary bonds,
//! 5 in between, clamped to what the mode sizes admit.
std::vector<Eigen::Index> default_ranks(Eigen::Index dimension, Eigen::Index basis_size);

//! Parses config text. Messages carry 1-based line numbers.
RunConfig parse_run_config(const std::string& text);

//! Reads and parses a config file; the file name is prefixed to parse errors.
RunConfig load_run_config(const std::string& path);

//! Instantiates the benchmark problem the config describes, with the horizon
//! taken from the solver section.
ControlProblem make_problem(const RunConfig& config);

const char* interp_name(InterpMode mode);
const char* integrator_name(Integrator integrator);
const char* ic_kind_name(ICKind kind);

}  // namespace ttc
