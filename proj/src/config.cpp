#include "ttcontrol/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ttcontrol/common.hpp"

namespace ttc {

const char* interp_name(InterpMode mode) {
  return mode == InterpMode::linear ? "linear" : "constant";
}

const char* integrator_name(Integrator integrator) {
  return integrator == Integrator::rk4 ? "rk4" : "euler";
}

const char* ic_kind_name(ICKind kind) { return kind == ICKind::poly ? "poly" : "constant"; }

std::vector<Eigen::Index> default_ranks(Eigen::Index dimension, Eigen::Index basis_size) {
  if (dimension < 2) throw config_error("problem dimension must be at least 2");
  std::vector<Eigen::Index> ranks(static_cast<std::size_t>(dimension) - 1, 5);
  ranks.front() = 3;
  ranks.back() = 3;
  Eigen::Index left = 1;
  for (auto& r : ranks) {
    left = std::min(r, left * basis_size);
    r = left;
  }
  Eigen::Index right = 1;
  for (auto it = ranks.rbegin(); it != ranks.rend(); ++it) {
    right = std::min(*it, basis_size * right);
    *it = right;
  }
  return ranks;
}

namespace {

[[noreturn]] void fail(int line, const std::string& message) {
  throw config_error("line " + std::to_string(line) + ": " + message);
}

std::string trim(const std::string& s) {
  auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Cuts an end-of-line comment, ignoring '#' inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool parse_bool(const std::string& v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(line, "expected true or false, got '" + v + "'");
}

long long parse_int(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    const long long out = std::stoll(v, &pos);
    if (pos != v.size()) fail(line, "trailing characters after integer '" + v + "'");
    return out;
  } catch (const config_error&) {
    throw;
  } catch (const std::exception&) {
    fail(line, "expected an integer, got '" + v + "'");
  }
}

std::uint64_t parse_uint(const std::string& v, int line) {
  const long long out = parse_int(v, line);
  if (out < 0) fail(line, "expected a non-negative integer, got '" + v + "'");
  return static_cast<std::uint64_t>(out);
}

double parse_float(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) fail(line, "trailing characters after number '" + v + "'");
    return out;
  } catch (const config_error&) {
    throw;
  } catch (const std::exception&) {
    fail(line, "expected a number, got '" + v + "'");
  }
}

std::string parse_string(const std::string& v, int line) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
    fail(line, "expected a quoted string, got '" + v + "'");
  }
  const std::string body = v.substr(1, v.size() - 2);
  if (body.find('"') != std::string::npos || body.find('\\') != std::string::npos) {
    fail(line, "string escapes are not supported");
  }
  return body;
}

std::vector<Eigen::Index> parse_int_array(const std::string& v, int line) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    fail(line, "expected an integer array like [3, 5, 3], got '" + v + "'");
  }
  std::vector<Eigen::Index> out;
  std::stringstream body(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(body, item, ',')) {
    out.push_back(static_cast<Eigen::Index>(parse_int(trim(item), line)));
  }
  if (out.empty()) fail(line, "array must not be empty");
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw config_error(message);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  bool ranks_given = false;

  std::string section;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;

    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      if (section != "problem" && section != "solver" && section != "evaluate") {
        fail(line, "unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value, got '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(line, "missing key before '='");
    if (value.empty()) fail(line, "missing value for key '" + key + "'");
    if (section.empty()) fail(line, "key '" + key + "' appears before any section header");
    if (!seen.insert(section + "." + key).second) {
      fail(line, "duplicate key '" + key + "' in section [" + section + "]");
    }

    if (section == "problem") {
      if (key == "dimension") {
        cfg.dimension = static_cast<Eigen::Index>(parse_int(value, line));
      } else if (key == "sigma") {
        cfg.sigma = parse_float(value, line);
      } else if (key == "gamma") {
        cfg.gamma = parse_float(value, line);
      } else if (key == "terminal_weight") {
        cfg.terminal_weight = parse_float(value, line);
      } else if (key == "cubic") {
        cfg.cubic = parse_bool(value, line);
      } else {
        fail(line, "unknown key '" + key + "' in section [problem]");
      }
    } else if (section == "solver") {
      SolverConfig& sc = cfg.solver;
      if (key == "method") {
        const std::string name = parse_string(value, line);
        if (name == "dlra") {
          sc.method = Method::dlra;
        } else if (name == "bellman") {
          sc.method = Method::bellman;
        } else if (name == "hybrid") {
          sc.method = Method::hybrid;
        } else {
          fail(line, "unknown method '" + name + "' (expected dlra, bellman or hybrid)");
        }
      } else if (key == "horizon") {
        sc.horizon = parse_float(value, line);
      } else if (key == "tau") {
        sc.tau = parse_float(value, line);
      } else if (key == "micro_steps") {
        sc.micro_steps = static_cast<Eigen::Index>(parse_int(value, line));
      } else if (key == "basis_size") {
        sc.basis_size = static_cast<Eigen::Index>(parse_int(value, line));
      } else if (key == "ranks") {
        sc.ranks = parse_int_array(value, line);
        ranks_given = true;
      } else if (key == "samples") {
        sc.samples = static_cast<Eigen::Index>(parse_int(value, line));
      } else if (key == "delta_tol") {
        sc.delta_tol = parse_float(value, line);
      } else if (key == "delta_reg") {
        sc.delta_reg = parse_float(value, line);
      } else if (key == "hard_point_weight") {
        sc.hard_point_weight = parse_float(value, line);
      } else if (key == "hybrid_period") {
        sc.hybrid_period = static_cast<Eigen::Index>(parse_int(value, line));
      } else if (key == "warmup_bellman_steps") {
        sc.warmup_bellman_steps = static_cast<Eigen::Index>(parse_int(value, line));
      } else if (key == "max_policy_iterations") {
        sc.max_policy_iterations = static_cast<int>(parse_int(value, line));
      } else if (key == "seed") {
        sc.seed = parse_uint(value, line);
      } else if (key == "als_sweeps") {
        sc.als_sweeps = static_cast<int>(parse_int(value, line));
      } else if (key == "als_tol") {
        sc.als_tol = parse_float(value, line);
      } else if (key == "resample_each_interval") {
        sc.resample_each_interval = parse_bool(value, line);
      } else if (key == "interp") {
        const std::string name = parse_string(value, line);
        if (name == "constant") {
          sc.interp = InterpMode::piecewise_constant;
        } else if (name == "linear") {
          sc.interp = InterpMode::linear;
        } else {
          fail(line, "unknown interpolation '" + name + "' (expected constant or linear)");
        }
      } else if (key == "checkpoint_interval") {
        sc.checkpoint_interval = static_cast<Eigen::Index>(parse_int(value, line));
      } else {
        fail(line, "unknown key '" + key + "' in section [solver]");
      }
    } else {
      EvalConfig& ec = cfg.evaluate;
      if (key == "initial_conditions") {
        ec.initial_conditions = static_cast<Eigen::Index>(parse_int(value, line));
      } else if (key == "kind") {
        const std::string name = parse_string(value, line);
        if (name == "poly") {
          ec.kind = ICKind::poly;
        } else if (name == "constant") {
          ec.kind = ICKind::constant;
        } else {
          fail(line, "unknown initial-condition kind '" + name + "' (expected poly or constant)");
        }
      } else if (key == "seed") {
        ec.seed = parse_uint(value, line);
      } else if (key == "sim_tau") {
        ec.sim_tau = parse_float(value, line);
      } else if (key == "integrator") {
        const std::string name = parse_string(value, line);
        if (name == "euler") {
          ec.integrator = Integrator::euler;
        } else if (name == "rk4") {
          ec.integrator = Integrator::rk4;
        } else {
          fail(line, "unknown integrator '" + name + "' (expected euler or rk4)");
        }
      } else if (key == "open_loop") {
        ec.open_loop = parse_bool(value, line);
      } else if (key == "open_loop_max_iterations") {
        ec.open_loop_max_iterations = static_cast<int>(parse_int(value, line));
      } else if (key == "open_loop_tolerance") {
        ec.open_loop_tolerance = parse_float(value, line);
      } else if (key == "traces") {
        ec.traces = static_cast<Eigen::Index>(parse_int(value, line));
      } else {
        fail(line, "unknown key '" + key + "' in section [evaluate]");
      }
    }
  }

  require(cfg.dimension >= 3, "dimension must be at least 3");
  require(std::isfinite(cfg.sigma), "sigma must be finite");
  require(cfg.gamma > 0.0, "gamma must be positive");
  require(cfg.terminal_weight >= 0.0, "terminal_weight must be non-negative");

  SolverConfig& sc = cfg.solver;
  require(sc.horizon > 0.0, "horizon must be positive");
  require(sc.tau > 0.0, "tau must be positive");
  require(sc.micro_steps >= 1, "micro_steps must be at least 1");
  require(sc.basis_size >= 3, "basis_size must be at least 3");
  require(sc.samples >= 1, "samples must be at least 1");
  require(sc.delta_tol > 0.0, "delta_tol must be positive");
  require(sc.delta_reg >= 0.0, "delta_reg must be non-negative");
  require(sc.hard_point_weight >= 0.0, "hard_point_weight must be non-negative");
  require(sc.hybrid_period >= 1, "hybrid_period must be at least 1");
  require(sc.warmup_bellman_steps >= 0, "warmup_bellman_steps must be non-negative");
  require(sc.max_policy_iterations >= 1, "max_policy_iterations must be at least 1");
  require(sc.als_sweeps >= 1, "als_sweeps must be at least 1");
  require(sc.als_tol >= 0.0, "als_tol must be non-negative");
  require(sc.checkpoint_interval >= 0, "checkpoint_interval must be non-negative");

  if (!ranks_given) {
    sc.ranks = default_ranks(cfg.dimension, sc.basis_size);
  }
  require(static_cast<Eigen::Index>(sc.ranks.size()) == cfg.dimension - 1,
          "ranks must list exactly dimension - 1 bonds, got " + std::to_string(sc.ranks.size()));
  for (auto r : sc.ranks) require(r >= 1, "ranks must be at least 1");

  EvalConfig& ec = cfg.evaluate;
  require(ec.initial_conditions >= 1, "initial_conditions must be at least 1");
  require(ec.sim_tau > 0.0, "sim_tau must be positive");
  require(ec.open_loop_max_iterations >= 1, "open_loop_max_iterations must be at least 1");
  require(ec.open_loop_tolerance > 0.0, "open_loop_tolerance must be positive");
  require(ec.traces >= 0, "traces must be non-negative");

  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_run_config(buffer.str());
  } catch (const config_error& e) {
    throw config_error(path + ": " + e.what());
  }
}

ControlProblem make_problem(const RunConfig& config) {
  ControlProblem problem =
      build_benchmark(config.dimension, config.sigma, config.gamma, config.terminal_weight,
                      config.cubic);
  problem.horizon = config.solver.horizon;
  return problem;
}

}  // namespace ttc
