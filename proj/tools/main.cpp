#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ttcontrol/common.hpp"
#include "ttcontrol/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Approximate optimal feedback laws for finite-horizon control via "
               "low-rank value-function regression"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint_path;
  std::string out_dir = ".";
  std::vector<std::string> config_paths;

  CLI::App* solve = app.add_subcommand("solve", "Solve a value function and write a checkpoint");
  solve->add_option("--config", config_path, "Run configuration file")->required();
  solve->add_option("--out", out_dir, "Output directory (default: current)");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Simulate a checkpointed feedback law against baselines");
  evaluate->add_option("--checkpoint", checkpoint_path, "Value-function checkpoint")->required();
  evaluate->add_option("--config", config_path, "Run configuration file")->required();
  evaluate->add_option("--out", out_dir, "Output directory (default: current)");

  CLI::App* compare =
      app.add_subcommand("compare", "Solve and evaluate several configurations side by side");
  compare->add_option("--configs", config_paths, "Run configuration files")->required();
  compare->add_option("--out", out_dir, "Output directory (default: current)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) {
      ttc::cmd_solve(config_path, out_dir);
    } else if (evaluate->parsed()) {
      ttc::cmd_evaluate(checkpoint_path, config_path, out_dir);
    } else {
      ttc::cmd_compare(config_paths, out_dir);
    }
  } catch (const ttc::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
