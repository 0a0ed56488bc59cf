#include <iostream>

#include <CLI11.hpp>

#include "yamabe/cli.hpp"

int main(int argc, char** argv) {
  using namespace yamabe::cli;
  CLI::App app{"Nodal and positive solutions of Yamabe-type equations on symmetry-reduced domains"};
  std::string task, config_path, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("task", task, "solve | thresholds | bubble-check | nonexistence | multiplicity")->required();
  app.add_option("--config", config_path, "run config (section.key = value lines)")->required();
  app.add_option("--seed", seed, "random seed; overrides run.seed");
  app.add_option("--out", out_dir, "output directory; overrides run.out_dir");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? 0 : kConfigError;
  }
  RunConfig config;
  try {
    config = load_config(config_path);
    config.task = parse_task(task);
  } catch (const yamabe::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  }
  if (seed) config.seed = *seed;
  if (!out_dir.empty()) config.out_dir = out_dir;
  return run(config, std::cerr);
}
