#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsched/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Resource-aware federated round scheduling simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string output_dir;
  std::vector<std::size_t> points;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run the configured experiment");
  run->add_option("config", config, "Experiment config file")->required();
  run->add_option("-o,--output", output_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override the config seed");

  auto* sweep = app.add_subcommand("sweep", "Compare strategies across clients-per-round values");
  sweep->add_option("config", config, "Experiment config file")->required();
  sweep->add_option("--points", points, "Comma-separated clients-per-round values")
      ->required()
      ->delimiter(',');
  sweep->add_option("-o,--output", output_dir, "Output directory")->required();
  sweep->add_option("--seed", seed, "Override the config seed");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config file");
  validate->add_option("config", config, "Experiment config file")->required();
  validate->add_option("--seed", seed, "Override the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fedsched::cli::kExitConfigError;
  }

  if (run->parsed()) return fedsched::cli::cmd_run(config, output_dir, seed, std::cerr);
  if (sweep->parsed()) return fedsched::cli::cmd_sweep(config, points, output_dir, seed, std::cerr);
  return fedsched::cli::cmd_validate(config, seed, std::cout, std::cerr);
}
