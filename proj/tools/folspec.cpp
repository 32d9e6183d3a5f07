// Command-line front end: spectrum | sweep | heat | branches | verify.
// Every subcommand takes --config and the shared overrides; outcomes other
// than success use exit 64 for config problems and 70 for runtime failures,
// while verify exits with the id of its first failing check.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "folspec/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for adiabatic spectral limits on foliated tori"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  int workers_override = 0;
  long long seed_override = -1;

  auto add_subcommand = [&](const std::string& name, const std::string& description) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_override, "output directory (overrides the config)");
    sub->add_option("--workers", workers_override, "sweep worker threads (overrides the config)")
        ->check(CLI::Range(1, 256));
    sub->add_option("--seed", seed_override, "solver seed (overrides the config)")
        ->check(CLI::NonNegativeNumber);
    return sub;
  };

  CLI::App* spectrum = add_subcommand("spectrum", "eigenvalue listings per scheduled h");
  CLI::App* sweep = add_subcommand("sweep", "counting-function sweep against the leafwise limit");
  CLI::App* heat = add_subcommand("heat", "heat traces against the leafwise heat limit");
  CLI::App* branches = add_subcommand("branches", "eigenvalue branches and adiabatic limits");
  CLI::App* verify = add_subcommand("verify", "invariants plus the reduced acceptance checklist");

  CLI11_PARSE(app, argc, argv);

  try {
    folspec::ExperimentConfig cfg = folspec::load_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (workers_override > 0) cfg.workers = workers_override;
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);

    if (spectrum->parsed()) return folspec::cmd_spectrum(cfg);
    if (sweep->parsed()) return folspec::cmd_sweep(cfg);
    if (heat->parsed()) return folspec::cmd_heat(cfg);
    if (branches->parsed()) return folspec::cmd_branches(cfg);
    if (verify->parsed()) return folspec::cmd_verify(cfg);
  } catch (const folspec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 70;
  }
  return 0;
}
