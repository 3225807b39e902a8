#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "granular/app/commands.hpp"
#include "granular/app/config.hpp"
#include "granular/app/experiments.hpp"
#include "granular/errors.hpp"

namespace {

std::string key_reference() {
  std::string text = "Config keys (section.key = default):\n";
  for (const auto& k : granular::app::documented_keys())
    text += "  " + std::string(k.key) + " = " + k.default_value + "\n      " + k.description + "\n";
  text += "\nExperiments for 'reproduce':\n";
  for (const auto& e : granular::app::experiment_catalog())
    text += "  " + e.id + "  " + e.description + "\n";
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace granular::app;

  CLI::App cli{"Granular firm-growth simulator and analysis toolkit"};
  cli.footer(key_reference());
  cli.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string seed, threads, out_dir;
  bool strict = false;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI config file");
    sub->add_option("--set", overrides, "override a key: section.key=value (repeatable)");
    sub->add_option("--seed", seed, "master seed (overrides run.seed)");
    sub->add_option("--threads", threads, "worker threads (overrides run.threads)");
    sub->add_option("--out-dir", out_dir, "output directory (overrides run.out_dir)");
    sub->add_flag("--strict", strict, "exit 3 when a fit fails to converge or a verdict is FAIL");
  };

  auto* simulate = cli.add_subcommand("simulate", "simulate a firm panel");
  auto* analyze = cli.add_subcommand("analyze", "volatility binning, scaling fits and densities");
  auto* fit = cli.add_subcommand("fit", "MIG maximum likelihood or GSE least-squares fit");
  auto* ingest = cli.add_subcommand("ingest", "clean a raw quarterly CSV into growth rates");
  auto* reproduce = cli.add_subcommand("reproduce", "run a catalogued experiment");
  std::string experiment;
  reproduce->add_option("experiment", experiment, "experiment id")->required();
  for (auto* sub : {simulate, analyze, fit, ingest, reproduce}) add_common(sub);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return kExitValidation;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& o : overrides) config.apply_override(o);
    if (!seed.empty()) config.set("run.seed", seed);
    if (!threads.empty()) config.set("run.threads", threads);
    if (!out_dir.empty()) config.set("run.out_dir", out_dir);
    config.seed();
    config.threads();

    if (simulate->parsed()) return cmd_simulate(config, std::cerr);
    if (analyze->parsed()) return cmd_analyze(config, std::cerr);
    if (fit->parsed()) return cmd_fit(config, strict, std::cerr);
    if (ingest->parsed()) return cmd_ingest(config, std::cerr);
    return cmd_reproduce(experiment, config, strict, std::cerr);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
