#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "contactkit/errors.hpp"
#include "contactkit/experiment.hpp"
#include "contactkit/version.hpp"

namespace {

using contactkit::cli::ExperimentConfig;
using contactkit::cli::RunOptions;

std::optional<contactkit::cli::ExperimentKind> parse_kind_or_die(const std::string& name) {
  auto kind = contactkit::cli::parse_kind(name);
  if (!kind) {
    std::cerr << "unknown experiment kind '" << name << "'\n";
    std::exit(contactkit::cli::kExitInvalidConfig);
  }
  return kind;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contactkit: contact process Monte Carlo experiments"};
  app.set_version_flag("--version", std::string(contactkit::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string kind_name;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::uint64_t replica_id = 0;

  auto add_common = [&](CLI::App* cmd, bool with_run_flags) {
    cmd->add_option("--config", config_path, "Experiment config file")->required();
    if (with_run_flags) {
      cmd->add_option("--kind", kind_name, "Override the experiment kind");
      cmd->add_option("--threads", threads,
                      "Worker threads (CONTACTKIT_THREADS overrides; default: all cores)");
      cmd->add_option("--out", out_dir, "Override the output directory");
      cmd->add_option("--seed", seed, "Override the root seed")
          ->each([&](const std::string&) { seed_given = true; });
    }
  };

  CLI::App* run = app.add_subcommand("run", "Run an experiment and write results");
  add_common(run, true);

  CLI::App* validate = app.add_subcommand("validate", "Check a config without running it");
  add_common(validate, false);

  CLI::App* rerun = app.add_subcommand("rerun-replica", "Re-simulate one replica and print it");
  add_common(rerun, true);
  rerun->add_option("--replica", replica_id, "Replica id to re-run")->required();

  CLI11_PARSE(app, argc, argv);

  RunOptions options;
  options.threads = threads;
  if (!kind_name.empty()) options.kind_override = parse_kind_or_die(kind_name);
  if (!out_dir.empty()) options.out_dir = out_dir;
  if (seed_given) options.seed_override = seed;

  try {
    if (app.got_subcommand(run)) return contactkit::cli::run_experiment_file(config_path, options);

    if (app.got_subcommand(validate)) {
      ExperimentConfig config;
      try {
        config = ExperimentConfig::from_file(config_path);
      } catch (const contactkit::config_error& e) {
        std::cerr << e.what() << '\n';
        return contactkit::cli::kExitInvalidConfig;
      }
      const auto violations = config.validate();
      for (const auto& v : violations) std::cout << v.key << ": " << v.message << '\n';
      if (violations.empty()) {
        std::cout << "ok\n";
        return contactkit::cli::kExitOk;
      }
      return contactkit::cli::kExitInvalidConfig;
    }

    if (app.got_subcommand(rerun)) {
      ExperimentConfig config;
      try {
        config = ExperimentConfig::from_file(config_path);
      } catch (const contactkit::config_error& e) {
        std::cerr << e.what() << '\n';
        return contactkit::cli::kExitInvalidConfig;
      }
      return contactkit::cli::rerun_replica(config, replica_id, options, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return contactkit::cli::kExitFailure;
  }
  return contactkit::cli::kExitFailure;
}
