#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "contactkit/event_log.hpp"
#include "contactkit/lattice.hpp"

namespace contactkit::cli {

enum class ExperimentKind { Rho, Shape, Theorem1, Theorem2, SigmaTail };

const char* to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(const std::string& name);

/// One named problem found by validation.
struct Violation {
  std::string key;
  std::string message;
};

/// Flat key-value experiment description (dotted sections). All fields are
/// echoed into outputs for provenance.
struct ExperimentConfig {
  int dimension = 1;
  int radius = 1;

  bool environment_mode = false;
  double lambda = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  std::uint64_t env_seed = 0;

  double horizon = 0.0;
  std::uint64_t replica_target = 0;
  std::uint64_t attempt_cap = 0;
  std::uint64_t root_seed = 0;

  ExperimentKind kind = ExperimentKind::Rho;
  engine::Point direction;                                    // shape, theorem1
  std::vector<int> n_list;                                    // shape
  int order_n = 0;                                            // theorem1
  std::vector<std::pair<engine::Point, engine::Point>> pairs; // theorem2
  std::vector<double> p_list;                                 // theorem2
  std::vector<engine::Point> tail_sites;                      // sigma-tail
  std::vector<double> l_grid;                                 // sigma-tail

  std::string output_dir = "out";

  /// Problems found while converting raw values (bad numbers, unknown keys).
  /// validate() reports these together with the semantic checks.
  std::vector<Violation> parse_issues;

  engine::RateSpec rate_spec() const;

  /// Parses `key = value` lines ('#' comments). Throws config_error on
  /// unreadable files or malformed lines; field-level problems are reported by
  /// validate() instead.
  static ExperimentConfig from_file(const std::filesystem::path& path);
  static ExperimentConfig from_string(const std::string& text);

  /// All violations, without running anything. Empty means runnable.
  std::vector<Violation> validate() const;
};

// Exit codes used by run_experiment and the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitAcceptanceCap = 3;

struct RunOptions {
  int threads = 0;  // 0 = CONTACTKIT_THREADS env, else hardware concurrency
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed_override;
  std::optional<ExperimentKind> kind_override;
};

/// Resolved worker count: CONTACTKIT_THREADS overrides the requested value;
/// nonpositive requests fall back to the hardware concurrency.
int resolve_threads(int requested);

/// Runs one experiment and writes results.csv, summary.json, and seeds.csv
/// into the output directory. Returns kExitOk, kExitInvalidConfig, or
/// kExitAcceptanceCap (diagnostics are still written on a cap failure).
int run_experiment(const ExperimentConfig& config, const RunOptions& options);
int run_experiment_file(const std::filesystem::path& config_path, const RunOptions& options);

/// Re-simulates a single replica and writes its full record as JSON.
int rerun_replica(const ExperimentConfig& config, std::uint64_t replica_id,
                  const RunOptions& options, std::ostream& out);

}  // namespace contactkit::cli
