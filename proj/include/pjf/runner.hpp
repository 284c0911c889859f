#pragma once

#include "pjf/diagnostics.hpp"
#include "pjf/model.hpp"
#include "pjf/simulate.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pjf {

/// Everything a command needs besides the scenario. Unset optionals fall back
/// to the scenario's own settings.
struct RunOptions {
  std::filesystem::path out_dir;
  std::string command_line;
  std::string scenario_path;  // recorded in the manifest
  std::optional<std::uint64_t> seed;
  std::size_t paths = 0;      // simulate: files; diagnose: Monte Carlo paths
  std::size_t particles = 0;  // filters and zakai check
  std::size_t runs = 0;       // diagnose: grid / particle runs
  int threads = 1;
  std::optional<std::filesystem::path> events_path;
  std::vector<std::string> checks;
  bool negative_control = false;
  bool snapshots = false;
};

/// Output directory used when none is given: $PJF_OUTPUT_ROOT/<command>, or
/// pjf_out/<command> when the variable is unset.
std::filesystem::path default_out_dir(const std::string& command);

/// Writes path_NNNN.csv and events_NNNN.csv for every path plus manifest.json.
void run_simulate(const ValidatedScenario& scenario, const RunOptions& options);

/// Methods: kalman, ks-particle, zakai-particle, grid, all.
void run_filter(const ValidatedScenario& scenario, const std::string& method, const RunOptions& options);

/// Runs the named checks, writes diagnostics.json and returns the reports.
std::vector<CheckReport> run_diagnose(const ValidatedScenario& scenario, const RunOptions& options);

/// Events for one path (the first path_id in the file), with pre-event
/// values rebuilt from the increments.
std::vector<ObservationEvent> read_events_csv(const std::filesystem::path& path, std::size_t n);

/// Shortest round-trip-safe rendering used by every CSV: %.17g.
std::string csv_number(double v);

}  // namespace pjf
