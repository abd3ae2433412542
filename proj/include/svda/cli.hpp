#pragma once

// Command-line front end: JSON experiment configs, presets, the pipeline
// commands and SVG error plots.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svda/errors.hpp"
#include "svda/svda.hpp"

namespace svda::cli {

inline constexpr int kSchemaVersion = 1;

/// Exit codes.
enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kConfigError = 2,
  kSolverError = 3,
  kTrainingError = 4,
  kBoundViolation = 5,
};

int exit_code_for(ErrorKind kind);

/// Parses a config document. Missing sections keep their defaults; unknown
/// keys, wrong types and syntax errors throw Config with a "line N" anchor.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Complete document (every key written), stable key order.
std::string serialize_config(const ExperimentConfig& config);

std::vector<std::string> preset_names();
/// Throws Config for an unknown name.
ExperimentConfig preset(std::string_view name);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// Log-scale plot of the relative L2 errors (bk, PBDW with true
/// observations, SVDA) against time. Throws Io on an empty table.
std::string render_svg(const std::vector<ErrorRow>& rows, std::string_view title);

struct Options {
  std::string command;
  std::optional<std::filesystem::path> config_path;
  std::optional<std::string> preset_name;
  std::optional<std::uint64_t> seed;
  bool oracle_stub = false;
  int repeat = 1;
  std::filesystem::path out = "run";
};

/// Resolved configuration for the given options (preset or file, then --seed).
ExperimentConfig resolve_config(const Options& options);

int cmd_generate(const Options& options);
int cmd_train(const Options& options);
int cmd_assimilate(const Options& options);
int cmd_report(const Options& options);
int cmd_all(const Options& options);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, char** argv);

}  // namespace svda::cli
