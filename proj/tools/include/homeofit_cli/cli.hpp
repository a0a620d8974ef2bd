#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace homeofit::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitOptimization = 3,
};

/// Fully resolved settings of one run. Echoed to config.json.
struct RunConfig {
  std::string subcommand;
  std::string target;      // named benchmark
  std::string dataset;     // CSV training data (alternative to target)
  std::string validation;  // optional CSV validation data for `dataset`
  std::string mode;        // exact | learned | baseline
  int degree = -1;
  std::optional<std::vector<double>> fixed_coeffs;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/run";

  // Network and optimizer.
  int steps = 20000;
  double lr = 1e-3;
  double lr_min = 1e-5;
  int blocks = 15;
  int width = 8;
  double lipschitz = 0.97;
  int power_iterations = 1;
  int eval_every = 100;
  long selection_points = 0;
  double init_gain = 1.0;

  // Grid overrides (points per axis).
  std::optional<int> train_points;
  std::optional<int> validation_points;

  std::string solver = "pinv";  // baseline: pinv | qr

  // Exact construction.
  int scan_points = 2001;
  int h_samples = 2001;

  std::vector<std::string> reports;  // report subcommand inputs
};

/// Parses argv and dispatches. Returns the process exit code.
int run(int argc, const char* const* argv);

int cmd_construct(const RunConfig& cfg);
int cmd_fit(const RunConfig& cfg);
int cmd_baseline(const RunConfig& cfg);
int cmd_report(const RunConfig& cfg);

/// `requested` if it does not exist yet, otherwise the first free
/// `requested-N`. The directory is created.
std::string fresh_output_dir(const std::string& requested);

std::string config_to_json(const RunConfig& cfg);

}  // namespace homeofit::cli
