#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <vector>

namespace betalink {

/// What a command wrote and a short human-readable report.
struct CommandResult {
  std::vector<std::string> files;
  std::string report;
};

/// Writes parameters.csv, summary.csv, observations.csv and model.json to
/// out_dir. On non-convergence writes trace.csv and rethrows.
CommandResult cmd_fit(const std::string& config_path, const std::string& data_path, const std::string& out_dir);

struct DiagnoseOptions {
  std::string config_path, data_path, model_path, out_dir;
  int envelope_k = 100;
  double alpha = 0.05;
  std::optional<std::uint64_t> seed;  ///< overrides the config seed
  int threads = 0;
};

/// Writes residuals.csv, fitted_observed.csv, envelope.csv, cook.csv and
/// tests.csv (RESET and link adequacy) to out_dir.
CommandResult cmd_diagnose(const DiagnoseOptions& options);

/// One <scenario name>.csv per scenario with rows mean, bias, RB, SD, MSE.
CommandResult cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                           std::optional<std::uint64_t> seed = std::nullopt, int threads = 0);

/// Writes marginal_<covariate>.csv with columns x, impact, mu.
CommandResult cmd_marginal(const std::string& config_path, const std::string& data_path,
                           const std::string& model_path, const std::string& covariate, const std::string& out_dir);

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitConvergence = 3;

/// Process exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

}  // namespace betalink
