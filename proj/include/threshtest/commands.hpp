#pragma once

#include <filesystem>
#include <string>

#include "threshtest/config.hpp"
#include "threshtest/counts.hpp"
#include "threshtest/report.hpp"

// Command implementations behind the CLI. Each command writes its outputs
// plus a manifest (config echo, version, wall time) into config.out and
// throws ConfigError / DataError / ConvergenceError on failure; the CLI
// maps those to distinct exit codes.

namespace threshtest {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitConvergence = 4;

// Draws on disk: chain,iteration,divergent,log_density,<parameter...> with
// 17-significant-digit values (lossless round trip).
void write_draws_csv(const PosteriorDraws& draws,
                     const std::vector<std::string>& parameter_names,
                     const std::filesystem::path& path);
PosteriorDraws read_draws_csv(const std::filesystem::path& path,
                              const std::vector<std::string>& expected_names);

// Loads the configured input counts: counts_csv when set, otherwise the
// tests/cases/census triple through the processing method.
ObservedCounts load_input_counts(const RunConfig& config);

struct FitResult {
  PosteriorDraws draws;
  Diagnostics diag;
  DisparityReport report;
};

// ingest/model/sample/report pipeline used by fit, recover and robustness.
// Writes nothing; throws on sampler failure.
FitResult fit_pipeline(const Model& model, const RunConfig& config);

void cmd_fit(const RunConfig& config);
void cmd_simulate(const RunConfig& config);
void cmd_recover(const RunConfig& config);
void cmd_demo(const RunConfig& config);
void cmd_report(const RunConfig& config);
void cmd_ppc(const RunConfig& config);
void cmd_robustness(const RunConfig& config);

// Dispatches by name and maps exceptions to exit codes.
int run_command(const std::string& name, const RunConfig& config);

}  // namespace threshtest
