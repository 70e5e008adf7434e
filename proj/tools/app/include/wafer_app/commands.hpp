#pragma once

#include <string>
#include <vector>

#include "wafer_app/config.hpp"
#include "wafer_app/run.hpp"

namespace wafer::app {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitOther = 4;

struct CommandOptions {
  Logger log;
  bool no_augment = false;  // train-cnn: fit on the original split only
};

// Each command writes its artifacts under cfg.out and a manifest.json.
void cmd_synth(const RunConfig& cfg, const CommandOptions& opt);
void cmd_ingest(const RunConfig& cfg, const CommandOptions& opt);
void cmd_train_ae(const RunConfig& cfg, const CommandOptions& opt);
void cmd_augment(const RunConfig& cfg, const CommandOptions& opt);
void cmd_train_cnn(const RunConfig& cfg, const CommandOptions& opt);
void cmd_train_baselines(const RunConfig& cfg, const CommandOptions& opt);
void cmd_evaluate(const RunConfig& cfg, const CommandOptions& opt);
void cmd_occlusion(const RunConfig& cfg, const CommandOptions& opt);
void cmd_ablate(const RunConfig& cfg, const CommandOptions& opt);
void cmd_pipeline(const RunConfig& cfg, const CommandOptions& opt);

/// Parses argv, runs one subcommand and maps errors to exit codes.
int run_cli(int argc, char** argv);

}  // namespace wafer::app
