#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wafer/autoencoder.hpp"
#include "wafer/baselines.hpp"
#include "wafer/cnn.hpp"
#include "wafer/occlusion.hpp"
#include "wafer/synthgen.hpp"

namespace wafer::app {

/// Everything a run depends on. Every field has a default; see
/// configs/desk.json for the file layout.
struct RunConfig {
  std::uint64_t seed = 7;

  // Paths. An empty input means "synthesize".
  std::filesystem::path input;
  std::filesystem::path out = "runs/desk";

  std::array<std::size_t, kNumClasses> synth_counts = table_proportioned_counts();
  SynthParams synth{};
  double train_fraction = 0.8;

  std::size_t ae_epochs = 30;
  std::size_t ae_batch = 128;
  double ae_lr = 1e-3;

  std::size_t augment_target = 1000;
  double augment_sigma = 1.0;

  CnnVariant variant = CnnVariant::full;
  CnnWidths widths = CnnWidths::desk();
  std::size_t cnn_epochs = 30;
  std::size_t cnn_batch = 128;
  double cnn_lr = 1e-3;
  double val_fraction = 0.1;

  BaselineConfig baselines{};
  bool run_baselines = true;

  OcclusionConfig occlusion{};
  bool run_occlusion = true;

  void validate() const;  // throws ConfigError naming the field
};

nlohmann::ordered_json to_json(const RunConfig& c);

/// Reads a config object; unknown keys and mistyped values raise
/// ConfigError with the dotted key path. Missing keys keep `base` values.
RunConfig from_json(const nlohmann::json& j, RunConfig base = {});

RunConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" overrides; the value is parsed as JSON when it
/// can be, otherwise taken as a string.
RunConfig apply_overrides(const RunConfig& c, const std::vector<std::string>& sets);

/// Canonical serialization used for hashing.
std::string canonical(const RunConfig& c);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace wafer::app
