#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wafer/layers.hpp"

namespace wafer::nn {

/// Parameter checkpoint. Text layout:
///
///   wafer-params 1
///   meta <key> <value...>            (zero or more)
///   param <name> <rank> <d0> ... <dk>
///   <values, space separated, shortest round-trip decimal>
///   ...
///   end
///
/// Float values are written with std::to_chars, so a load reproduces every
/// bit of the saved tensors.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const std::string* find_meta(const std::string& key) const;
  bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Collects every parameter of a network.
Checkpoint capture(const Sequential<float>& net);

/// Copies tensors into a network by parameter name. Every network parameter
/// must be present with an identical shape; extra tensors are ignored.
void restore(Sequential<float>& net, const Checkpoint& ckpt);

}  // namespace wafer::nn
