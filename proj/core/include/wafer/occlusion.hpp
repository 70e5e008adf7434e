#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "wafer/cnn.hpp"
#include "wafer/core_data.hpp"
#include "wafer/tensor.hpp"

namespace wafer {

struct OcclusionConfig {
  std::size_t window = 10;
  std::size_t stride = 5;
  std::array<float, kChannels> fill{0.0f, 0.0f, 0.0f};
  /// Rewrites each window with its own contents instead of `fill`.
  bool identity = false;

  void validate() const;  // throws ConfigError
};

/// Window origins along one axis: 0, stride, ... while origin + window <= 26.
std::vector<std::size_t> occlusion_anchors(const OcclusionConfig& cfg);

struct Heatmap {
  std::vector<std::size_t> anchors;  // shared by rows and columns
  std::vector<double> delta;         // anchors x anchors, row-major
  double baseline_f1 = 0;
  OcclusionConfig config;

  std::size_t side() const noexcept { return anchors.size(); }
  double at(std::size_t i, std::size_t j) const { return delta[i * anchors.size() + j]; }
};

using ProbaFn = std::function<nn::Tensor<float>(std::span<const EncodedTensor>)>;

/// Macro-F1 drop when each window is overwritten in every test input:
/// delta = F1(untouched) - F1(occluded). Inputs are not modified.
Heatmap occlusion_heatmap(const ProbaFn& model, std::span<const EncodedTensor> inputs,
                          std::span<const int> labels, const OcclusionConfig& cfg);

Heatmap occlusion_heatmap(CnnModel& model, const LabeledDataset& test, const OcclusionConfig& cfg);

/// Mean delta over the central anchors and over the four corners. The
/// centre is the middle 2x2 block (or the single middle anchor when the
/// side is odd).
struct CenterCorner {
  double center = 0;
  double corner = 0;
};
CenterCorner center_corner_means(const Heatmap& h);

/// heatmap.csv, heatmap.json (baseline F1, config, anchors) and heatmap.pgm.
void write_heatmap(const Heatmap& h, const std::filesystem::path& dir);

}  // namespace wafer
