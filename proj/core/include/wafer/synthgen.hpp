#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "wafer/core_data.hpp"

namespace wafer {

using Range = std::pair<double, double>;

/// Shape parameters for the synthetic defect generator. Radii are expressed
/// as fractions of the grid size; angles in degrees.
struct SynthParams {
  std::size_t grid = kGrid;
  double wafer_radius = kGrid / 2.0;
  double salt_noise_prob = 0.02;

  Range center_radius{0.15, 0.30};
  Range donut_inner{0.15, 0.25};
  Range donut_thickness{0.08, 0.14};
  Range edge_loc_span_deg{20.0, 70.0};
  Range edge_loc_depth{2.0, 4.0};   // cells inward from the rim
  Range edge_ring_width{1.0, 3.0};  // cells
  Range loc_radius{0.08, 0.14};
  Range loc_offset{0.30, 0.60};     // fraction of wafer radius
  Range random_rate{0.10, 0.25};
  Range near_full_rate{0.75, 0.95};
  double scratch_min_length = 0.8;  // fraction of wafer radius

  void validate() const;  // throws ConfigError
};

/// Default per-class counts: the class table scaled by 1/10
/// (Center 429, Donut 55, Edge-Loc 518, Edge-Ring 968, Loc 359,
/// Near-full 86, Random 119, Scratch 14).
std::array<std::size_t, kNumClasses> table_proportioned_counts();

/// Seeded wafer-map generator. Cells outside the wafer disk are 0.
WaferMap generate(DefectClass cls, const SynthParams& params, std::uint64_t seed);

/// Generates counts[c] maps per class, flagged synthetic. Item i of class c
/// is generated with derive_seed(seed, {c, i}); ids are "syn-<class>-<i>".
LabeledDataset generate_dataset(const std::array<std::size_t, kNumClasses>& counts,
                                const SynthParams& params, std::uint64_t seed);

}  // namespace wafer
