#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wafer/core_data.hpp"

namespace wafer {

inline constexpr std::size_t kDensityFeatures = 13;
inline constexpr std::size_t kRadonPoints = 20;
inline constexpr std::size_t kRadonFeatures = 2 * kRadonPoints;
inline constexpr std::size_t kGeometryFeatures = 6;
inline constexpr std::size_t kFeatureCount = kDensityFeatures + kRadonFeatures + kGeometryFeatures;

using FeatureVector = std::array<double, kFeatureCount>;

/// Zone boundaries of the 5x5 density grid: round(k * 26 / 5), k = 0..5.
std::array<std::size_t, 6> density_bounds();

/// Fraction of defective cells in 13 zones of a 5x5 partition: the nine
/// inner cells (grid rows/cols 1-3, row-major), then the top, right, bottom
/// and left edge-midpoint cells. Requires a 26x26 map.
std::array<double, kDensityFeatures> density_features(const WaferMap& map);

/// Projection matrix, n_positions x n_angles (row-major).
struct Sinogram {
  std::size_t positions = 0;
  std::size_t angles = 0;
  std::vector<double> values;

  double at(std::size_t pos, std::size_t angle) const { return values[pos * angles + angle]; }
  std::vector<double> column(std::size_t angle) const;
};

/// Radon transform of the defect mask (cell == 2). For each angle theta in
/// degrees 0..n_angles-1 the mask is rotated about its centre by -theta onto
/// a square canvas wider than its diagonal, and each canvas column is
/// summed. Every defect cell is spread bilinearly over the canvas, so each
/// projection carries exactly the mask's mass; at theta = 0 the projection
/// is the zero-padded column sums of the mask.
Sinogram radon_sinogram(const WaferMap& map, std::size_t n_angles = 180);

/// Side length of the radon canvas for an h x w map.
std::size_t radon_canvas(std::size_t h, std::size_t w);

/// Natural cubic spline through (i, series[i]) evaluated at n equally
/// spaced points spanning [0, m-1]. Requires m >= 4.
std::vector<double> cubic_resample(std::span<const double> series, std::size_t n = kRadonPoints);

/// Per-angle mean and population standard deviation of the projections,
/// each resampled to 20 points; means first.
std::array<double, kRadonFeatures> radon_features(const WaferMap& map);

struct Geometry {
  double area = 0;
  double perimeter = 0;
  double major_axis = 0;
  double minor_axis = 0;
  double eccentricity = 0;
  double solidity = 1;
};

/// Shape of the largest 8-connected defect region (first in row-major scan
/// order on ties).
///   area        cell count
///   perimeter   unit edges between the region and anything else
///   axes        4 sqrt(lambda) of the second-moment matrix of the region
///               taken as unit squares (centre covariance + I/12)
///   eccentricity sqrt(1 - lambda2 / lambda1)
///   solidity    area / area of the convex hull of the cells' corners
/// A map without defects gives zeros and solidity 1.
Geometry geometry_features(const WaferMap& map);

/// Cells of the largest 8-connected defect region, as (row, col).
std::vector<std::pair<std::size_t, std::size_t>> largest_defect_region(const WaferMap& map);

/// density (13) | radon (40) | geometry (6).
FeatureVector extract_59(const WaferMap& map);

/// The 26x26 map a sample's features are computed on: wafer maps are
/// resized, tensors are decoded by per-cell argmax.
WaferMap feature_map(const Sample& s);

/// Row-major n x 59 matrix plus labels.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::vector<double> x;
  std::vector<int> y;
  std::vector<std::string> ids;

  std::span<const double> row(std::size_t i) const {
    return std::span(x).subspan(i * kFeatureCount, kFeatureCount);
  }
};

FeatureMatrix extract_features(const LabeledDataset& ds);

/// Column names in extract_59 order.
const std::array<std::string, kFeatureCount>& feature_names();

/// CSV with header "id,label,<59 feature names>".
void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path);

}  // namespace wafer
