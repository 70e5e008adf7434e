#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "test_support.hpp"
#include "wafer/error.hpp"
#include "wafer/features.hpp"

namespace wafer {
namespace {

WaferMap filled(std::uint8_t v) { return WaferMap(kGrid, kGrid, v); }

WaferMap with_block(std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) {
  WaferMap m = filled(1);
  for (std::size_t r = r0; r < r0 + h; ++r)
    for (std::size_t c = c0; c < c0 + w; ++c) m.set(r, c, 2);
  return m;
}

// Dense natural-spline reference: full Gaussian elimination on the second
// derivative system, independent of the tridiagonal solver under test.
std::vector<double> spline_oracle(const std::vector<double>& y, const std::vector<double>& at) {
  const std::size_t n = y.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  a[0][0] = 1.0;
  a[n - 1][n - 1] = 1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    a[i][i - 1] = 1.0;
    a[i][i] = 4.0;
    a[i][i + 1] = 1.0;
    a[i][n] = 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]);
  }
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(a[i][k]) > std::fabs(a[piv][k])) piv = i;
    std::swap(a[k], a[piv]);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k || a[i][k] == 0.0) continue;
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j <= n; ++j) a[i][j] -= f * a[k][j];
    }
  }
  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = a[i][n] / a[i][i];

  std::vector<double> out;
  for (double t : at) {
    auto i = std::min<std::size_t>(static_cast<std::size_t>(t), n - 2);
    const double s = t - static_cast<double>(i);
    const double u = 1.0 - s;
    out.push_back(u * y[i] + s * y[i + 1] +
                  ((u * u * u - u) * m[i] + (s * s * s - s) * m[i + 1]) / 6.0);
  }
  return out;
}

TEST(Density, Bounds) {
  EXPECT_EQ(density_bounds(), (std::array<std::size_t, 6>{0, 5, 10, 16, 21, 26}));
}

TEST(Density, AllGoodAndAllDefect) {
  for (double v : density_features(filled(1))) EXPECT_EQ(v, 0.0);
  for (double v : density_features(filled(2))) EXPECT_EQ(v, 1.0);
}

TEST(Density, TopMiddleZoneOnly) {
  // rows [0,5), cols [10,16) is the top edge-midpoint zone.
  const auto f = density_features(with_block(0, 10, 5, 6));
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(f[i], 0.0) << i;
  EXPECT_EQ(f[9], 1.0);
  EXPECT_EQ(f[10], 0.0);
  EXPECT_EQ(f[11], 0.0);
  EXPECT_EQ(f[12], 0.0);
}

TEST(Density, PartialZoneFraction) {
  // 3 of the 36 cells of the middle zone.
  WaferMap m = filled(1);
  m.set(10, 10, 2);
  m.set(12, 13, 2);
  m.set(15, 15, 2);
  EXPECT_DOUBLE_EQ(density_features(m)[4], 3.0 / 36.0);
}

TEST(Density, RejectsOtherSizes) {
  EXPECT_THROW(density_features(WaferMap(10, 10, 1)), ShapeError);
}

TEST(Radon, CanvasIs40For26) { EXPECT_EQ(radon_canvas(26, 26), 40u); }

TEST(Radon, ZeroAngleIsPaddedColumnSums) {
  WaferMap m = filled(1);
  m.set(3, 2, 2);
  m.set(7, 2, 2);
  m.set(20, 25, 2);
  for (std::size_t r = 5; r < 18; ++r) m.set(r, 11, 2);
  const auto s = radon_sinogram(m);
  ASSERT_EQ(s.positions, 40u);
  ASSERT_EQ(s.angles, 180u);
  const std::size_t pad = (40 - 26) / 2;
  for (std::size_t p = 0; p < 40; ++p) {
    double expect = 0;
    if (p >= pad && p < pad + 26) {
      for (std::size_t r = 0; r < 26; ++r) expect += m.at(r, p - pad) == 2;
    }
    EXPECT_NEAR(s.at(p, 0), expect, 1e-12) << p;
  }
}

TEST(Radon, EveryProjectionConservesMass) {
  auto gen = std::mt19937_64(5);
  WaferMap m = filled(1);
  std::size_t mass = 0;
  for (std::size_t r = 0; r < 26; ++r)
    for (std::size_t c = 0; c < 26; ++c)
      if (gen() % 5 == 0) {
        m.set(r, c, 2);
        ++mass;
      }
  const auto s = radon_sinogram(m);
  for (std::size_t a = 0; a < s.angles; ++a) {
    const auto col = s.column(a);
    EXPECT_NEAR(std::accumulate(col.begin(), col.end(), 0.0), static_cast<double>(mass),
                1e-6 * mass);
  }
}

TEST(Radon, EmptyMaskGivesZeros) {
  const auto s = radon_sinogram(filled(1));
  EXPECT_TRUE(std::ranges::all_of(s.values, [](double v) { return v == 0.0; }));
  for (double v : radon_features(filled(1))) EXPECT_EQ(v, 0.0);
}

TEST(Radon, CenterDiskMeansNearConstant) {
  WaferMap m = filled(1);
  for (std::size_t r = 0; r < 26; ++r)
    for (std::size_t c = 0; c < 26; ++c)
      if (std::hypot(r + 0.5 - 13.0, c + 0.5 - 13.0) <= 5.0) m.set(r, c, 2);
  const auto f = radon_features(m);
  ASSERT_EQ(f.size(), 40u);
  const auto [lo, hi] = std::minmax_element(f.begin(), f.begin() + 20);
  const double mean = std::accumulate(f.begin(), f.begin() + 20, 0.0) / 20.0;
  EXPECT_LT(*hi - *lo, 0.05 * mean);
  // A symmetric disk also projects to nearly the same profile at all angles.
  const auto [slo, shi] = std::minmax_element(f.begin() + 20, f.end());
  EXPECT_LT(*shi - *slo, 0.05 * *shi);
}

TEST(Spline, ConstantAndLinearReproduced) {
  std::vector<double> c(180, 2.5);
  for (double v : cubic_resample(c)) EXPECT_NEAR(v, 2.5, 1e-12);
  std::vector<double> lin(180);
  std::iota(lin.begin(), lin.end(), 0.0);
  const auto r = cubic_resample(lin);
  ASSERT_EQ(r.size(), 20u);
  for (std::size_t k = 0; k < 20; ++k) EXPECT_NEAR(r[k], k * 179.0 / 19.0, 1e-9);
}

TEST(Spline, SineMatchesDenseOracle) {
  std::vector<double> y(180);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sin(2.0 * std::numbers::pi * i / 60.0);
  std::vector<double> at;
  for (std::size_t k = 0; k < 20; ++k) at.push_back(k * 179.0 / 19.0);
  const auto ref = spline_oracle(y, at);
  const auto got = cubic_resample(y);
  for (std::size_t k = 0; k < 20; ++k) {
    EXPECT_NEAR(got[k], ref[k], 1e-9) << k;
    EXPECT_NEAR(got[k], std::sin(2.0 * std::numbers::pi * at[k] / 60.0), 1e-3) << k;
  }
}

TEST(Spline, NeedsFourPoints) {
  std::vector<double> y{1, 2, 3};
  EXPECT_THROW(cubic_resample(y), InvalidArgument);
}

TEST(Geometry, SingleCell) {
  const auto g = geometry_features(with_block(4, 9, 1, 1));
  EXPECT_EQ(g.area, 1);
  EXPECT_EQ(g.perimeter, 4);
  EXPECT_NEAR(g.eccentricity, 0.0, 1e-12);
  EXPECT_NEAR(g.solidity, 1.0, 1e-12);
}

TEST(Geometry, FourByFourSquare) {
  const auto g = geometry_features(with_block(8, 8, 4, 4));
  EXPECT_EQ(g.area, 16);
  EXPECT_EQ(g.perimeter, 16);
  // Unit-square variance of a side-4 block: 16/12.
  EXPECT_NEAR(g.major_axis, 4.0 * std::sqrt(16.0 / 12.0), 1e-9);
  EXPECT_NEAR(g.minor_axis, g.major_axis, 1e-9);
  EXPECT_NEAR(g.eccentricity, 0.0, 1e-6);
  EXPECT_NEAR(g.solidity, 1.0, 1e-12);
}

TEST(Geometry, OneByTenLine) {
  const auto g = geometry_features(with_block(12, 3, 1, 10));
  EXPECT_EQ(g.area, 10);
  EXPECT_EQ(g.perimeter, 22);
  EXPECT_NEAR(g.major_axis, 4.0 * std::sqrt(100.0 / 12.0), 1e-9);
  EXPECT_NEAR(g.minor_axis, 4.0 * std::sqrt(1.0 / 12.0), 1e-9);
  EXPECT_NEAR(g.eccentricity, std::sqrt(0.99), 1e-9);
  EXPECT_GT(g.eccentricity, 0.95);
}

TEST(Geometry, LShapeSolidity) {
  // 2x2 block minus one cell: hull of the corners is the 2x2 square minus
  // a half cell, so solidity = 3 / 3.5.
  WaferMap m = with_block(5, 5, 2, 2);
  m.set(6, 6, 1);
  EXPECT_NEAR(geometry_features(m).solidity, 3.0 / 3.5, 1e-12);
}

TEST(Geometry, LargestRegionWithDiagonalsAndTies) {
  WaferMap m = filled(1);
  // Diagonal 3-cell line (one 8-connected region) and a 3-cell bar below.
  m.set(1, 1, 2);
  m.set(2, 2, 2);
  m.set(3, 3, 2);
  m.set(10, 4, 2);
  m.set(10, 5, 2);
  m.set(10, 6, 2);
  const auto region = largest_defect_region(m);
  ASSERT_EQ(region.size(), 3u);
  EXPECT_EQ(region.front(), (std::pair<std::size_t, std::size_t>{1, 1}));
  m.set(11, 6, 2);
  EXPECT_EQ(largest_defect_region(m).size(), 4u);
}

TEST(Geometry, EmptyMapConventions) {
  const auto g = geometry_features(filled(1));
  EXPECT_EQ(g.area, 0);
  EXPECT_EQ(g.perimeter, 0);
  EXPECT_EQ(g.eccentricity, 0);
  EXPECT_EQ(g.solidity, 1);
}

TEST(Extract59, LayoutAndDeterminism) {
  const auto good = extract_59(filled(1));
  ASSERT_EQ(good.size(), 59u);
  for (std::size_t i = 0; i < 58; ++i) EXPECT_EQ(good[i], 0.0) << i;
  EXPECT_EQ(good[58], 1.0);

  const auto m = with_block(3, 7, 4, 9);
  EXPECT_EQ(extract_59(m), extract_59(m));
  EXPECT_EQ(feature_names().size(), 59u);
}

TEST(Extract59, TensorSamplesUseArgmax) {
  const WaferMap m = with_block(3, 7, 4, 9);
  const Sample as_map{.id = "a", .label = DefectClass::loc, .data = m};
  const Sample as_tensor{.id = "b", .label = DefectClass::loc, .data = one_hot_encode(m)};
  EXPECT_EQ(feature_map(as_tensor), m);
  EXPECT_EQ(extract_59(feature_map(as_map)), extract_59(feature_map(as_tensor)));
}

TEST(FeatureCsv, HeaderAndRows) {
  LabeledDataset ds;
  ds.push_back(Sample{.id = "x1", .label = DefectClass::donut, .data = with_block(2, 2, 3, 3)});
  ds.push_back(Sample{.id = "x2", .label = DefectClass::scratch, .data = filled(1)});
  const auto fm = extract_features(ds);
  ASSERT_EQ(fm.rows, 2u);
  EXPECT_EQ(fm.y, (std::vector<int>{1, 7}));
  testing::TempDir dir("csv");
  write_feature_csv(fm, dir / "f.csv");
  std::ifstream in(dir / "f.csv");
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("id,label,", 0), 0u);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 60);
  std::getline(in, line);
  EXPECT_EQ(line.rfind("x1,1,", 0), 0u);
}

}  // namespace
}  // namespace wafer
