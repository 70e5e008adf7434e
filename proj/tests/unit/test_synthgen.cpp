#include <gtest/gtest.h>

#include <cmath>

#include "wafer/error.hpp"
#include "wafer/synthgen.hpp"

namespace wafer {
namespace {

double cell_radius(std::size_t r, std::size_t c) {
  return std::hypot(r + 0.5 - kGrid / 2.0, c + 0.5 - kGrid / 2.0);
}

TEST(Synthgen, DeterministicPerSeed) {
  const SynthParams p;
  for (auto cls : kAllClasses) {
    EXPECT_EQ(generate(cls, p, 99), generate(cls, p, 99)) << class_name(cls);
  }
  EXPECT_NE(generate(DefectClass::random, p, 1), generate(DefectClass::random, p, 2));
}

TEST(Synthgen, WaferDiskInvariant) {
  const SynthParams p;
  for (auto cls : kAllClasses) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto m = generate(cls, p, s);
      ASSERT_EQ(m.height(), kGrid);
      for (std::size_t r = 0; r < kGrid; ++r) {
        for (std::size_t c = 0; c < kGrid; ++c) {
          const bool inside = cell_radius(r, c) <= p.wafer_radius;
          EXPECT_EQ(m.at(r, c) != 0, inside) << class_name(cls) << " " << r << "," << c;
        }
      }
    }
  }
}

TEST(Synthgen, NearFullBinomialOracle) {
  SynthParams p;
  p.salt_noise_prob = 0.0;
  p.near_full_rate = {0.9, 0.9};
  std::size_t defects = 0;
  std::size_t on = 0;
  const int reps = 20;
  for (int s = 0; s < reps; ++s) {
    const auto m = generate(DefectClass::near_full, p, s);
    for (auto v : m.cells()) {
      on += v != 0;
      defects += v == 2;
    }
  }
  const double n = static_cast<double>(on);
  const double frac = static_cast<double>(defects) / n;
  const double sigma = std::sqrt(0.9 * 0.1 / n);
  EXPECT_NEAR(frac, 0.9, 3 * sigma);
}

TEST(Synthgen, CenterDefectsWithinRadius) {
  SynthParams p;
  p.salt_noise_prob = 0.0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto m = generate(DefectClass::center, p, s);
    std::size_t defects = 0;
    for (std::size_t r = 0; r < kGrid; ++r) {
      for (std::size_t c = 0; c < kGrid; ++c) {
        if (m.at(r, c) == 2) {
          ++defects;
          EXPECT_LE(cell_radius(r, c), p.center_radius.second * kGrid);
        }
      }
    }
    EXPECT_GT(defects, 0u);
  }
}

TEST(Synthgen, EdgeRingTouchesOnlyTheRim) {
  SynthParams p;
  p.salt_noise_prob = 0.0;
  const auto m = generate(DefectClass::edge_ring, p, 4);
  for (std::size_t r = 0; r < kGrid; ++r) {
    for (std::size_t c = 0; c < kGrid; ++c) {
      if (m.at(r, c) == 2) {
        EXPECT_GE(cell_radius(r, c), p.wafer_radius - p.edge_ring_width.second);
      }
    }
  }
}

TEST(Synthgen, DatasetCountsAndIds) {
  const std::array<std::size_t, kNumClasses> counts{10, 10, 10, 10, 10, 10, 10, 10};
  const auto ds = generate_dataset(counts, SynthParams{}, 5);
  EXPECT_EQ(ds.size(), 80u);
  for (std::size_t c = 0; c < kNumClasses; ++c) EXPECT_EQ(ds.class_counts()[c], 10u);
  for (const auto& s : ds.items()) EXPECT_EQ(s.provenance, Provenance::synthetic);
  EXPECT_EQ(ds, generate_dataset(counts, SynthParams{}, 5));
}

TEST(Synthgen, ItemSeedsIndependentOfOtherClasses) {
  std::array<std::size_t, kNumClasses> a{3, 3, 3, 3, 3, 3, 3, 3};
  auto b = a;
  b[0] = 9;
  const auto da = generate_dataset(a, SynthParams{}, 5).filter(DefectClass::scratch);
  const auto db = generate_dataset(b, SynthParams{}, 5).filter(DefectClass::scratch);
  EXPECT_EQ(da, db);
}

TEST(Synthgen, TableProportionedCounts) {
  // Class table of the source dataset scaled by 1/10 (floor).
  const std::array<std::size_t, kNumClasses> table{4294, 555, 5189, 9680, 3593, 866, 1193, 149};
  const auto counts = table_proportioned_counts();
  for (std::size_t c = 0; c < kNumClasses; ++c) EXPECT_EQ(counts[c], table[c] / 10);
  const auto ds = generate_dataset(counts, SynthParams{}, 1);
  for (std::size_t c = 0; c < kNumClasses; ++c) EXPECT_EQ(ds.class_counts()[c], counts[c]);
}

TEST(Synthgen, ValidateRejectsBadParams) {
  SynthParams p;
  p.salt_noise_prob = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.random_rate = {0.4, 0.2};
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.wafer_radius = 20;
  EXPECT_THROW(p.validate(), ConfigError);
}

}  // namespace
}  // namespace wafer
