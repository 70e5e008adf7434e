#include "wafer/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wafer/error.hpp"
#include "wafer/random.hpp"

namespace wafer {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "Center", "Donut", "Edge-Loc", "Edge-Ring", "Loc", "Near-full", "Random", "Scratch"};

void check_cell(std::uint8_t v) {
  if (v > 2) {
    throw InvalidArgument("wafer cell value " + std::to_string(v) + " outside {0,1,2}");
  }
}

}  // namespace

WaferMap::WaferMap(std::size_t height, std::size_t width, std::vector<std::uint8_t> cells)
    : height_(height), width_(width), cells_(std::move(cells)) {
  if (height_ == 0 || width_ == 0) {
    throw InvalidArgument("wafer map dimensions must be positive");
  }
  if (cells_.size() != height_ * width_) {
    throw InvalidArgument("wafer map has " + std::to_string(cells_.size()) + " cells, expected " +
                          std::to_string(height_ * width_));
  }
  std::ranges::for_each(cells_, check_cell);
}

WaferMap::WaferMap(std::size_t height, std::size_t width, std::uint8_t fill)
    : WaferMap(height, width, std::vector<std::uint8_t>(height * width, fill)) {}

void WaferMap::set(std::size_t r, std::size_t c, std::uint8_t v) {
  check_cell(v);
  cells_[r * width_ + c] = v;
}

std::string_view class_name(DefectClass c) noexcept { return kClassNames[label_of(c)]; }

DefectClass class_from_label(int label) {
  if (label < 0 || label >= static_cast<int>(kNumClasses)) {
    throw InvalidArgument("class label " + std::to_string(label) + " outside 0..7");
  }
  return static_cast<DefectClass>(label);
}

DefectClass class_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return static_cast<DefectClass>(i);
  }
  throw InvalidArgument("unknown defect class '" + std::string(name) + "'");
}

std::string_view provenance_name(Provenance p) noexcept {
  switch (p) {
    case Provenance::original: return "original";
    case Provenance::synthetic: return "synthetic";
    case Provenance::augmented: return "augmented";
  }
  return "original";
}

Provenance provenance_from_name(std::string_view name) {
  if (name == "original") return Provenance::original;
  if (name == "synthetic") return Provenance::synthetic;
  if (name == "augmented") return Provenance::augmented;
  throw InvalidArgument("unknown provenance '" + std::string(name) + "'");
}

std::array<std::size_t, kNumClasses> LabeledDataset::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& s : items_) ++counts[label_of(s.label)];
  return counts;
}

LabeledDataset LabeledDataset::filter(DefectClass c) const {
  std::vector<Sample> out;
  for (const auto& s : items_) {
    if (s.label == c) out.push_back(s);
  }
  return LabeledDataset(std::move(out), role_);
}

WaferMap resize_nearest(const WaferMap& map, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) {
    throw InvalidArgument("resize target dimensions must be positive");
  }
  const std::size_t h = map.height();
  const std::size_t w = map.width();
  std::vector<std::uint8_t> cells(out_h * out_w);
  for (std::size_t i = 0; i < out_h; ++i) {
    const std::size_t si = i * h / out_h;
    for (std::size_t j = 0; j < out_w; ++j) {
      cells[i * out_w + j] = map.at(si, j * w / out_w);
    }
  }
  return WaferMap(out_h, out_w, std::move(cells));
}

EncodedTensor one_hot_encode(const WaferMap& map) {
  if (map.height() != kGrid || map.width() != kGrid) {
    throw ShapeError("one_hot_encode expects a 26x26 map, got " + std::to_string(map.height()) +
                     "x" + std::to_string(map.width()));
  }
  EncodedTensor t;
  for (std::size_t r = 0; r < kGrid; ++r) {
    for (std::size_t c = 0; c < kGrid; ++c) {
      t.at(r, c, map.at(r, c)) = 1.0f;
    }
  }
  return t;
}

WaferMap decode_one_hot(const EncodedTensor& t) {
  if (t.data.size() != kEncodedSize) throw ShapeError("encoded tensor must hold 26*26*3 values");
  WaferMap map(kGrid, kGrid);
  for (std::size_t r = 0; r < kGrid; ++r) {
    for (std::size_t c = 0; c < kGrid; ++c) {
      std::uint8_t best = 0;
      for (std::uint8_t k = 1; k < kChannels; ++k) {
        if (t.at(r, c, k) > t.at(r, c, best)) best = k;
      }
      map.set(r, c, best);
    }
  }
  return map;
}

EncodedTensor to_tensor(const Sample& s) {
  if (const auto* t = std::get_if<EncodedTensor>(&s.data)) return *t;
  const auto& map = std::get<WaferMap>(s.data);
  if (map.height() == kGrid && map.width() == kGrid) return one_hot_encode(map);
  return one_hot_encode(resize_nearest(map, kGrid, kGrid));
}

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                           double train_fraction,
                                                           std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0,1)");
  }
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[label_of(ds[i].label)].push_back(i);

  std::vector<bool> to_train(ds.size(), false);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw DataError("cannot split class " + std::string(class_name(DefectClass(c))) +
                      ": it has fewer than 2 items");
    }
    Rng rng(derive_seed(seed, {0x5917ULL, c}));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(idx.size()) + 1e-9));
    for (std::size_t k = 0; k < n_train; ++k) to_train[idx[k]] = true;
  }

  std::vector<Sample> train;
  std::vector<Sample> test;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (to_train[i] ? train : test).push_back(ds[i]);
  }
  return {LabeledDataset(std::move(train), SplitRole::train),
          LabeledDataset(std::move(test), SplitRole::test)};
}

}  // namespace wafer
