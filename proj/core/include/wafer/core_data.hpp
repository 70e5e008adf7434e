#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace wafer {

inline constexpr std::size_t kGrid = 26;
inline constexpr std::size_t kChannels = 3;
inline constexpr std::size_t kNumClasses = 8;
inline constexpr std::size_t kEncodedSize = kGrid * kGrid * kChannels;

// Die states as stored in WM-811K style maps.
enum class Die : std::uint8_t { off = 0, good = 1, defect = 2 };

/// Integer grid of die states, row-major. Cells are validated on construction.
class WaferMap {
 public:
  WaferMap() = default;
  WaferMap(std::size_t height, std::size_t width, std::vector<std::uint8_t> cells);
  WaferMap(std::size_t height, std::size_t width, std::uint8_t fill = 0);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::span<const std::uint8_t> cells() const noexcept { return cells_; }

  std::uint8_t at(std::size_t r, std::size_t c) const { return cells_[r * width_ + c]; }
  void set(std::size_t r, std::size_t c, std::uint8_t v);

  bool operator==(const WaferMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// The eight WM-811K failure types, numbered as in the class table.
enum class DefectClass : std::uint8_t {
  center = 0,
  donut = 1,
  edge_loc = 2,
  edge_ring = 3,
  loc = 4,
  near_full = 5,
  random = 6,
  scratch = 7,
};

inline constexpr std::array<DefectClass, kNumClasses> kAllClasses = {
    DefectClass::center,    DefectClass::donut,  DefectClass::edge_loc, DefectClass::edge_ring,
    DefectClass::loc,       DefectClass::near_full, DefectClass::random, DefectClass::scratch};

std::string_view class_name(DefectClass c) noexcept;
DefectClass class_from_label(int label);  // throws InvalidArgument outside 0..7
DefectClass class_from_name(std::string_view name);
constexpr int label_of(DefectClass c) noexcept { return static_cast<int>(c); }

/// 26x26x3 network input, HWC layout. Encoded maps are one-hot per cell;
/// decoder outputs are arbitrary nonnegative reals in the same layout.
struct EncodedTensor {
  std::vector<float> data = std::vector<float>(kEncodedSize, 0.0f);

  float& at(std::size_t r, std::size_t c, std::size_t ch) {
    return data[(r * kGrid + c) * kChannels + ch];
  }
  float at(std::size_t r, std::size_t c, std::size_t ch) const {
    return data[(r * kGrid + c) * kChannels + ch];
  }
  bool operator==(const EncodedTensor&) const = default;
};

enum class Provenance : std::uint8_t { original, synthetic, augmented };
std::string_view provenance_name(Provenance p) noexcept;
Provenance provenance_from_name(std::string_view name);

// Which side of a split a dataset came from. Augmentation refuses test data.
enum class SplitRole : std::uint8_t { unsplit, train, test };

struct Sample {
  std::string id;
  DefectClass label = DefectClass::center;
  Provenance provenance = Provenance::original;
  std::variant<WaferMap, EncodedTensor> data;

  bool operator==(const Sample&) const = default;
};

class LabeledDataset {
 public:
  LabeledDataset() = default;
  explicit LabeledDataset(std::vector<Sample> items, SplitRole role = SplitRole::unsplit)
      : items_(std::move(items)), role_(role) {}

  std::span<const Sample> items() const noexcept { return items_; }
  std::vector<Sample>& mutable_items() noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const Sample& operator[](std::size_t i) const { return items_[i]; }

  void push_back(Sample s) { items_.push_back(std::move(s)); }

  SplitRole role() const noexcept { return role_; }
  void set_role(SplitRole r) noexcept { role_ = r; }

  std::array<std::size_t, kNumClasses> class_counts() const;
  std::size_t count(DefectClass c) const { return class_counts()[label_of(c)]; }

  // Items of a single class, in dataset order.
  LabeledDataset filter(DefectClass c) const;

  bool operator==(const LabeledDataset&) const = default;

 private:
  std::vector<Sample> items_;
  SplitRole role_ = SplitRole::unsplit;
};

/// Nearest-neighbour resize: out(i,j) = in(floor(i*H/out_h), floor(j*W/out_w)).
WaferMap resize_nearest(const WaferMap& map, std::size_t out_h, std::size_t out_w);

/// One-hot encoding of a 26x26 map; channel k is 1 where the cell equals k.
EncodedTensor one_hot_encode(const WaferMap& map);

/// Inverse of one_hot_encode for exactly one-hot tensors (argmax per cell).
WaferMap decode_one_hot(const EncodedTensor& t);

/// Returns the network input for a sample, encoding (and resizing to 26x26)
/// wafer maps on the fly.
EncodedTensor to_tensor(const Sample& s);

/// Per-class split: floor(train_fraction * n_c) items of each class go to the
/// training side, chosen by a seeded shuffle; the rest go to test. Relative
/// input order is preserved within each side.
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                           double train_fraction,
                                                           std::uint64_t seed);

}  // namespace wafer
