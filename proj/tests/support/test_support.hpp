#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "wafer/core_data.hpp"

namespace wafer::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("wafer-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// 26x26 wafer disk of good dies with nothing else set.
inline WaferMap blank_wafer() {
  WaferMap m(kGrid, kGrid, 0);
  const double c = kGrid / 2.0;
  for (std::size_t r = 0; r < kGrid; ++r) {
    for (std::size_t col = 0; col < kGrid; ++col) {
      const double dr = static_cast<double>(r) + 0.5 - c;
      const double dc = static_cast<double>(col) + 0.5 - c;
      if (dr * dr + dc * dc <= (kGrid / 2.0) * (kGrid / 2.0)) m.set(r, col, 1);
    }
  }
  return m;
}

}  // namespace wafer::testing
