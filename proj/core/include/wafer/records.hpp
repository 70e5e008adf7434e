#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wafer/core_data.hpp"

namespace wafer {

/// One wafer in the interchange format. Each record is one JSON object per
/// line with keys in this order:
///
///   {"id":"lot1-07","h":3,"w":3,"label":0,"grid":"010121010"}
///
/// `label` is omitted for unlabeled wafers. `grid` holds h*w characters from
/// {'0','1','2'} in row-major order. Lines end in '\n'.
struct WaferRecord {
  std::string id;
  std::size_t h = 0;
  std::size_t w = 0;
  std::optional<int> label;
  std::string grid;

  bool operator==(const WaferRecord&) const = default;
};

/// Throws ValidationError naming the offending field.
void validate(const WaferRecord& rec, std::size_t line = 0);

std::string format_record(const WaferRecord& rec);
WaferRecord parse_record(const std::string& line, std::size_t line_no);

std::vector<WaferRecord> read_records(const std::filesystem::path& path);
void write_records(const std::vector<WaferRecord>& records, const std::filesystem::path& path);

WaferRecord to_record(const Sample& s);  // requires a WaferMap sample
WaferMap to_map(const WaferRecord& rec);

/// Builds a dataset from labeled records; unlabeled ones are skipped.
/// Maps are kept at their native size (to_tensor resizes on demand).
LabeledDataset to_dataset(const std::vector<WaferRecord>& records,
                          Provenance provenance = Provenance::original);

}  // namespace wafer
