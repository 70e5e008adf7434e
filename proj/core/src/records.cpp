#include "wafer/records.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "wafer/error.hpp"

namespace wafer {

using nlohmann::json;
using nlohmann::ordered_json;

void validate(const WaferRecord& rec, std::size_t line) {
  if (rec.id.empty()) throw ValidationError("id", "must be a non-empty string", line);
  if (rec.h == 0) throw ValidationError("h", "must be a positive integer", line);
  if (rec.w == 0) throw ValidationError("w", "must be a positive integer", line);
  if (rec.label && (*rec.label < 0 || *rec.label >= static_cast<int>(kNumClasses))) {
    throw ValidationError("label", "must be in 0..7, got " + std::to_string(*rec.label), line);
  }
  if (rec.grid.size() != rec.h * rec.w) {
    throw ValidationError("grid",
                          "length " + std::to_string(rec.grid.size()) + " does not equal h*w = " +
                              std::to_string(rec.h * rec.w),
                          line);
  }
  for (std::size_t i = 0; i < rec.grid.size(); ++i) {
    const char ch = rec.grid[i];
    if (ch != '0' && ch != '1' && ch != '2') {
      throw ValidationError("grid",
                            "character '" + std::string(1, ch) + "' at offset " +
                                std::to_string(i) + " is not one of '0','1','2'",
                            line);
    }
  }
}

std::string format_record(const WaferRecord& rec) {
  ordered_json j;
  j["id"] = rec.id;
  j["h"] = rec.h;
  j["w"] = rec.w;
  if (rec.label) j["label"] = *rec.label;
  j["grid"] = rec.grid;
  return j.dump();
}

namespace {

std::size_t positive_int(const json& j, const char* key, std::size_t line) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw ValidationError(key, "must be a positive integer", line);
  }
  return v.get<std::size_t>();
}

}  // namespace

WaferRecord parse_record(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed record: ") + e.what(), line_no);
  }
  if (!j.is_object()) throw ParseError("record is not an object", line_no);

  for (const auto& [key, _] : j.items()) {
    if (key != "id" && key != "h" && key != "w" && key != "label" && key != "grid") {
      throw ValidationError(key, "unknown key", line_no);
    }
  }
  for (const char* key : {"id", "h", "w", "grid"}) {
    if (!j.contains(key)) throw ValidationError(key, "missing", line_no);
  }

  WaferRecord rec;
  if (!j["id"].is_string()) throw ValidationError("id", "must be a string", line_no);
  rec.id = j["id"].get<std::string>();
  rec.h = positive_int(j, "h", line_no);
  rec.w = positive_int(j, "w", line_no);
  if (j.contains("label")) {
    if (!j["label"].is_number_integer()) {
      throw ValidationError("label", "must be an integer", line_no);
    }
    rec.label = j["label"].get<int>();
  }
  if (!j["grid"].is_string()) throw ValidationError("grid", "must be a string", line_no);
  rec.grid = j["grid"].get<std::string>();
  validate(rec, line_no);
  return rec;
}

std::vector<WaferRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<WaferRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(parse_record(line, line_no));
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  return out;
}

void write_records(const std::vector<WaferRecord>& records, const std::filesystem::path& path) {
  for (const auto& r : records) validate(r);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << format_record(r) << '\n';
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

WaferRecord to_record(const Sample& s) {
  const auto* map = std::get_if<WaferMap>(&s.data);
  if (map == nullptr) {
    throw InvalidArgument("sample " + s.id + " holds a tensor, not a wafer map");
  }
  WaferRecord rec{.id = s.id, .h = map->height(), .w = map->width(), .label = label_of(s.label),
                  .grid = {}};
  rec.grid.reserve(map->cells().size());
  for (auto v : map->cells()) rec.grid.push_back(static_cast<char>('0' + v));
  return rec;
}

WaferMap to_map(const WaferRecord& rec) {
  validate(rec);
  std::vector<std::uint8_t> cells(rec.grid.size());
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<std::uint8_t>(rec.grid[i] - '0');
  return WaferMap(rec.h, rec.w, std::move(cells));
}

LabeledDataset to_dataset(const std::vector<WaferRecord>& records, Provenance provenance) {
  std::vector<Sample> items;
  for (const auto& r : records) {
    if (!r.label) continue;
    items.push_back(Sample{.id = r.id,
                           .label = class_from_label(*r.label),
                           .provenance = provenance,
                           .data = to_map(r)});
  }
  return LabeledDataset(std::move(items));
}

}  // namespace wafer
