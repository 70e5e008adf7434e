#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"
#include "wafer/error.hpp"
#include "wafer/records.hpp"
#include "wafer/synthgen.hpp"

namespace wafer {
namespace {

using testing::TempDir;

TEST(Records, FormatIsByteStable) {
  const WaferRecord r{"lot1-07", 3, 3, 0, "010121010"};
  EXPECT_EQ(format_record(r), R"({"id":"lot1-07","h":3,"w":3,"label":0,"grid":"010121010"})");
  const WaferRecord u{"u", 1, 2, std::nullopt, "12"};
  EXPECT_EQ(format_record(u), R"({"id":"u","h":1,"w":2,"grid":"12"})");
}

TEST(Records, ParseOneValidRecord) {
  const auto r = parse_record(R"({"id":"a","h":2,"w":2,"label":7,"grid":"0120"})", 1);
  EXPECT_EQ(r, (WaferRecord{"a", 2, 2, 7, "0120"}));
}

TEST(Records, ValidationErrorsNameFieldAndLine) {
  try {
    parse_record(R"({"id":"a","h":2,"w":2,"grid":"012"})", 4);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "grid");
    EXPECT_EQ(e.line(), 4u);
  }
  try {
    parse_record(R"({"id":"a","h":1,"w":2,"grid":"13"})", 2);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "grid");
  }
  try {
    parse_record(R"({"id":"a","h":1,"w":2,"label":9,"grid":"11"})", 2);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "label");
  }
  EXPECT_THROW(parse_record(R"({"id":"a","h":1,"w":2,"grid":"11","x":1})", 1), ValidationError);
  EXPECT_THROW(parse_record(R"({"h":1,"w":2,"grid":"11"})", 1), ValidationError);
  EXPECT_THROW(parse_record(R"({"id":"a","h":-1,"w":2,"grid":"11"})", 1), ValidationError);
}

TEST(Records, MalformedLineIsParseError) {
  try {
    parse_record("{broken", 12);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 12u);
  }
  EXPECT_THROW(parse_record("[1,2]", 1), ParseError);
}

TEST(Records, ReadReportsLineNumber) {
  TempDir dir("records");
  {
    std::ofstream out(dir / "x.jsonl");
    out << R"({"id":"a","h":1,"w":1,"grid":"1"})" << '\n' << R"({"id":"b","h":1,"w":1,"grid":"5"})" << '\n';
  }
  try {
    read_records(dir / "x.jsonl");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(read_records(dir / "missing.jsonl"), DataError);
}

TEST(Records, RoundTripSynthetic) {
  TempDir dir("records");
  const std::array<std::size_t, kNumClasses> counts{13, 13, 13, 13, 12, 12, 12, 12};
  const auto ds = generate_dataset(counts, SynthParams{}, 3);
  std::vector<WaferRecord> recs;
  for (const auto& s : ds.items()) recs.push_back(to_record(s));
  recs[5].label.reset();
  ASSERT_EQ(recs.size(), 100u);
  write_records(recs, dir / "r.jsonl");
  EXPECT_EQ(read_records(dir / "r.jsonl"), recs);

  const auto back = to_dataset(read_records(dir / "r.jsonl"));
  EXPECT_EQ(back.size(), 99u);  // the unlabeled record is skipped
  EXPECT_EQ(std::get<WaferMap>(back[0].data), std::get<WaferMap>(ds[0].data));
}

TEST(Records, EmptyFileRoundTrip) {
  TempDir dir("records");
  write_records({}, dir / "e.jsonl");
  EXPECT_EQ(std::filesystem::file_size(dir / "e.jsonl"), 0u);
  EXPECT_TRUE(read_records(dir / "e.jsonl").empty());
}

TEST(Records, MapConversion) {
  const WaferRecord r{"m", 2, 3, 4, "012210"};
  const auto m = to_map(r);
  EXPECT_EQ(m.height(), 2u);
  EXPECT_EQ(m.at(1, 0), 2);
  EXPECT_EQ(m.at(0, 2), 2);
}

}  // namespace
}  // namespace wafer
