#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"
#include "wafer/error.hpp"
#include "wafer_app/config.hpp"

namespace wafer::app {
namespace {

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(RunConfig{}.validate()); }

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.seed = 99;
  c.out = "x/y";
  c.cnn_epochs = 4;
  c.widths = CnnWidths{2, 3, 4, 5, 6};
  c.variant = CnnVariant::no_conv3;
  c.baselines.forest.max_depth = 7;
  c.occlusion.fill = {0.5f, 0.25f, 0.0f};
  const RunConfig back = from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(canonical(back), canonical(c));
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.baselines.forest.max_depth, std::optional<std::size_t>(7));
}

TEST(Config, UnknownKeyNamesDottedPath) {
  const auto j = nlohmann::json::parse(R"({"cnn": {"epochz": 3}})");
  const auto msg = message_of([&] { from_json(j); });
  EXPECT_NE(msg.find("cnn.epochz"), std::string::npos) << msg;
  const auto nested = nlohmann::json::parse(R"({"baselines": {"forest": {"depth": 3}}})");
  EXPECT_NE(message_of([&] { from_json(nested); }).find("baselines.forest.depth"),
            std::string::npos);
}

TEST(Config, WrongTypeNamesKey) {
  const auto j = nlohmann::json::parse(R"({"autoencoder": {"epochs": "many"}})");
  EXPECT_NE(message_of([&] { from_json(j); }).find("autoencoder.epochs"), std::string::npos);
  const auto neg = nlohmann::json::parse(R"({"seed": -1})");
  EXPECT_THROW(from_json(neg), ConfigError);
  const auto widths = nlohmann::json::parse(R"({"cnn": {"widths": [1, 2, 3]}})");
  EXPECT_THROW(from_json(widths), ConfigError);
}

TEST(Config, WidthPresets) {
  const auto j = nlohmann::json::parse(R"({"cnn": {"widths": "paper"}})");
  const auto c = from_json(j);
  EXPECT_EQ(c.widths.conv1, 16u);
  EXPECT_EQ(c.widths.dense1, 512u);
}

TEST(Config, FileWithComments) {
  testing::TempDir dir("cfg");
  std::ofstream(dir / "c.json") << "// desk run\n{\n  \"seed\": 3, /* inline */\n"
                                   "  \"augment\": {\"target_per_class\": 50}\n}\n";
  const auto c = load_config(dir / "c.json");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.augment_target, 50u);
  EXPECT_EQ(c.cnn_epochs, RunConfig{}.cnn_epochs);
  EXPECT_THROW(load_config(dir / "absent.json"), ConfigError);
  std::ofstream(dir / "bad.json") << "{ nope";
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
}

TEST(Config, Overrides) {
  const auto c = apply_overrides(RunConfig{}, {"cnn.epochs=3", "paths.out=runs/a b",
                                               "cnn.widths=[1,2,3,4,5]", "baselines.enabled=false"});
  EXPECT_EQ(c.cnn_epochs, 3u);
  EXPECT_EQ(c.out, std::filesystem::path("runs/a b"));
  EXPECT_EQ(c.widths.dense2, 5u);
  EXPECT_FALSE(c.run_baselines);
  EXPECT_THROW(apply_overrides(RunConfig{}, {"cnn.nope=1"}), ConfigError);
  EXPECT_THROW(apply_overrides(RunConfig{}, {"no-equals"}), ConfigError);
  EXPECT_THROW(apply_overrides(RunConfig{}, {"cnn.epochs=abc"}), ConfigError);
}

TEST(Config, ValidationNamesField) {
  RunConfig c;
  c.train_fraction = 1.5;
  EXPECT_NE(message_of([&] { c.validate(); }).find("split.train_fraction"), std::string::npos);
  c = RunConfig{};
  c.augment_sigma = 0.0;
  EXPECT_NE(message_of([&] { c.validate(); }).find("augment.sigma"), std::string::npos);
  c = RunConfig{};
  c.occlusion.window = 40;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, CanonicalIsStable) {
  RunConfig a, b;
  EXPECT_EQ(canonical(a), canonical(b));
  b.seed = a.seed + 1;
  EXPECT_NE(canonical(a), canonical(b));
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Config, ShippedFiles) {
  const std::filesystem::path dir = std::filesystem::path(WAFER_SOURCE_DIR) / "configs";
  EXPECT_EQ(canonical(load_config(dir / "desk.json")), canonical(RunConfig{}));
  const auto full = load_config(dir / "full.json");
  EXPECT_NO_THROW(full.validate());
  EXPECT_EQ(full.augment_target, 10000u);
  EXPECT_EQ(full.widths, CnnWidths::paper());
  std::size_t total = 0;
  for (auto n : full.synth_counts) total += n;
  EXPECT_EQ(total, 25519u);
}

}  // namespace
}  // namespace wafer::app
