#include <gtest/gtest.h>

#include <set>

#include "wafer/autoencoder.hpp"
#include "wafer/error.hpp"
#include "wafer/synthgen.hpp"

namespace wafer {
namespace {

LabeledDataset small_set(std::size_t per_class, std::uint64_t seed = 1) {
  std::array<std::size_t, kNumClasses> counts;
  counts.fill(per_class);
  auto ds = generate_dataset(counts, SynthParams{}, seed);
  ds.set_role(SplitRole::train);
  return ds;
}

TEST(Autoencoder, Shapes) {
  auto ae = Autoencoder::create(1);
  const auto x = to_tensor(small_set(1)[0]);
  const auto z = ae.encode(x);
  EXPECT_EQ(z.shape(), (nn::Shape{13, 13, 64}));
  const auto y = ae.decode(z);
  EXPECT_EQ(y.data.size(), kEncodedSize);
  EXPECT_THROW(ae.decode(nn::Tensor<float>({13, 13, 3})), ShapeError);
}

TEST(Autoencoder, ZeroParamsGiveZeroLatent) {
  Autoencoder ae;
  const auto z = ae.encode(to_tensor(small_set(1)[3]));
  for (float v : z.values()) EXPECT_EQ(v, 0.0f);
  const auto z0 = ae.encode(EncodedTensor{});
  for (float v : z0.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Autoencoder, DeterministicEncoding) {
  auto ae = Autoencoder::create(5);
  const auto x = to_tensor(small_set(1)[2]);
  EXPECT_EQ(ae.encode(x), ae.encode(x));
  EXPECT_EQ(Autoencoder::create(5).encode(x), ae.encode(x));
}

TEST(Autoencoder, TrainingLowersLossAndIsReproducible) {
  const auto ds = small_set(12);
  AeTrainOptions o;
  o.epochs = 4;
  o.batch_size = 32;
  o.seed = 3;
  const auto a = train_autoencoder(ds, o);
  const auto b = train_autoencoder(ds, o);
  ASSERT_EQ(a.loss_curve.size(), 4u);
  EXPECT_LT(a.loss_curve.back(), a.loss_curve.front());
  EXPECT_EQ(a.loss_curve, b.loss_curve);
}

TEST(Autoencoder, ZeroEpochsReturnsInitialisedModel) {
  AeTrainOptions o;
  o.epochs = 0;
  o.seed = 8;
  auto r = train_autoencoder(LabeledDataset{}, o);
  EXPECT_TRUE(r.loss_curve.empty());
  const auto x = to_tensor(small_set(1)[0]);
  EXPECT_EQ(r.model.encode(x), Autoencoder::create(8).encode(x));
}

TEST(Autoencoder, CheckpointRoundTrip) {
  auto ae = Autoencoder::create(2);
  auto back = Autoencoder::from_checkpoint(ae.to_checkpoint());
  const auto x = to_tensor(small_set(1)[6]);
  EXPECT_EQ(back.decode(back.encode(x)), ae.decode(ae.encode(x)));
}

TEST(Augment, CountsFromTableExample) {
  auto ae = Autoencoder::create(1);
  LabeledDataset donut;
  for (std::size_t i = 0; i < 404; ++i) {
    donut.push_back(Sample{"d" + std::to_string(i), DefectClass::donut, Provenance::original,
                           WaferMap(26, 26, 1)});
  }
  AugmentConfig cfg;
  cfg.target_per_class = 10000;
  const auto gen = augment_class(ae, donut, DefectClass::donut, cfg);
  EXPECT_EQ(gen.size(), 9596u);
}

TEST(Augment, NothingWhenAtTarget) {
  auto ae = Autoencoder::create(1);
  const auto ds = small_set(5).filter(DefectClass::loc);
  AugmentConfig cfg;
  cfg.target_per_class = 5;
  EXPECT_TRUE(augment_class(ae, ds, DefectClass::loc, cfg).empty());
  cfg.target_per_class = 3;
  EXPECT_TRUE(augment_class(ae, ds, DefectClass::loc, cfg).empty());
}

TEST(Augment, TinySigmaReproducesReconstruction) {
  auto ae = Autoencoder::create(4);
  const auto ds = small_set(3).filter(DefectClass::center);
  AugmentConfig cfg;
  cfg.noise_sigma = 1e-12;
  cfg.target_per_class = 9;
  const auto gen = augment_class(ae, ds, DefectClass::center, cfg);
  ASSERT_EQ(gen.size(), 6u);
  for (std::size_t k = 0; k < gen.size(); ++k) {
    const auto ref = ae.decode(ae.encode(to_tensor(ds[k % 3])));
    for (std::size_t i = 0; i < kEncodedSize; ++i) EXPECT_NEAR(gen[k].data[i], ref.data[i], 1e-6);
  }
}

TEST(Augment, Errors) {
  auto ae = Autoencoder::create(1);
  AugmentConfig cfg;
  EXPECT_THROW(augment_class(ae, LabeledDataset{}, DefectClass::donut, cfg), DataError);
  const auto ds = small_set(2);
  EXPECT_THROW(augment_class(ae, ds, DefectClass::donut, cfg), InvalidArgument);
  cfg.noise_sigma = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(AugmentAll, UniformHistogramOriginalsKept) {
  auto ae = Autoencoder::create(1);
  auto ds = small_set(4);
  AugmentConfig cfg;
  cfg.target_per_class = 10;
  cfg.seed = 6;
  const auto out = augment_all(ae, ds, cfg);
  for (auto n : out.class_counts()) EXPECT_EQ(n, 10u);
  std::set<std::string> ids;
  std::size_t originals = 0;
  for (const auto& s : out.items()) {
    ids.insert(s.id);
    if (s.provenance == Provenance::augmented) {
      for (float v : std::get<EncodedTensor>(s.data).data) EXPECT_GE(v, 0.0f);
    } else {
      ++originals;
    }
  }
  EXPECT_EQ(originals, ds.size());
  for (const auto& s : ds.items()) EXPECT_TRUE(ids.contains(s.id));
  EXPECT_EQ(out, augment_all(ae, ds, cfg));
}

TEST(AugmentAll, Guards) {
  auto ae = Autoencoder::create(1);
  AugmentConfig cfg;
  cfg.target_per_class = 10;
  auto test = small_set(3);
  test.set_role(SplitRole::test);
  EXPECT_THROW(augment_all(ae, test, cfg), DataError);

  auto partial = small_set(3);
  auto& items = partial.mutable_items();
  std::erase_if(items, [](const Sample& s) {
    return s.label == DefectClass::scratch || s.label == DefectClass::donut;
  });
  try {
    augment_all(ae, partial, cfg);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("Donut"), std::string::npos);
    EXPECT_NE(msg.find("Scratch"), std::string::npos);
  }
}

}  // namespace
}  // namespace wafer
