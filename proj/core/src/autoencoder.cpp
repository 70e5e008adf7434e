#include "wafer/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wafer/error.hpp"
#include "wafer/random.hpp"

namespace wafer {

namespace {

constexpr float kDecoderBiasInit = 0.1f;

std::vector<nn::LayerSpec> encoder_specs() {
  return {nn::LayerSpec::conv("enc_conv", 3, kChannels, kLatentChannels),
          nn::LayerSpec::relu("enc_relu"), nn::LayerSpec::maxpool("enc_pool")};
}

std::vector<nn::LayerSpec> decoder_specs() {
  return {nn::LayerSpec::transposed_conv("dec_tconv", kLatentChannels, kChannels),
          nn::LayerSpec::relu("dec_relu")};
}

EncodedTensor slice(const nn::Tensor<float>& batch, std::size_t i) {
  EncodedTensor t;
  std::copy_n(batch.data() + i * kEncodedSize, kEncodedSize, t.data.begin());
  return t;
}

}  // namespace

Autoencoder::Autoencoder() : encoder_(encoder_specs()), decoder_(decoder_specs()) {}

Autoencoder Autoencoder::create(std::uint64_t seed) {
  Autoencoder ae;
  ae.encoder_.init_glorot_uniform(derive_seed(seed, {1}));
  ae.decoder_.init_glorot_uniform(derive_seed(seed, {2}));
  for (auto* p : ae.decoder_.parameters()) {
    if (p->value.rank() == 1) p->value.fill(kDecoderBiasInit);
  }
  return ae;
}

nn::Tensor<float> Autoencoder::encode_batch(const nn::Tensor<float>& x) {
  if (x.rank() != 4 || x.dim(1) != kGrid || x.dim(2) != kGrid || x.dim(3) != kChannels) {
    throw ShapeError("encoder expects [N,26,26,3], got " + nn::shape_string(x.shape()));
  }
  return encoder_.forward(x, false);
}

nn::Tensor<float> Autoencoder::decode_batch(const nn::Tensor<float>& z) {
  if (z.rank() != 4 || z.dim(1) != kLatentGrid || z.dim(2) != kLatentGrid ||
      z.dim(3) != kLatentChannels) {
    throw ShapeError("decoder expects [N,13,13,64], got " + nn::shape_string(z.shape()));
  }
  return decoder_.forward(z, false);
}

nn::Tensor<float> Autoencoder::encode(const EncodedTensor& x) {
  auto z = encode_batch(stack_tensors(std::span(&x, 1)));
  return std::move(z).reshaped({kLatentGrid, kLatentGrid, kLatentChannels});
}

EncodedTensor Autoencoder::decode(const nn::Tensor<float>& z) {
  if (z.shape() != nn::Shape{kLatentGrid, kLatentGrid, kLatentChannels}) {
    throw ShapeError("decode expects a 13 x 13 x 64 latent, got " + nn::shape_string(z.shape()));
  }
  return slice(decode_batch(z.reshaped({1, kLatentGrid, kLatentGrid, kLatentChannels})), 0);
}

std::vector<nn::Parameter<float>*> Autoencoder::parameters() {
  auto p = encoder_.parameters();
  auto d = decoder_.parameters();
  p.insert(p.end(), d.begin(), d.end());
  return p;
}

nn::Checkpoint Autoencoder::to_checkpoint() const {
  nn::Checkpoint c = nn::capture(encoder_);
  for (auto& t : nn::capture(decoder_).tensors) c.tensors.push_back(std::move(t));
  c.meta.emplace_back("model", "autoencoder");
  return c;
}

Autoencoder Autoencoder::from_checkpoint(const nn::Checkpoint& ckpt) {
  const auto* kind = ckpt.find_meta("model");
  if (kind == nullptr || *kind != "autoencoder") {
    throw DataError("checkpoint does not hold an autoencoder");
  }
  Autoencoder ae;
  nn::restore(ae.encoder_, ckpt);
  nn::restore(ae.decoder_, ckpt);
  return ae;
}

nn::Tensor<float> stack_tensors(std::span<const EncodedTensor> items) {
  nn::Tensor<float> batch({items.size(), kGrid, kGrid, kChannels});
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].data.size() != kEncodedSize) throw ShapeError("encoded tensor has wrong size");
    std::ranges::copy(items[i].data, batch.data() + i * kEncodedSize);
  }
  return batch;
}

AeTrainResult train_autoencoder(const LabeledDataset& train, const AeTrainOptions& opts,
                                const EpochCallback& on_epoch) {
  AeTrainResult result{Autoencoder::create(opts.seed), {}};
  if (opts.epochs == 0) return result;
  if (train.empty()) throw DataError("autoencoder training set is empty");
  if (opts.batch_size == 0) throw ConfigError("batch_size must be positive");

  std::vector<EncodedTensor> data;
  data.reserve(train.size());
  for (const auto& s : train.items()) data.push_back(to_tensor(s));

  Autoencoder& ae = result.model;
  nn::Adam<float> adam(opts.adam);
  std::vector<std::size_t> order(data.size());
  std::vector<EncodedTensor> batch_items;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(opts.seed, {0xAEULL, epoch}));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
        const std::size_t end = std::min(order.size(), start + opts.batch_size);
        batch_items.clear();
        for (std::size_t i = start; i < end; ++i) batch_items.push_back(data[order[i]]);
        const auto x = stack_tensors(batch_items);

        ae.encoder().zero_grad();
        ae.decoder().zero_grad();
        const auto z = ae.encoder().forward(x);
        const auto xhat = ae.decoder().forward(z);
        const auto lg = nn::mse_with_grad(xhat, x);
        if (!std::isfinite(lg.loss)) throw NumericError("reconstruction loss is not finite");
        ae.encoder().backward(ae.decoder().backward(lg.grad), false);
        auto params = ae.parameters();
        adam.step(params);
        loss_sum += static_cast<double>(lg.loss) * static_cast<double>(end - start);
      }
    } catch (const NumericError& e) {
      throw NumericError("autoencoder training, epoch " + std::to_string(epoch + 1) + ": " +
                         e.what());
    }
    const double mean = loss_sum / static_cast<double>(order.size());
    result.loss_curve.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return result;
}

void AugmentConfig::validate() const {
  if (!(noise_sigma > 0.0)) throw ConfigError("augment noise_sigma must be > 0");
  if (target_per_class == 0) throw ConfigError("augment target_per_class must be positive");
}

std::vector<EncodedTensor> augment_class(Autoencoder& ae, const LabeledDataset& class_items,
                                         DefectClass cls, const AugmentConfig& cfg) {
  cfg.validate();
  if (class_items.empty()) {
    throw DataError("cannot augment class " + std::string(class_name(cls)) + ": no items");
  }
  for (const auto& s : class_items.items()) {
    if (s.label != cls) {
      throw InvalidArgument("augment_class: item " + s.id + " is not of class " +
                            std::string(class_name(cls)));
    }
  }
  const std::size_t have = class_items.size();
  if (have >= cfg.target_per_class) return {};
  const std::size_t need = cfg.target_per_class - have;

  std::vector<EncodedTensor> sources;
  sources.reserve(have);
  for (const auto& s : class_items.items()) sources.push_back(to_tensor(s));

  // Latents of every source once; noise is added per generated sample.
  std::vector<nn::Tensor<float>> latents;
  constexpr std::size_t kChunk = 128;
  for (std::size_t start = 0; start < have; start += kChunk) {
    const std::size_t end = std::min(have, start + kChunk);
    auto z = ae.encode_batch(stack_tensors(std::span(sources).subspan(start, end - start)));
    const std::size_t per = z.size() / (end - start);
    for (std::size_t i = 0; i < end - start; ++i) {
      latents.emplace_back(nn::Shape{kLatentGrid, kLatentGrid, kLatentChannels},
                           std::vector<float>(z.data() + i * per, z.data() + (i + 1) * per));
    }
  }

  std::vector<EncodedTensor> out;
  out.reserve(need);
  const std::size_t per = kLatentGrid * kLatentGrid * kLatentChannels;
  for (std::size_t start = 0; start < need; start += kChunk) {
    const std::size_t end = std::min(need, start + kChunk);
    nn::Tensor<float> z({end - start, kLatentGrid, kLatentGrid, kLatentChannels});
    for (std::size_t k = start; k < end; ++k) {
      const auto& src = latents[k % have];
      Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(label_of(cls)), k}));
      std::normal_distribution<double> eps(0.0, cfg.noise_sigma);
      float* dst = z.data() + (k - start) * per;
      for (std::size_t i = 0; i < per; ++i) dst[i] = src[i] + static_cast<float>(eps(rng));
    }
    const auto xhat = ae.decode_batch(z);
    for (std::size_t i = 0; i < end - start; ++i) out.push_back(slice(xhat, i));
  }
  return out;
}

LabeledDataset augment_all(Autoencoder& ae, const LabeledDataset& train, const AugmentConfig& cfg) {
  cfg.validate();
  if (train.role() == SplitRole::test) {
    throw DataError("refusing to augment a test split");
  }
  const auto counts = train.class_counts();
  std::string missing;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 0) {
      if (!missing.empty()) missing += ", ";
      missing += class_name(static_cast<DefectClass>(c));
    }
  }
  if (!missing.empty()) throw DataError("cannot augment: classes missing from training set: " + missing);

  std::vector<Sample> items(train.items().begin(), train.items().end());
  for (const DefectClass cls : kAllClasses) {
    auto generated = augment_class(ae, train.filter(cls), cls, cfg);
    for (std::size_t k = 0; k < generated.size(); ++k) {
      items.push_back(Sample{.id = "aug-" + std::to_string(label_of(cls)) + "-" + std::to_string(k),
                             .label = cls,
                             .provenance = Provenance::augmented,
                             .data = std::move(generated[k])});
    }
  }
  Rng rng(derive_seed(cfg.seed, {0x5AFFULL}));
  std::shuffle(items.begin(), items.end(), rng);
  return LabeledDataset(std::move(items), SplitRole::train);
}

}  // namespace wafer
