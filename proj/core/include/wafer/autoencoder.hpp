#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "wafer/adam.hpp"
#include "wafer/checkpoint.hpp"
#include "wafer/core_data.hpp"
#include "wafer/layers.hpp"

namespace wafer {

inline constexpr std::size_t kLatentGrid = 13;
inline constexpr std::size_t kLatentChannels = 64;

/// Convolutional autoencoder between 26x26x3 wafer tensors and a 13x13x64
/// latent code.
///   encoder: conv 3x3 (3 -> 64), ReLU, 2x2 max-pool
///   decoder: transposed conv 2x2 stride 2 (64 -> 3), ReLU
class Autoencoder {
 public:
  Autoencoder();
  /// Glorot-uniform weights; encoder biases 0, decoder biases 0.1.
  static Autoencoder create(std::uint64_t seed);

  nn::Tensor<float> encode(const EncodedTensor& x);  // 13 x 13 x 64
  EncodedTensor decode(const nn::Tensor<float>& z);

  /// Batched variants: [N,26,26,3] <-> [N,13,13,64].
  nn::Tensor<float> encode_batch(const nn::Tensor<float>& x);
  nn::Tensor<float> decode_batch(const nn::Tensor<float>& z);

  nn::Sequential<float>& encoder() noexcept { return encoder_; }
  nn::Sequential<float>& decoder() noexcept { return decoder_; }
  std::vector<nn::Parameter<float>*> parameters();

  nn::Checkpoint to_checkpoint() const;
  static Autoencoder from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  nn::Sequential<float> encoder_;
  nn::Sequential<float> decoder_;
};

struct AeTrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  nn::AdamConfig adam{};
  std::uint64_t seed = 0;
};

struct AeTrainResult {
  Autoencoder model;
  std::vector<double> loss_curve;  // mean training MSE per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Trains a freshly initialised autoencoder to reconstruct the training
/// tensors under mean squared error.
AeTrainResult train_autoencoder(const LabeledDataset& train, const AeTrainOptions& opts,
                                const EpochCallback& on_epoch = {});

struct AugmentConfig {
  double noise_sigma = 1.0;
  std::size_t target_per_class = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// New samples for one class: target - |items| decodes of noised latents,
/// sources taken cyclically, noise for sample k drawn from
/// derive_seed(seed, {class, k}).
std::vector<EncodedTensor> augment_class(Autoencoder& ae, const LabeledDataset& class_items,
                                         DefectClass cls, const AugmentConfig& cfg);

/// Tops up every class of a training split to target_per_class with
/// augmented samples. Originals are kept untouched; the result is shuffled.
LabeledDataset augment_all(Autoencoder& ae, const LabeledDataset& train, const AugmentConfig& cfg);

/// Stacks samples into a [N,26,26,3] batch.
nn::Tensor<float> stack_tensors(std::span<const EncodedTensor> items);

}  // namespace wafer
