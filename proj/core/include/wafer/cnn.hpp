#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wafer/adam.hpp"
#include "wafer/checkpoint.hpp"
#include "wafer/core_data.hpp"
#include "wafer/layers.hpp"

namespace wafer {

/// full: conv1 -> conv2 -> conv3 -> flatten -> dense1 -> dense2 -> out
/// no_conv3: the third convolution is removed
/// no_dense1: the widest dense layer is removed; dense2 reads the flatten
enum class CnnVariant { full, no_conv3, no_dense1 };

inline constexpr std::array<CnnVariant, 3> kAllVariants = {CnnVariant::full, CnnVariant::no_conv3,
                                                           CnnVariant::no_dense1};

std::string_view variant_name(CnnVariant v) noexcept;
CnnVariant variant_from_name(std::string_view name);

/// Layer widths. paper() is the published architecture (16/64/128 filters,
/// 512/128 dense units); desk() is a narrow copy of the same topology that
/// trains in minutes on one CPU core.
struct CnnWidths {
  std::size_t conv1 = 16;
  std::size_t conv2 = 64;
  std::size_t conv3 = 128;
  std::size_t dense1 = 512;
  std::size_t dense2 = 128;

  static CnnWidths paper() { return {}; }
  static CnnWidths desk() { return {4, 8, 8, 32, 16}; }

  bool operator==(const CnnWidths&) const = default;
};

struct LayerParamCount {
  std::string layer;
  std::size_t count = 0;
};

std::vector<nn::LayerSpec> cnn_specs(CnnVariant variant, const CnnWidths& widths);

class CnnModel {
 public:
  /// Zero-initialised parameters.
  CnnModel(CnnVariant variant, CnnWidths widths);

  CnnVariant variant() const noexcept { return variant_; }
  const CnnWidths& widths() const noexcept { return widths_; }

  std::size_t flatten_size() const noexcept;
  /// Per parameterised layer (conv1, conv2, [conv3], [dense1], dense2, out).
  std::vector<LayerParamCount> parameter_counts() const;
  std::size_t total_parameters() const;

  /// Class probabilities for one wafer.
  std::vector<float> forward(const EncodedTensor& x);
  /// [N,8] probabilities, evaluated in chunks.
  nn::Tensor<float> predict_proba(std::span<const EncodedTensor> xs);
  std::vector<int> predict(std::span<const EncodedTensor> xs);

  nn::Sequential<float>& net() noexcept { return net_; }
  const nn::Sequential<float>& net() const noexcept { return net_; }

  nn::Checkpoint to_checkpoint() const;
  static CnnModel from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  CnnVariant variant_;
  CnnWidths widths_;
  nn::Sequential<float> net_;
};

/// Assembles a variant with Glorot-uniform weights and zero biases.
CnnModel build_cnn(CnnVariant variant, const CnnWidths& widths, std::uint64_t seed);

struct EpochStats {
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;
};

/// Per-epoch curves; validation values are 0 when no items are held out.
struct TrainReport {
  std::vector<EpochStats> epochs;
};

struct CnnTrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double val_fraction = 0.1;
  nn::AdamConfig adam{};
  std::uint64_t seed = 0;
};

using CnnEpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

/// Adam + cross-entropy. The training set is shuffled once with the seed and
/// its last floor(val_fraction * n) items are held out for the validation
/// curves.
TrainReport train_cnn(CnnModel& model, const LabeledDataset& train, const CnnTrainOptions& opts,
                      const CnnEpochCallback& on_epoch = {});

std::vector<EncodedTensor> tensors_of(const LabeledDataset& ds);
std::vector<int> labels_of(const LabeledDataset& ds);

/// Row-wise argmax, lowest index on ties.
std::vector<int> argmax_rows(const nn::Tensor<float>& proba);

}  // namespace wafer
