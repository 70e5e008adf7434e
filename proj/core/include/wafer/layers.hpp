#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wafer/tensor.hpp"

namespace wafer::nn {

// ---------------------------------------------------------------------------
// Single-sample forward ops. Spatial tensors are H x W x C.

/// Zero-padded "same" convolution. kernels: kh x kw x C x F, bias: F.
/// Even kernel sizes pad the extra row/column on the bottom/right.
template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias);

/// Stride-2 transposed convolution with a 2 x 2 x C x F kernel; doubles H and W.
template <typename T>
Tensor<T> transposed_conv_s2(const Tensor<T>& input, const Tensor<T>& kernels,
                             const Tensor<T>& bias);

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index of each output cell
};

/// 2x2 max pooling with stride 2. Ties resolve to the first cell in
/// row-major window order.
template <typename T>
PoolResult<T> maxpool_2x2(const Tensor<T>& input);

template <typename T>
Tensor<T> relu(const Tensor<T>& t);

/// Max-shifted softmax over a vector (or over the last axis of a matrix).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// output = W * input + b with W stored m x n.
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
T mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// -(1/n) sum_i sum_k y_ik log(max(p_ik, 1e-12)) for n x K inputs.
template <typename T>
T cross_entropy(const Tensor<T>& probs, const Tensor<T>& onehot);

template <typename T>
struct LossAndGrad {
  T loss{};
  Tensor<T> grad;   // d loss / d input
  Tensor<T> probs;  // filled by softmax_cross_entropy only
};

template <typename T>
LossAndGrad<T> mse_with_grad(const Tensor<T>& pred, const Tensor<T>& target);

/// Softmax + cross-entropy on N x K logits against integer labels. The
/// gradient is taken with respect to the logits.
template <typename T>
LossAndGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Layers and networks.

enum class LayerKind { conv2d_same, relu, maxpool2x2, transposed_conv_s2, flatten, dense };

/// Architecture description of a layer; parameters are owned by the network.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string name;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t in = 0;   // input channels / features
  std::size_t out = 0;  // output channels / features

  static LayerSpec conv(std::string name, std::size_t k, std::size_t in, std::size_t out);
  static LayerSpec transposed_conv(std::string name, std::size_t in, std::size_t out);
  static LayerSpec dense(std::string name, std::size_t in, std::size_t out);
  static LayerSpec relu(std::string name);
  static LayerSpec maxpool(std::string name);
  static LayerSpec flatten(std::string name);

  /// Weight + bias count (0 for parameterless layers).
  std::size_t parameter_count() const noexcept;
  bool operator==(const LayerSpec&) const = default;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  std::size_t fan_in = 1;
};

template <typename T>
class Layer;

/// A feed-forward stack of layers with reverse-mode gradients. forward()
/// records whatever the backward pass needs; backward() accumulates into the
/// parameters' grad buffers and returns the gradient w.r.t. the input.
template <typename T>
class Sequential {
 public:
  Sequential();
  explicit Sequential(std::vector<LayerSpec> specs);
  Sequential(Sequential&&) noexcept;
  Sequential& operator=(Sequential&&) noexcept;
  ~Sequential();

  Sequential clone() const;

  /// x is batched: [N, ...sample shape].
  Tensor<T> forward(const Tensor<T>& x, bool record = true);
  /// With input_grad == false the first layer skips its input gradient and
  /// an empty tensor is returned.
  Tensor<T> backward(const Tensor<T>& grad_out, bool input_grad = true);

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  Parameter<T>* find(const std::string& name);
  void zero_grad();

  /// He-normal weights (variance 2 / fan_in), zero biases.
  void init_he(std::uint64_t seed);
  /// U(-l, l) weights with l = sqrt(6 / (fan_in + fan_out)), zero biases.
  void init_glorot_uniform(std::uint64_t seed);

  Shape output_shape(const Shape& sample_shape) const;
  const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
  std::size_t parameter_count() const;

  /// Same architecture and parameter values in another scalar type.
  template <typename U>
  Sequential<U> cast() const {
    Sequential<U> out(specs_);
    auto src = parameters();
    auto dst = out.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
    return out;
  }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

extern template class Sequential<float>;
extern template class Sequential<double>;

}  // namespace wafer::nn
