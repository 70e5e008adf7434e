#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "wafer/layers.hpp"

namespace wafer::testing {

/// conv -> relu -> maxpool -> transposed conv -> relu -> flatten -> dense on
/// a 4x4x2 input: every layer type once.
inline std::vector<nn::LayerSpec> toy_graph() {
  using nn::LayerSpec;
  return {LayerSpec::conv("conv", 3, 2, 3),        LayerSpec::relu("relu1"),
          LayerSpec::maxpool("pool"),              LayerSpec::transposed_conv("tconv", 3, 2),
          LayerSpec::relu("relu2"),                LayerSpec::flatten("flat"),
          LayerSpec::dense("dense", 4 * 4 * 2, 5)};
}

struct GradCheckResult {
  double max_rel_error = 0;  // over every parameter tensor and the input
  std::size_t checked = 0;   // scalar entries compared
};

inline double rel_error(const std::vector<double>& a, const std::vector<double>& f) {
  double diff = 0, na = 0, nf = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - f[i]) * (a[i] - f[i]);
    na += a[i] * a[i];
    nf += f[i] * f[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nf), 1e-12});
}

/// Analytic gradients of softmax cross-entropy at scalar type T against
/// 64-bit central differences (step h) of the same network. The relative
/// error of a tensor is |a - f|_2 / max(|a|_2, |f|_2).
template <typename T>
GradCheckResult gradient_check(std::uint64_t seed, double h = 1e-4) {
  nn::Sequential<double> ref(toy_graph());
  std::mt19937_64 g(seed);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (auto* p : ref.parameters()) {
    for (auto& v : p->value.values()) v = nd(g);
  }
  nn::Tensor<double> x({2, 4, 4, 2});
  for (auto& v : x.values()) v = nd(g);
  const std::vector<int> labels{1, 3};

  auto net = ref.template cast<T>();
  auto xt = x.template cast<T>();
  net.zero_grad();
  const auto logits = net.forward(xt, true);
  const auto lg = nn::softmax_cross_entropy(logits, labels);
  const auto dx = net.backward(lg.grad, true);

  auto loss = [&] {
    return nn::softmax_cross_entropy(ref.forward(x, false), labels).loss;
  };
  GradCheckResult res;
  auto params = ref.parameters();
  auto tparams = net.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::vector<double> a, f;
    for (std::size_t i = 0; i < params[k]->value.size(); ++i) {
      double& v = params[k]->value[i];
      const double keep = v;
      v = keep + h;
      const double up = loss();
      v = keep - h;
      const double down = loss();
      v = keep;
      f.push_back((up - down) / (2 * h));
      a.push_back(static_cast<double>(tparams[k]->grad[i]));
    }
    res.max_rel_error = std::max(res.max_rel_error, rel_error(a, f));
    res.checked += a.size();
  }
  std::vector<double> a, f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = loss();
    x[i] = keep - h;
    const double down = loss();
    x[i] = keep;
    f.push_back((up - down) / (2 * h));
    a.push_back(static_cast<double>(dx[i]));
  }
  res.max_rel_error = std::max(res.max_rel_error, rel_error(a, f));
  res.checked += a.size();
  return res;
}

}  // namespace wafer::testing
