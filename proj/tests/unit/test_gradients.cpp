#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "wafer/layers.hpp"

namespace wafer {
namespace {

using testing::gradient_check;

TEST(GradientCheck, ToyGraphDouble) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = gradient_check<double>(seed);
    EXPECT_LE(r.max_rel_error, 1e-6) << "seed " << seed;
    EXPECT_EQ(r.checked, 57u + 26u + 165u + 64u);
  }
}

TEST(GradientCheck, ToyGraphFloat) {
  for (std::uint64_t seed : {1, 2, 3}) {
    EXPECT_LE(gradient_check<float>(seed).max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(GradientCheck, DenseWeightGradIsOuterProduct) {
  nn::Sequential<double> net({nn::LayerSpec::dense("d", 3, 2)});
  net.init_he(1);
  const nn::Tensor<double> x({1, 3}, std::vector<double>{0.5, -1.0, 2.0});
  const nn::Tensor<double> dy({1, 2}, std::vector<double>{3.0, -0.25});
  net.zero_grad();
  net.forward(x, true);
  net.backward(dy, true);
  const auto& g = net.find("d.weight")->grad;
  for (int m = 0; m < 2; ++m) {
    for (int n = 0; n < 3; ++n) EXPECT_DOUBLE_EQ(g[m * 3 + n], dy[m] * x[n]);
  }
  EXPECT_DOUBLE_EQ(net.find("d.bias")->grad[1], -0.25);
}

TEST(GradientCheck, SkippedInputGradientLeavesParamsUnchanged) {
  nn::Sequential<double> a(testing::toy_graph());
  a.init_he(4);
  auto b = a.clone();
  nn::Tensor<double> x({2, 4, 4, 2}, 0.3);
  x[5] = -1.0;
  nn::Tensor<double> dy({2, 5}, 1.0);
  for (auto* net : {&a, &b}) {
    net->zero_grad();
    net->forward(x, true);
  }
  const auto dx = a.backward(dy, true);
  const auto none = b.backward(dy, false);
  EXPECT_EQ(dx.size(), x.size());
  EXPECT_EQ(none.size(), 0u);
  auto pa = a.parameters();
  auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->grad, pb[i]->grad);
}

}  // namespace
}  // namespace wafer
