#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "wafer/adam.hpp"
#include "wafer/features.hpp"
#include "wafer/tensor.hpp"

namespace wafer {

/// Per-feature z-scoring fitted on a training matrix. Standard deviations
/// are floored at 1e-8.
struct ScalerStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static ScalerStats fit(const FeatureMatrix& train);
  FeatureMatrix apply(const FeatureMatrix& m) const;

  bool operator==(const ScalerStats&) const = default;
};

struct LogRegConfig {
  double l2 = 1e-3;
  std::size_t iterations = 500;
  nn::AdamConfig adam{.lr = 0.05};
};

/// Multinomial softmax regression: mean cross-entropy + (l2/2)|W|^2, minimised
/// by full-batch Adam from zero weights.
class LogisticRegression {
 public:
  LogisticRegression();

  static LogisticRegression fit(const FeatureMatrix& train, const LogRegConfig& cfg = {});

  nn::Tensor<float> predict_proba(const FeatureMatrix& x) const;
  /// Class scores W x + b, row-major n x 8.
  std::vector<double> decision(const FeatureMatrix& x) const;

  const std::vector<double>& weights() const noexcept { return w_; }  // 8 x 59
  const std::vector<double>& bias() const noexcept { return b_; }

  void write(std::ostream& out) const;
  static LogisticRegression read(std::istream& in);
  bool operator==(const LogisticRegression&) const = default;

 private:
  std::vector<double> w_;
  std::vector<double> b_;
};

struct SvmConfig {
  double c = 1.0;
  std::size_t epochs = 50;
  double eta0 = 0.1;
  std::uint64_t seed = 0;
};

/// Eight one-vs-rest linear SVMs trained by SGD on
///   lambda/2 |w|^2 + mean_i max(0, 1 - y_i (w.x_i + b)),  lambda = 1/(C n)
/// with step size eta0 / (1 + eta0 lambda t) and a seeded sample order per
/// epoch. Probabilities are a softmax over the eight margins.
class LinearSvm {
 public:
  LinearSvm();

  static LinearSvm fit(const FeatureMatrix& train, const SvmConfig& cfg = {});

  std::vector<double> margins(const FeatureMatrix& x) const;  // n x 8
  nn::Tensor<float> predict_proba(const FeatureMatrix& x) const;

  void write(std::ostream& out) const;
  static LinearSvm read(std::istream& in);
  bool operator==(const LinearSvm&) const = default;

 private:
  std::vector<double> w_;
  std::vector<double> b_;
};

/// Softmax over each row of an n x 8 margin matrix.
nn::Tensor<float> margin_softmax(std::span<const double> margins, std::size_t rows);

struct ForestConfig {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // unlimited when empty
  std::size_t min_samples_split = 2;
  std::size_t features_per_split = 8;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// CART classification tree. Internal nodes send x[feature] <= threshold
/// left; leaves hold class frequencies.
struct DecisionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    std::size_t left = 0;
    std::size_t right = 0;
    std::array<double, kNumClasses> proba{};

    bool operator==(const Node&) const = default;
  };
  std::vector<Node> nodes;  // nodes[0] is the root

  const std::array<double, kNumClasses>& leaf(std::span<const double> x) const;
  std::size_t depth() const;
  bool operator==(const DecisionTree&) const = default;
};

/// Gini impurity 1 - sum_k p_k^2 of a class count vector.
double gini(std::span<const std::size_t> counts);

/// Bagged CART trees. Each split looks at a random subset of features
/// (further features are tried only when none of the subset can separate
/// the node), scores thresholds at midpoints between sorted distinct values
/// by weighted Gini, and keeps the best. Tree t draws from
/// derive_seed(seed, {t}).
class RandomForest {
 public:
  static RandomForest fit(const FeatureMatrix& train, const ForestConfig& cfg = {});

  /// Mean of the trees' leaf frequencies.
  nn::Tensor<float> predict_proba(const FeatureMatrix& x) const;

  std::vector<DecisionTree>& trees() noexcept { return trees_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  void write(std::ostream& out) const;
  static RandomForest read(std::istream& in);
  bool operator==(const RandomForest&) const = default;

 private:
  std::vector<DecisionTree> trees_;
};

struct VoteResult {
  std::vector<int> labels;
  nn::Tensor<float> proba;
};

/// Unweighted mean of member probabilities; argmax with lowest-index ties.
VoteResult soft_vote(std::span<const nn::Tensor<float>> member_proba);

struct BaselineConfig {
  LogRegConfig logreg{};
  SvmConfig svm{};
  ForestConfig forest{};
};

/// The three classical models and the scaler they share. LR and SVM read
/// z-scored features; the forest reads raw features.
struct BaselineSuite {
  ScalerStats scaler;
  LogisticRegression logreg;
  LinearSvm svm;
  RandomForest forest;

  static BaselineSuite fit(const FeatureMatrix& train, const BaselineConfig& cfg = {});

  struct Predictions {
    nn::Tensor<float> logreg;
    nn::Tensor<float> svm;
    nn::Tensor<float> forest;
    VoteResult vote;
  };
  Predictions predict(const FeatureMatrix& raw) const;

  void save(const std::filesystem::path& path) const;
  static BaselineSuite load(const std::filesystem::path& path);
  bool operator==(const BaselineSuite&) const = default;
};

}  // namespace wafer
