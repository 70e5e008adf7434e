#include "wafer/baselines.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include <Eigen/Core>

#include "wafer/error.hpp"
#include "wafer/random.hpp"

namespace wafer {

namespace {

constexpr std::size_t K = kNumClasses;
constexpr std::size_t D = kFeatureCount;

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMapR = Eigen::Map<const MatR>;
using MapR = Eigen::Map<MatR>;

void check_matrix(const FeatureMatrix& m, const char* who) {
  if (m.x.size() != m.rows * D) {
    throw ShapeError(std::string(who) + ": feature matrix must be n x 59");
  }
  for (std::size_t i = 0; i < m.x.size(); ++i) {
    if (!std::isfinite(m.x[i])) {
      throw NumericError(std::string(who) + ": non-finite feature " +
                         feature_names()[i % D] + " in row " + std::to_string(i / D));
    }
  }
}

void check_labels(const FeatureMatrix& m, const char* who) {
  if (m.y.size() != m.rows) throw ShapeError(std::string(who) + ": one label per row required");
  if (m.rows == 0) throw DataError(std::string(who) + ": empty training set");
  for (int y : m.y) {
    if (y < 0 || y >= static_cast<int>(K)) {
      throw InvalidArgument(std::string(who) + ": label out of range 0..7");
    }
  }
}

nn::Tensor<float> to_proba(const MatR& p) {
  nn::Tensor<float> out({static_cast<std::size_t>(p.rows()), K});
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      out[static_cast<std::size_t>(i) * K + k] = static_cast<float>(p(i, static_cast<Eigen::Index>(k)));
    }
  }
  return out;
}

// Row-wise max-shifted softmax in place.
void softmax_rows(MatR& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

// ---- text serialization ---------------------------------------------------

void put(std::ostream& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, end - buf);
}

void put_row(std::ostream& out, const char* tag, std::span<const double> v) {
  out << tag;
  for (double x : v) {
    out << ' ';
    put(out, x);
  }
  out << '\n';
}

std::string token(std::istream& in, const char* what) {
  std::string t;
  if (!(in >> t)) throw DataError(std::string("unexpected end of model file, expected ") + what);
  return t;
}

void expect(std::istream& in, const std::string& tag) {
  const auto t = token(in, tag.c_str());
  if (t != tag) throw DataError("expected '" + tag + "' in model file, found '" + t + "'");
}

double get_double(std::istream& in) {
  const auto t = token(in, "a number");
  double v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || p != t.data() + t.size()) {
    throw DataError("bad number '" + t + "' in model file");
  }
  return v;
}

std::size_t get_size(std::istream& in) {
  const auto t = token(in, "a count");
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || p != t.data() + t.size()) {
    throw DataError("bad count '" + t + "' in model file");
  }
  return v;
}

std::vector<double> get_row(std::istream& in, const char* tag, std::size_t n) {
  expect(in, tag);
  std::vector<double> v(n);
  for (auto& x : v) x = get_double(in);
  return v;
}

// ---- forest ---------------------------------------------------------------

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& m, const ForestConfig& cfg, Rng& rng)
      : m_(m), cfg_(cfg), rng_(rng), features_(D) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::size_t> idx) {
    idx_ = std::move(idx);
    tree_.nodes.clear();
    grow(0, idx_.size(), 0);
    return std::move(tree_);
  }

 private:
  std::size_t grow(std::size_t lo, std::size_t hi, std::size_t depth) {
    const std::size_t id = tree_.nodes.size();
    tree_.nodes.emplace_back();
    const std::size_t n = hi - lo;
    std::array<std::size_t, K> counts{};
    for (std::size_t i = lo; i < hi; ++i) ++counts[static_cast<std::size_t>(m_.y[idx_[i]])];
    const bool pure = std::ranges::count_if(counts, [](std::size_t c) { return c > 0; }) <= 1;
    const bool depth_cap = cfg_.max_depth && depth >= *cfg_.max_depth;

    if (!pure && !depth_cap && n >= cfg_.min_samples_split) {
      if (const auto split = best_split(lo, hi, counts)) {
        const auto [feature, threshold] = *split;
        const auto mid = std::stable_partition(
            idx_.begin() + static_cast<std::ptrdiff_t>(lo), idx_.begin() + static_cast<std::ptrdiff_t>(hi),
            [&](std::size_t r) { return m_.x[r * D + feature] <= threshold; });
        const auto cut = static_cast<std::size_t>(mid - idx_.begin());
        if (cut > lo && cut < hi) {
          const std::size_t left = grow(lo, cut, depth + 1);
          const std::size_t right = grow(cut, hi, depth + 1);
          auto& node = tree_.nodes[id];
          node.feature = static_cast<int>(feature);
          node.threshold = threshold;
          node.left = left;
          node.right = right;
          return id;
        }
      }
    }
    auto& leaf = tree_.nodes[id];
    for (std::size_t k = 0; k < K; ++k) {
      leaf.proba[k] = static_cast<double>(counts[k]) / static_cast<double>(n);
    }
    return id;
  }

  std::optional<std::pair<std::size_t, double>> best_split(std::size_t lo, std::size_t hi,
                                                           const std::array<std::size_t, K>& total) {
    std::shuffle(features_.begin(), features_.end(), rng_);
    const std::size_t n = hi - lo;
    std::optional<std::pair<std::size_t, double>> best;
    double best_score = std::numeric_limits<double>::infinity();
    vals_.resize(n);
    for (std::size_t k = 0; k < D; ++k) {
      if (k >= cfg_.features_per_split && best) break;
      const std::size_t f = features_[k];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = idx_[lo + i];
        vals_[i] = {m_.x[r * D + f], m_.y[r]};
      }
      std::ranges::sort(vals_);
      std::array<std::size_t, K> left{};
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[static_cast<std::size_t>(vals_[i].second)];
        if (!(vals_[i].first < vals_[i + 1].first)) continue;
        std::array<std::size_t, K> right{};
        for (std::size_t c = 0; c < K; ++c) right[c] = total[c] - left[c];
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n - i - 1);
        const double score = nl * gini(left) + nr * gini(right);
        if (score < best_score) {
          best_score = score;
          best = std::pair{f, vals_[i].first + (vals_[i + 1].first - vals_[i].first) / 2.0};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& m_;
  const ForestConfig& cfg_;
  Rng& rng_;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> idx_;
  std::vector<std::pair<double, int>> vals_;
  DecisionTree tree_;
};

}  // namespace

// ---- scaler ---------------------------------------------------------------

ScalerStats ScalerStats::fit(const FeatureMatrix& train) {
  check_matrix(train, "scaler");
  if (train.rows == 0) throw DataError("scaler: empty training set");
  ScalerStats s{std::vector<double>(D, 0.0), std::vector<double>(D, 0.0)};
  const double n = static_cast<double>(train.rows);
  for (std::size_t i = 0; i < train.rows; ++i) {
    for (std::size_t j = 0; j < D; ++j) s.mean[j] += train.x[i * D + j] / n;
  }
  for (std::size_t i = 0; i < train.rows; ++i) {
    for (std::size_t j = 0; j < D; ++j) {
      const double d = train.x[i * D + j] - s.mean[j];
      s.stddev[j] += d * d / n;
    }
  }
  for (auto& v : s.stddev) v = std::max(std::sqrt(v), 1e-8);
  return s;
}

FeatureMatrix ScalerStats::apply(const FeatureMatrix& m) const {
  if (mean.size() != D || stddev.size() != D) throw ShapeError("scaler is not fitted");
  FeatureMatrix out = m;
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < D; ++j) {
      out.x[i * D + j] = (m.x[i * D + j] - mean[j]) / stddev[j];
    }
  }
  return out;
}

// ---- logistic regression --------------------------------------------------

LogisticRegression::LogisticRegression() : w_(K * D, 0.0), b_(K, 0.0) {}

LogisticRegression LogisticRegression::fit(const FeatureMatrix& train, const LogRegConfig& cfg) {
  check_matrix(train, "logistic regression");
  check_labels(train, "logistic regression");
  const auto n = static_cast<Eigen::Index>(train.rows);
  CMapR x(train.x.data(), n, D);
  MatR y = MatR::Zero(n, K);
  for (Eigen::Index i = 0; i < n; ++i) y(i, train.y[static_cast<std::size_t>(i)]) = 1.0;

  nn::Parameter<double> w{"w", nn::Tensor<double>({K, D}), nn::Tensor<double>({K, D}), D};
  nn::Parameter<double> b{"b", nn::Tensor<double>({K}), nn::Tensor<double>({K}), D};
  std::array<nn::Parameter<double>*, 2> params = {&w, &b};
  nn::Adam<double> adam(cfg.adam);
  MatR z(n, K);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    MapR wm(w.value.data(), K, D);
    z.noalias() = x * wm.transpose();
    z.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.value.data(), K);
    softmax_rows(z);
    z -= y;
    z /= static_cast<double>(n);
    MapR(w.grad.data(), K, D).noalias() = z.transpose() * x + cfg.l2 * wm;
    Eigen::Map<Eigen::RowVectorXd>(b.grad.data(), K) = z.colwise().sum();
    adam.step(params);
  }
  LogisticRegression m;
  m.w_.assign(w.value.values().begin(), w.value.values().end());
  m.b_.assign(b.value.values().begin(), b.value.values().end());
  return m;
}

std::vector<double> LogisticRegression::decision(const FeatureMatrix& x) const {
  check_matrix(x, "logistic regression");
  const auto n = static_cast<Eigen::Index>(x.rows);
  std::vector<double> out(x.rows * K);
  MapR z(out.data(), n, K);
  z.noalias() = CMapR(x.x.data(), n, D) * CMapR(w_.data(), K, D).transpose();
  z.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b_.data(), K);
  return out;
}

nn::Tensor<float> LogisticRegression::predict_proba(const FeatureMatrix& x) const {
  auto d = decision(x);
  MatR z = CMapR(d.data(), static_cast<Eigen::Index>(x.rows), K);
  softmax_rows(z);
  return to_proba(z);
}

void LogisticRegression::write(std::ostream& out) const {
  out << "logreg " << K << ' ' << D << '\n';
  put_row(out, "w", w_);
  put_row(out, "b", b_);
}

LogisticRegression LogisticRegression::read(std::istream& in) {
  expect(in, "logreg");
  if (get_size(in) != K || get_size(in) != D) throw DataError("logreg dimensions must be 8 x 59");
  LogisticRegression m;
  m.w_ = get_row(in, "w", K * D);
  m.b_ = get_row(in, "b", K);
  return m;
}

// ---- linear SVM -----------------------------------------------------------

LinearSvm::LinearSvm() : w_(K * D, 0.0), b_(K, 0.0) {}

LinearSvm LinearSvm::fit(const FeatureMatrix& train, const SvmConfig& cfg) {
  check_matrix(train, "linear SVM");
  check_labels(train, "linear SVM");
  if (!(cfg.c > 0.0)) throw ConfigError("svm C must be > 0");
  if (!(cfg.eta0 > 0.0)) throw ConfigError("svm eta0 must be > 0");
  LinearSvm m;
  const std::size_t n = train.rows;
  const double lambda = 1.0 / (cfg.c * static_cast<double>(n));
  std::vector<std::size_t> order(n);
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, {0x5BULL, epoch}));
    std::shuffle(order.begin(), order.end(), rng);
    for (const std::size_t i : order) {
      const double eta = cfg.eta0 / (1.0 + cfg.eta0 * lambda * static_cast<double>(t++));
      const double* xi = train.x.data() + i * D;
      for (std::size_t c = 0; c < K; ++c) {
        double* w = m.w_.data() + c * D;
        const double y = train.y[i] == static_cast<int>(c) ? 1.0 : -1.0;
        const double margin = y * (std::inner_product(w, w + D, xi, 0.0) + m.b_[c]);
        const double shrink = 1.0 - eta * lambda;
        for (std::size_t j = 0; j < D; ++j) w[j] *= shrink;
        if (margin < 1.0) {
          for (std::size_t j = 0; j < D; ++j) w[j] += eta * y * xi[j];
          m.b_[c] += eta * y;
        }
      }
    }
  }
  return m;
}

std::vector<double> LinearSvm::margins(const FeatureMatrix& x) const {
  check_matrix(x, "linear SVM");
  const auto n = static_cast<Eigen::Index>(x.rows);
  std::vector<double> out(x.rows * K);
  MapR z(out.data(), n, K);
  z.noalias() = CMapR(x.x.data(), n, D) * CMapR(w_.data(), K, D).transpose();
  z.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b_.data(), K);
  return out;
}

nn::Tensor<float> LinearSvm::predict_proba(const FeatureMatrix& x) const {
  return margin_softmax(margins(x), x.rows);
}

void LinearSvm::write(std::ostream& out) const {
  out << "svm " << K << ' ' << D << '\n';
  put_row(out, "w", w_);
  put_row(out, "b", b_);
}

LinearSvm LinearSvm::read(std::istream& in) {
  expect(in, "svm");
  if (get_size(in) != K || get_size(in) != D) throw DataError("svm dimensions must be 8 x 59");
  LinearSvm m;
  m.w_ = get_row(in, "w", K * D);
  m.b_ = get_row(in, "b", K);
  return m;
}

nn::Tensor<float> margin_softmax(std::span<const double> margins, std::size_t rows) {
  if (margins.size() != rows * K) throw ShapeError("margin matrix must be n x 8");
  MatR z = CMapR(margins.data(), static_cast<Eigen::Index>(rows), K);
  softmax_rows(z);
  return to_proba(z);
}

// ---- forest ---------------------------------------------------------------

double gini(std::span<const std::size_t> counts) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (n == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t c : counts) s += (static_cast<double>(c) / n) * (static_cast<double>(c) / n);
  return 1.0 - s;
}

void ForestConfig::validate() const {
  if (n_trees == 0) throw ConfigError("forest n_trees must be positive");
  if (max_depth && *max_depth == 0) throw ConfigError("forest max_depth must be positive");
  if (min_samples_split < 2) throw ConfigError("forest min_samples_split must be at least 2");
  if (features_per_split == 0 || features_per_split > D) {
    throw ConfigError("forest features_per_split must lie in 1..59");
  }
}

const std::array<double, kNumClasses>& DecisionTree::leaf(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& nd = nodes[i];
    i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[i].proba;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t best = 0;
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes[i].feature >= 0) {
      stack.emplace_back(nodes[i].left, d + 1);
      stack.emplace_back(nodes[i].right, d + 1);
    }
  }
  return best;
}

RandomForest RandomForest::fit(const FeatureMatrix& train, const ForestConfig& cfg) {
  cfg.validate();
  check_matrix(train, "random forest");
  check_labels(train, "random forest");
  RandomForest f;
  const std::size_t n = train.rows;
  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    Rng rng(derive_seed(cfg.seed, {t}));
    std::vector<std::size_t> idx(n);
    if (cfg.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& i : idx) i = pick(rng);
    } else {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    TreeBuilder builder(train, cfg, rng);
    f.trees_.push_back(builder.build(std::move(idx)));
  }
  return f;
}

nn::Tensor<float> RandomForest::predict_proba(const FeatureMatrix& x) const {
  check_matrix(x, "random forest");
  if (trees_.empty()) throw InvalidArgument("random forest has no trees");
  MatR p = MatR::Zero(static_cast<Eigen::Index>(x.rows), K);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (const auto& t : trees_) {
      const auto& leaf = t.leaf(x.row(i));
      for (std::size_t k = 0; k < K; ++k) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) += leaf[k];
    }
  }
  p /= static_cast<double>(trees_.size());
  return to_proba(p);
}

void RandomForest::write(std::ostream& out) const {
  out << "forest " << trees_.size() << '\n';
  for (const auto& t : trees_) {
    out << "tree " << t.nodes.size() << '\n';
    for (const auto& nd : t.nodes) {
      out << "node " << nd.feature << ' ';
      put(out, nd.threshold);
      out << ' ' << nd.left << ' ' << nd.right;
      for (double p : nd.proba) {
        out << ' ';
        put(out, p);
      }
      out << '\n';
    }
  }
}

RandomForest RandomForest::read(std::istream& in) {
  expect(in, "forest");
  RandomForest f;
  f.trees_.resize(get_size(in));
  for (auto& t : f.trees_) {
    expect(in, "tree");
    t.nodes.resize(get_size(in));
    for (auto& nd : t.nodes) {
      expect(in, "node");
      const auto feat = token(in, "a feature index");
      int v = 0;
      auto [p, ec] = std::from_chars(feat.data(), feat.data() + feat.size(), v);
      if (ec != std::errc{} || p != feat.data() + feat.size() || v < -1 || v >= static_cast<int>(D)) {
        throw DataError("bad feature index '" + feat + "' in forest");
      }
      nd.feature = v;
      nd.threshold = get_double(in);
      nd.left = get_size(in);
      nd.right = get_size(in);
      for (auto& q : nd.proba) q = get_double(in);
      if (nd.feature >= 0 && (nd.left >= t.nodes.size() || nd.right >= t.nodes.size())) {
        throw DataError("forest node child index out of range");
      }
    }
  }
  return f;
}

// ---- voting and suite -----------------------------------------------------

VoteResult soft_vote(std::span<const nn::Tensor<float>> member_proba) {
  if (member_proba.empty()) throw InvalidArgument("soft_vote needs at least one model");
  const auto shape = member_proba.front().shape();
  if (shape.size() != 2 || shape[1] != K) throw ShapeError("soft_vote expects n x 8 probabilities");
  for (const auto& p : member_proba) {
    if (p.shape() != shape) {
      throw ShapeError("soft_vote: member probabilities differ in shape (" +
                       nn::shape_string(p.shape()) + " vs " + nn::shape_string(shape) + ")");
    }
  }
  const std::size_t n = shape[0];
  VoteResult r{std::vector<int>(n), nn::Tensor<float>(shape)};
  const double m = static_cast<double>(member_proba.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, K> acc{};
    for (const auto& p : member_proba) {
      for (std::size_t k = 0; k < K; ++k) acc[k] += p[i * K + k];
    }
    for (std::size_t k = 0; k < K; ++k) r.proba[i * K + k] = static_cast<float>(acc[k] / m);
    r.labels[i] = static_cast<int>(std::ranges::max_element(acc) - acc.begin());
  }
  return r;
}

BaselineSuite BaselineSuite::fit(const FeatureMatrix& train, const BaselineConfig& cfg) {
  BaselineSuite s;
  s.scaler = ScalerStats::fit(train);
  const auto z = s.scaler.apply(train);
  s.logreg = LogisticRegression::fit(z, cfg.logreg);
  s.svm = LinearSvm::fit(z, cfg.svm);
  s.forest = RandomForest::fit(train, cfg.forest);
  return s;
}

BaselineSuite::Predictions BaselineSuite::predict(const FeatureMatrix& raw) const {
  const auto z = scaler.apply(raw);
  Predictions p{logreg.predict_proba(z), svm.predict_proba(z), forest.predict_proba(raw), {}};
  const std::array<nn::Tensor<float>, 3> members = {p.logreg, p.svm, p.forest};
  p.vote = soft_vote(members);
  return p;
}

void BaselineSuite::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "wafer-baselines 1\n";
  out << "scaler " << D << '\n';
  put_row(out, "mean", scaler.mean);
  put_row(out, "std", scaler.stddev);
  logreg.write(out);
  svm.write(out);
  forest.write(out);
  out << "end\n";
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

BaselineSuite BaselineSuite::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    expect(in, "wafer-baselines");
    if (get_size(in) != 1) throw DataError("unsupported baseline file version");
    BaselineSuite s;
    expect(in, "scaler");
    if (get_size(in) != D) throw DataError("scaler must have 59 features");
    s.scaler.mean = get_row(in, "mean", D);
    s.scaler.stddev = get_row(in, "std", D);
    s.logreg = LogisticRegression::read(in);
    s.svm = LinearSvm::read(in);
    s.forest = RandomForest::read(in);
    expect(in, "end");
    return s;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace wafer
