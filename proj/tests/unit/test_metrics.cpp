#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "wafer/error.hpp"
#include "wafer/metrics.hpp"

namespace wafer {
namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] == 1) ++pos; else ++neg;
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] == 1) continue;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / (pos * neg);
}

double brute_ap(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  double ap = 0, prev_recall = 0;
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) (y[i] == 1 ? tp : fp) += 1;
    }
    const double recall = tp / pos;
    ap += (recall - prev_recall) * tp / (tp + fp);
    prev_recall = recall;
  }
  return ap;
}

TEST(Confusion, SmallCaseAndTotals) {
  std::vector<int> t{0, 0, 1}, p{0, 1, 1};
  const auto cm = confusion(t, p);
  EXPECT_EQ(cm(0, 0), 1u);
  EXPECT_EQ(cm(0, 1), 1u);
  EXPECT_EQ(cm(1, 1), 1u);
  EXPECT_EQ(cm(1, 0), 0u);
  EXPECT_EQ(cm.total(), 3u);
}

TEST(Confusion, PerfectIsDiagonal) {
  std::vector<int> y{0, 1, 2, 3, 4, 5, 6, 7, 7, 3};
  const auto cm = confusion(y, y);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      if (i != j) {
        EXPECT_EQ(cm(i, j), 0u);
      }
    }
  }
  EXPECT_EQ(cm(7, 7), 2u);
  const auto r = prf_accuracy(cm);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.macro_f1, 1.0);
  EXPECT_EQ(r.macro_precision, 1.0);
  EXPECT_EQ(r.macro_recall, 1.0);
}

TEST(Confusion, RejectsBadInput) {
  std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(confusion(a, b), InvalidArgument);
  std::vector<int> c{0, 8};
  EXPECT_THROW(confusion(a, c), InvalidArgument);
}

TEST(Prf, ThreeOneOne) {
  // Class 0: TP 3, FP 1, FN 1.
  std::vector<int> t{0, 0, 0, 0, 1}, p{0, 0, 0, 1, 0};
  const auto r = prf_accuracy(confusion(t, p));
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 0.75);
  EXPECT_DOUBLE_EQ(r.per_class[0].recall, 0.75);
  EXPECT_DOUBLE_EQ(r.per_class[0].f1, 0.75);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.6);
}

TEST(Prf, MatchesBruteForceCounter) {
  std::mt19937_64 gen(11);
  std::vector<int> t(200), p(200);
  for (auto& v : t) v = static_cast<int>(gen() % 8);
  for (auto& v : p) v = static_cast<int>(gen() % 8);
  const auto r = prf_accuracy(confusion(t, p));
  double f1_sum = 0, correct = 0;
  for (int c = 0; c < 8; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      tp += t[i] == c && p[i] == c;
      fp += t[i] != c && p[i] == c;
      fn += t[i] == c && p[i] != c;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    EXPECT_DOUBLE_EQ(r.per_class[c].precision, prec);
    EXPECT_DOUBLE_EQ(r.per_class[c].recall, rec);
    EXPECT_DOUBLE_EQ(r.per_class[c].f1, f1);
    f1_sum += f1;
    correct += tp;
  }
  EXPECT_DOUBLE_EQ(r.macro_f1, f1_sum / 8.0);
  EXPECT_DOUBLE_EQ(r.accuracy, correct / 200.0);
}

TEST(Prf, AbsentClassScoresZero) {
  std::vector<int> t{0, 0}, p{0, 0};
  const auto r = prf_accuracy(confusion(t, p));
  EXPECT_EQ(r.per_class[3].f1, 0.0);
  EXPECT_DOUBLE_EQ(r.macro_f1, 1.0 / 8.0);
}

TEST(Auc, SeparatingAndReversed) {
  std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  std::vector<int> y{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(roc_auc(s, y), 1.0);
  std::vector<int> rev{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(roc_auc(s, rev), 0.0);
}

TEST(Auc, AllTiedIsHalf) {
  std::vector<double> s(6, 0.5);
  std::vector<int> y{1, 0, 1, 0, 0, 1};
  EXPECT_DOUBLE_EQ(roc_auc(s, y), 0.5);
}

TEST(Auc, MatchesPairCounting) {
  std::mt19937_64 gen(3);
  std::vector<double> s(1000);
  std::vector<int> y(1000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = static_cast<double>(gen() % 50) / 50.0;  // plenty of ties
    y[i] = gen() % 3 == 0 ? 1 : 0;
  }
  EXPECT_NEAR(roc_auc(s, y), brute_auc(s, y), 1e-9);
}

TEST(Auc, NeedsBothLabels) {
  std::vector<double> s{0.1, 0.2};
  std::vector<int> y{1, 1};
  EXPECT_THROW(roc_auc(s, y), UndefinedMetric);
}

TEST(Ap, PerfectAndWorst) {
  std::vector<double> s{0.9, 0.7, 0.5, 0.3, 0.1};
  std::vector<int> perfect{1, 1, 0, 0, 0};
  EXPECT_DOUBLE_EQ(average_precision(s, perfect), 1.0);
  std::vector<int> last{0, 0, 0, 0, 1};
  EXPECT_DOUBLE_EQ(average_precision(s, last), 0.2);
}

TEST(Ap, RandomMulticlassMatchesOracle) {
  std::mt19937_64 gen(21);
  const std::size_t n = 300;
  nn::Tensor<float> proba({n, 8});
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 8);
    float sum = 0;
    for (std::size_t c = 0; c < 8; ++c) sum += proba[i * 8 + c] = static_cast<float>(gen() % 1000 + 1);
    for (std::size_t c = 0; c < 8; ++c) proba[i * 8 + c] /= sum;
  }
  const auto r = mean_auc_ap(proba, y);
  double ap_sum = 0, auc_sum = 0;
  for (std::size_t c = 0; c < 8; ++c) {
    std::vector<double> s(n);
    std::vector<int> bin(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = proba[i * 8 + c];
      bin[i] = y[i] == static_cast<int>(c);
    }
    EXPECT_NEAR(r.ap[c], brute_ap(s, bin), 1e-9) << c;
    EXPECT_NEAR(r.auc[c], brute_auc(s, bin), 1e-9) << c;
    ap_sum += r.ap[c];
    auc_sum += r.auc[c];
  }
  EXPECT_NEAR(r.mean_ap, ap_sum / 8.0, 1e-12);
  EXPECT_NEAR(r.mean_auc, auc_sum / 8.0, 1e-12);
}

TEST(Curves, RocStartsAtOriginAndEndsAtOne) {
  std::vector<double> s{0.9, 0.4, 0.4, 0.2};
  std::vector<int> y{1, 0, 1, 0};
  const auto roc = roc_curve(s, y);
  ASSERT_EQ(roc.size(), 4u);  // origin + 3 distinct scores
  EXPECT_EQ(roc.front().x, 0.0);
  EXPECT_EQ(roc.front().y, 0.0);
  EXPECT_EQ(roc.back().x, 1.0);
  EXPECT_EQ(roc.back().y, 1.0);
  const auto pr = pr_curve(s, y);
  ASSERT_EQ(pr.size(), 3u);
  EXPECT_DOUBLE_EQ(pr[1].x, 1.0);       // both positives in at 0.4
  EXPECT_DOUBLE_EQ(pr[1].y, 2.0 / 3.0);
}

TEST(Report, FilesAndDeterministicJson) {
  nn::Tensor<float> proba({8, 8});
  std::vector<int> y(8);
  for (std::size_t i = 0; i < 8; ++i) {
    y[i] = static_cast<int>(i);
    for (std::size_t c = 0; c < 8; ++c) proba[i * 8 + c] = c == (i + (i == 7)) % 8 ? 0.65f : 0.05f;
  }
  const auto r = evaluate_predictions(proba, y);
  EXPECT_EQ(r.samples, 8u);
  EXPECT_DOUBLE_EQ(r.prf.accuracy, 7.0 / 8.0);
  EXPECT_EQ(metrics_json(r), metrics_json(evaluate_predictions(proba, y)));
  const auto j = nlohmann::json::parse(metrics_json(r));
  EXPECT_DOUBLE_EQ(j.at("accuracy").get<double>(), 7.0 / 8.0);

  testing::TempDir dir("report");
  write_report(r, proba, y, dir.path());
  for (auto f : {"metrics.json", "confusion.csv", "roc_points.csv", "pr_points.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
}

}  // namespace
}  // namespace wafer
