#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wafer/core_data.hpp"
#include "wafer/tensor.hpp"

namespace wafer {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t total() const noexcept;
  std::size_t operator()(std::size_t t, std::size_t p) const { return counts[t][p]; }
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);

struct ClassScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// One-vs-rest precision/recall/F1 per class (0/0 counts as 0), accuracy
/// and unweighted class means.
struct PrfReport {
  std::array<ClassScores, kNumClasses> per_class{};
  double accuracy = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
};

PrfReport prf_accuracy(const ConfusionMatrix& cm);

/// Area under the ROC curve of a binary problem. Equal scores form a single
/// threshold step, which matches pair counting with ties weighted 1/2.
/// Throws UndefinedMetric unless both labels occur.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Step-sum average precision: sum_n (R_n - R_{n-1}) P_n over the
/// descending-score sweep, one step per distinct score.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct CurvePoint {
  double threshold;
  double x;  // FPR for ROC, recall for PR
  double y;  // TPR for ROC, precision for PR
};

/// Threshold sweep points, one per distinct score, highest first. The ROC
/// curve starts at (0,0).
std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const int> labels);

struct AucAp {
  std::array<double, kNumClasses> auc{};
  std::array<double, kNumClasses> ap{};
  double mean_auc = 0;
  double mean_ap = 0;
};

/// One-vs-rest AUC and AP per class with proba column c as the score.
/// Every class must occur in y_true.
AucAp mean_auc_ap(const nn::Tensor<float>& proba, std::span<const int> y_true);

struct MetricsReport {
  ConfusionMatrix cm;
  PrfReport prf;
  AucAp ranking;
  std::size_t samples = 0;
};

MetricsReport evaluate_predictions(const nn::Tensor<float>& proba, std::span<const int> y_true);

/// Deterministic JSON rendering: fixed key order, shortest round-trip numbers.
std::string metrics_json(const MetricsReport& r);

/// Writes metrics.json, confusion.csv, roc_points.csv and pr_points.csv.
void write_report(const MetricsReport& r, const nn::Tensor<float>& proba,
                  std::span<const int> y_true, const std::filesystem::path& dir);

}  // namespace wafer
