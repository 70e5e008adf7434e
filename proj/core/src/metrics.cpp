#include "wafer/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "wafer/error.hpp"

namespace wafer {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

void check_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw InvalidArgument("scores and labels differ in length (" + std::to_string(scores.size()) +
                          " vs " + std::to_string(labels.size()) + ")");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw InvalidArgument("binary labels must be 0 or 1");
  }
}

// Cumulative (tp, fp) after each distinct score, highest score first.
struct Step {
  double threshold;
  double tp;
  double fp;
};

std::vector<Step> sweep(std::span<const double> scores, std::span<const int> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<Step> steps;
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double s = scores[order[i]];
    (labels[order[i]] == 1 ? tp : fp) += 1.0;
    if (i + 1 == order.size() || scores[order[i + 1]] != s) steps.push_back({s, tp, fp});
  }
  return steps;
}

std::vector<double> column(const nn::Tensor<float>& proba, std::size_t c) {
  const std::size_t n = proba.dim(0);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = proba[i * kNumClasses + c];
  return out;
}

std::vector<int> one_vs_rest(std::span<const int> y, std::size_t c) {
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] == static_cast<int>(c) ? 1 : 0;
  return out;
}

void check_proba(const nn::Tensor<float>& proba, std::size_t n) {
  if (proba.rank() != 2 || proba.dim(1) != kNumClasses || proba.dim(0) != n) {
    throw ShapeError("probabilities must be " + std::to_string(n) + " x 8, got " +
                     nn::shape_string(proba.shape()));
  }
}

}  // namespace

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw InvalidArgument("confusion: " + std::to_string(y_true.size()) + " labels but " +
                          std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || t >= static_cast<int>(kNumClasses) || p < 0 || p >= static_cast<int>(kNumClasses)) {
      throw InvalidArgument("confusion: label out of range 0..7 at index " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

PrfReport prf_accuracy(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw InvalidArgument("prf_accuracy: empty confusion matrix");
  PrfReport r;
  std::size_t trace = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t row = 0;
    std::size_t col = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      row += cm.counts[c][k];
      col += cm.counts[k][c];
    }
    const auto tp = static_cast<double>(cm.counts[c][c]);
    const double fp = static_cast<double>(col) - tp;
    const double fn = static_cast<double>(row) - tp;
    auto& s = r.per_class[c];
    s.precision = ratio(tp, tp + fp);
    s.recall = ratio(tp, tp + fn);
    s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
    trace += cm.counts[c][c];
    r.macro_precision += s.precision / kNumClasses;
    r.macro_recall += s.recall / kNumClasses;
    r.macro_f1 += s.f1 / kNumClasses;
  }
  r.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  return r;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels);
  const auto pos = static_cast<double>(std::ranges::count(labels, 1));
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) {
    throw UndefinedMetric("ROC AUC needs both positive and negative samples");
  }
  double area = 0.0;
  double tp0 = 0.0;
  double fp0 = 0.0;
  for (const auto& s : sweep(scores, labels)) {
    area += (s.fp - fp0) * (s.tp + tp0) / 2.0;
    tp0 = s.tp;
    fp0 = s.fp;
  }
  return area / (pos * neg);
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels);
  const auto pos = static_cast<double>(std::ranges::count(labels, 1));
  if (pos == 0.0) throw UndefinedMetric("average precision needs at least one positive sample");
  double ap = 0.0;
  double r0 = 0.0;
  for (const auto& s : sweep(scores, labels)) {
    const double r = s.tp / pos;
    ap += (r - r0) * s.tp / (s.tp + s.fp);
    r0 = r;
  }
  return ap;
}

std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels);
  const auto pos = static_cast<double>(std::ranges::count(labels, 1));
  const double neg = static_cast<double>(labels.size()) - pos;
  std::vector<CurvePoint> pts;
  const auto steps = sweep(scores, labels);
  const double top = steps.empty() ? 1.0 : std::max(1.0, steps.front().threshold + 1.0);
  pts.push_back({top, 0.0, 0.0});
  for (const auto& s : steps) pts.push_back({s.threshold, ratio(s.fp, neg), ratio(s.tp, pos)});
  return pts;
}

std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels);
  const auto pos = static_cast<double>(std::ranges::count(labels, 1));
  std::vector<CurvePoint> pts;
  for (const auto& s : sweep(scores, labels)) {
    pts.push_back({s.threshold, ratio(s.tp, pos), ratio(s.tp, s.tp + s.fp)});
  }
  return pts;
}

AucAp mean_auc_ap(const nn::Tensor<float>& proba, std::span<const int> y_true) {
  check_proba(proba, y_true.size());
  std::array<std::size_t, kNumClasses> seen{};
  for (int y : y_true) {
    if (y < 0 || y >= static_cast<int>(kNumClasses)) throw InvalidArgument("label out of range 0..7");
    ++seen[static_cast<std::size_t>(y)];
  }
  std::string missing;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (seen[c] == 0) {
      if (!missing.empty()) missing += ", ";
      missing += class_name(static_cast<DefectClass>(c));
    }
  }
  if (!missing.empty()) throw UndefinedMetric("classes absent from y_true: " + missing);

  AucAp out;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto s = column(proba, c);
    const auto l = one_vs_rest(y_true, c);
    out.auc[c] = roc_auc(s, l);
    out.ap[c] = average_precision(s, l);
    out.mean_auc += out.auc[c] / kNumClasses;
    out.mean_ap += out.ap[c] / kNumClasses;
  }
  return out;
}

MetricsReport evaluate_predictions(const nn::Tensor<float>& proba, std::span<const int> y_true) {
  check_proba(proba, y_true.size());
  std::vector<int> pred(y_true.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const float* row = proba.data() + i * kNumClasses;
    pred[i] = static_cast<int>(std::max_element(row, row + kNumClasses) - row);
  }
  MetricsReport r;
  r.cm = confusion(y_true, pred);
  r.prf = prf_accuracy(r.cm);
  r.ranking = mean_auc_ap(proba, y_true);
  r.samples = y_true.size();
  return r;
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["accuracy"] = r.prf.accuracy;
  j["macro_precision"] = r.prf.macro_precision;
  j["macro_recall"] = r.prf.macro_recall;
  j["macro_f1"] = r.prf.macro_f1;
  j["mean_auc"] = r.ranking.mean_auc;
  j["mean_ap"] = r.ranking.mean_ap;
  auto& per = j["per_class"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    nlohmann::ordered_json e;
    e["class"] = class_name(static_cast<DefectClass>(c));
    e["precision"] = r.prf.per_class[c].precision;
    e["recall"] = r.prf.per_class[c].recall;
    e["f1"] = r.prf.per_class[c].f1;
    e["auc"] = r.ranking.auc[c];
    e["ap"] = r.ranking.ap[c];
    per.push_back(std::move(e));
  }
  auto& cm = j["confusion"] = nlohmann::ordered_json::array();
  for (const auto& row : r.cm.counts) cm.push_back(row);
  return j.dump(2) + "\n";
}

void write_report(const MetricsReport& r, const nn::Tensor<float>& proba,
                  std::span<const int> y_true, const std::filesystem::path& dir) {
  check_proba(proba, y_true.size());
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw IoError("cannot write " + (dir / name).string());
    f.precision(17);
    return f;
  };
  {
    auto f = open("metrics.json");
    f << metrics_json(r);
  }
  {
    auto f = open("confusion.csv");
    f << "true";
    for (auto c : kAllClasses) f << ',' << class_name(c);
    f << '\n';
    for (std::size_t t = 0; t < kNumClasses; ++t) {
      f << class_name(static_cast<DefectClass>(t));
      for (std::size_t p = 0; p < kNumClasses; ++p) f << ',' << r.cm.counts[t][p];
      f << '\n';
    }
  }
  auto roc = open("roc_points.csv");
  auto pr = open("pr_points.csv");
  roc << "class,threshold,fpr,tpr\n";
  pr << "class,threshold,recall,precision\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto s = column(proba, c);
    const auto l = one_vs_rest(y_true, c);
    const auto name = class_name(static_cast<DefectClass>(c));
    for (const auto& p : roc_curve(s, l)) roc << name << ',' << p.threshold << ',' << p.x << ',' << p.y << '\n';
    for (const auto& p : pr_curve(s, l)) pr << name << ',' << p.threshold << ',' << p.x << ',' << p.y << '\n';
  }
  if (!roc || !pr) throw IoError("failed writing curve files in " + dir.string());
}

}  // namespace wafer
