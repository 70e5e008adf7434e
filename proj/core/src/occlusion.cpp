#include "wafer/occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "wafer/error.hpp"
#include "wafer/metrics.hpp"

namespace wafer {

namespace {

double macro_f1(const nn::Tensor<float>& proba, std::span<const int> labels) {
  return prf_accuracy(confusion(labels, argmax_rows(proba))).macro_f1;
}

}  // namespace

void OcclusionConfig::validate() const {
  if (window < 1 || window > kGrid) {
    throw ConfigError("occlusion window must lie in 1..26, got " + std::to_string(window));
  }
  if (stride < 1) throw ConfigError("occlusion stride must be at least 1");
}

std::vector<std::size_t> occlusion_anchors(const OcclusionConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> a;
  for (std::size_t r = 0; r + cfg.window <= kGrid; r += cfg.stride) a.push_back(r);
  return a;
}

Heatmap occlusion_heatmap(const ProbaFn& model, std::span<const EncodedTensor> inputs,
                          std::span<const int> labels, const OcclusionConfig& cfg) {
  if (inputs.empty()) throw DataError("occlusion needs a non-empty test set");
  if (inputs.size() != labels.size()) throw InvalidArgument("occlusion: one label per input");
  Heatmap h;
  h.config = cfg;
  h.anchors = occlusion_anchors(cfg);
  h.baseline_f1 = macro_f1(model(inputs), labels);
  h.delta.assign(h.anchors.size() * h.anchors.size(), 0.0);

  std::vector<EncodedTensor> work(inputs.begin(), inputs.end());
  for (std::size_t i = 0; i < h.anchors.size(); ++i) {
    for (std::size_t j = 0; j < h.anchors.size(); ++j) {
      const std::size_t r0 = h.anchors[i];
      const std::size_t c0 = h.anchors[j];
      for (std::size_t s = 0; s < work.size(); ++s) {
        for (std::size_t r = r0; r < r0 + cfg.window; ++r) {
          for (std::size_t c = c0; c < c0 + cfg.window; ++c) {
            for (std::size_t ch = 0; ch < kChannels; ++ch) {
              work[s].at(r, c, ch) = cfg.identity ? inputs[s].at(r, c, ch) : cfg.fill[ch];
            }
          }
        }
      }
      h.delta[i * h.anchors.size() + j] = h.baseline_f1 - macro_f1(model(work), labels);
      // Restore the window before moving on.
      for (std::size_t s = 0; s < work.size(); ++s) {
        for (std::size_t r = r0; r < r0 + cfg.window; ++r) {
          for (std::size_t c = c0; c < c0 + cfg.window; ++c) {
            for (std::size_t ch = 0; ch < kChannels; ++ch) work[s].at(r, c, ch) = inputs[s].at(r, c, ch);
          }
        }
      }
    }
  }
  return h;
}

Heatmap occlusion_heatmap(CnnModel& model, const LabeledDataset& test, const OcclusionConfig& cfg) {
  const auto inputs = tensors_of(test);
  const auto labels = labels_of(test);
  return occlusion_heatmap([&](std::span<const EncodedTensor> xs) { return model.predict_proba(xs); },
                           inputs, labels, cfg);
}

CenterCorner center_corner_means(const Heatmap& h) {
  const std::size_t n = h.side();
  if (n == 0) throw InvalidArgument("empty heatmap");
  CenterCorner out;
  out.corner = (h.at(0, 0) + h.at(0, n - 1) + h.at(n - 1, 0) + h.at(n - 1, n - 1)) / 4.0;
  if (n % 2 == 1) {
    out.center = h.at(n / 2, n / 2);
  } else {
    const std::size_t a = n / 2 - 1;
    const std::size_t b = n / 2;
    out.center = (h.at(a, a) + h.at(a, b) + h.at(b, a) + h.at(b, b)) / 4.0;
  }
  return out;
}

void write_heatmap(const Heatmap& h, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t n = h.side();
  {
    std::ofstream f(dir / "heatmap.csv");
    if (!f) throw IoError("cannot write " + (dir / "heatmap.csv").string());
    f.precision(17);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) f << (j ? "," : "") << h.at(i, j);
      f << '\n';
    }
  }
  {
    nlohmann::ordered_json j;
    j["baseline_macro_f1"] = h.baseline_f1;
    j["window"] = h.config.window;
    j["stride"] = h.config.stride;
    j["fill"] = h.config.fill;
    j["identity"] = h.config.identity;
    j["anchors"] = h.anchors;
    std::ofstream f(dir / "heatmap.json");
    if (!f) throw IoError("cannot write " + (dir / "heatmap.json").string());
    f << j.dump(2) << '\n';
  }
  {
    // Positive drops map to grey levels relative to the largest magnitude.
    double peak = 0.0;
    for (double d : h.delta) peak = std::max(peak, std::abs(d));
    std::ofstream f(dir / "heatmap.pgm");
    if (!f) throw IoError("cannot write " + (dir / "heatmap.pgm").string());
    f << "P2\n" << n << ' ' << n << "\n255\n";
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double v = peak > 0.0 ? std::max(0.0, h.at(i, j)) / peak : 0.0;
        f << (j ? " " : "") << static_cast<int>(std::lround(255.0 * v));
      }
      f << '\n';
    }
  }
}

}  // namespace wafer
