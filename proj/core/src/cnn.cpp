#include "wafer/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "wafer/error.hpp"
#include "wafer/random.hpp"

namespace wafer {

namespace {

constexpr std::size_t kInferenceChunk = 256;

bool has_layer(CnnVariant v, std::string_view layer) {
  if (layer == "conv3") return v != CnnVariant::no_conv3;
  if (layer == "dense1") return v != CnnVariant::no_dense1;
  return true;
}

std::string widths_string(const CnnWidths& w) {
  std::ostringstream os;
  os << w.conv1 << ' ' << w.conv2 << ' ' << w.conv3 << ' ' << w.dense1 << ' ' << w.dense2;
  return os.str();
}

}  // namespace

std::string_view variant_name(CnnVariant v) noexcept {
  switch (v) {
    case CnnVariant::full: return "full";
    case CnnVariant::no_conv3: return "no_conv3";
    case CnnVariant::no_dense1: return "no_dense1";
  }
  return "full";
}

CnnVariant variant_from_name(std::string_view name) {
  for (auto v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown CNN variant '" + std::string(name) +
                    "' (expected full, no_conv3 or no_dense1)");
}

std::vector<nn::LayerSpec> cnn_specs(CnnVariant variant, const CnnWidths& w) {
  using nn::LayerSpec;
  std::vector<LayerSpec> s;
  s.push_back(LayerSpec::conv("conv1", 3, kChannels, w.conv1));
  s.push_back(LayerSpec::relu("relu1"));
  s.push_back(LayerSpec::conv("conv2", 3, w.conv1, w.conv2));
  s.push_back(LayerSpec::relu("relu2"));
  std::size_t channels = w.conv2;
  if (has_layer(variant, "conv3")) {
    s.push_back(LayerSpec::conv("conv3", 3, w.conv2, w.conv3));
    s.push_back(LayerSpec::relu("relu3"));
    channels = w.conv3;
  }
  s.push_back(LayerSpec::flatten("flatten"));
  std::size_t width = kGrid * kGrid * channels;
  if (has_layer(variant, "dense1")) {
    s.push_back(LayerSpec::dense("dense1", width, w.dense1));
    s.push_back(LayerSpec::relu("relu_dense1"));
    width = w.dense1;
  }
  s.push_back(LayerSpec::dense("dense2", width, w.dense2));
  s.push_back(LayerSpec::relu("relu_dense2"));
  s.push_back(LayerSpec::dense("out", w.dense2, kNumClasses));
  return s;
}

CnnModel::CnnModel(CnnVariant variant, CnnWidths widths)
    : variant_(variant), widths_(widths), net_(cnn_specs(variant, widths)) {}

std::size_t CnnModel::flatten_size() const noexcept {
  return kGrid * kGrid * (variant_ == CnnVariant::no_conv3 ? widths_.conv2 : widths_.conv3);
}

std::vector<LayerParamCount> CnnModel::parameter_counts() const {
  std::vector<LayerParamCount> out;
  for (const auto* p : net_.parameters()) {
    const auto layer = p->name.substr(0, p->name.find('.'));
    if (out.empty() || out.back().layer != layer) out.push_back({layer, 0});
    out.back().count += p->value.size();
  }
  return out;
}

std::size_t CnnModel::total_parameters() const {
  std::size_t n = 0;
  for (const auto& c : parameter_counts()) n += c.count;
  return n;
}

std::vector<float> CnnModel::forward(const EncodedTensor& x) {
  const auto p = predict_proba(std::span(&x, 1));
  return {p.values().begin(), p.values().end()};
}

nn::Tensor<float> CnnModel::predict_proba(std::span<const EncodedTensor> xs) {
  nn::Tensor<float> out({xs.size(), kNumClasses});
  for (std::size_t start = 0; start < xs.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(xs.size(), start + kInferenceChunk);
    nn::Tensor<float> x({end - start, kGrid, kGrid, kChannels});
    for (std::size_t i = start; i < end; ++i) {
      if (xs[i].data.size() != kEncodedSize) throw ShapeError("CNN input must be 26 x 26 x 3");
      std::ranges::copy(xs[i].data, x.data() + (i - start) * kEncodedSize);
    }
    const auto probs = nn::softmax(net_.forward(x, false));
    std::ranges::copy(probs.values(), out.data() + start * kNumClasses);
  }
  return out;
}

std::vector<int> CnnModel::predict(std::span<const EncodedTensor> xs) {
  return argmax_rows(predict_proba(xs));
}

nn::Checkpoint CnnModel::to_checkpoint() const {
  nn::Checkpoint c = nn::capture(net_);
  c.meta.emplace_back("model", "cnn");
  c.meta.emplace_back("variant", std::string(variant_name(variant_)));
  c.meta.emplace_back("widths", widths_string(widths_));
  return c;
}

CnnModel CnnModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  const auto* kind = ckpt.find_meta("model");
  const auto* variant = ckpt.find_meta("variant");
  const auto* widths = ckpt.find_meta("widths");
  if (kind == nullptr || *kind != "cnn" || variant == nullptr || widths == nullptr) {
    throw DataError("checkpoint does not hold a CNN classifier");
  }
  CnnWidths w;
  std::istringstream is(*widths);
  if (!(is >> w.conv1 >> w.conv2 >> w.conv3 >> w.dense1 >> w.dense2)) {
    throw DataError("checkpoint has malformed CNN widths '" + *widths + "'");
  }
  CnnModel m(variant_from_name(*variant), w);
  nn::restore(m.net_, ckpt);
  return m;
}

CnnModel build_cnn(CnnVariant variant, const CnnWidths& widths, std::uint64_t seed) {
  CnnModel m(variant, widths);
  m.net().init_glorot_uniform(seed);
  return m;
}

std::vector<EncodedTensor> tensors_of(const LabeledDataset& ds) {
  std::vector<EncodedTensor> out;
  out.reserve(ds.size());
  for (const auto& s : ds.items()) out.push_back(to_tensor(s));
  return out;
}

std::vector<int> labels_of(const LabeledDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& s : ds.items()) out.push_back(label_of(s.label));
  return out;
}

std::vector<int> argmax_rows(const nn::Tensor<float>& proba) {
  const std::size_t k = proba.dim(1);
  std::vector<int> out(proba.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = proba.values().subspan(i * k, k);
    out[i] = static_cast<int>(std::distance(row.begin(), std::ranges::max_element(row)));
  }
  return out;
}

TrainReport train_cnn(CnnModel& model, const LabeledDataset& train, const CnnTrainOptions& opts,
                      const CnnEpochCallback& on_epoch) {
  TrainReport report;
  if (opts.epochs == 0) return report;
  if (opts.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(opts.val_fraction >= 0.0 && opts.val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in [0,1)");
  }
  const auto counts = train.class_counts();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 0) {
      throw DataError("CNN training set has no items of class " +
                      std::string(class_name(static_cast<DefectClass>(c))));
    }
  }

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  {
    Rng rng(derive_seed(opts.seed, {0xC0FFEEULL}));
    std::shuffle(order.begin(), order.end(), rng);
  }
  const auto n_val = static_cast<std::size_t>(
      std::floor(opts.val_fraction * static_cast<double>(order.size())));
  const std::size_t n_fit = order.size() - n_val;
  if (n_fit == 0) throw DataError("validation split leaves no training items");

  std::vector<EncodedTensor> fit_x;
  std::vector<int> fit_y;
  std::vector<EncodedTensor> val_x;
  std::vector<int> val_y;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& s = train[order[i]];
    (i < n_fit ? fit_x : val_x).push_back(to_tensor(s));
    (i < n_fit ? fit_y : val_y).push_back(label_of(s.label));
  }

  nn::Adam<float> adam(opts.adam);
  auto& net = model.net();
  auto params = net.parameters();
  std::vector<std::size_t> idx(n_fit);
  std::vector<int> batch_y;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(derive_seed(opts.seed, {0xE90CULL, epoch}));
    std::shuffle(idx.begin(), idx.end(), rng);

    EpochStats st;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    try {
      for (std::size_t start = 0; start < n_fit; start += opts.batch_size) {
        const std::size_t end = std::min(n_fit, start + opts.batch_size);
        nn::Tensor<float> x({end - start, kGrid, kGrid, kChannels});
        batch_y.clear();
        for (std::size_t i = start; i < end; ++i) {
          std::ranges::copy(fit_x[idx[i]].data, x.data() + (i - start) * kEncodedSize);
          batch_y.push_back(fit_y[idx[i]]);
        }
        net.zero_grad();
        const auto logits = net.forward(x);
        const auto lg = nn::softmax_cross_entropy(logits, batch_y);
        if (!std::isfinite(lg.loss)) throw NumericError("cross-entropy loss is not finite");
        net.backward(lg.grad, false);
        adam.step(params);

        loss_sum += static_cast<double>(lg.loss) * static_cast<double>(end - start);
        const auto pred = argmax_rows(lg.probs);
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch_y[i];
      }
    } catch (const NumericError& e) {
      throw NumericError("CNN training, epoch " + std::to_string(epoch + 1) + ": " + e.what());
    }
    st.train_loss = loss_sum / static_cast<double>(n_fit);
    st.train_acc = static_cast<double>(correct) / static_cast<double>(n_fit);

    if (n_val > 0) {
      const auto probs = model.predict_proba(val_x);
      nn::Tensor<float> onehot({n_val, kNumClasses});
      for (std::size_t i = 0; i < n_val; ++i) onehot[i * kNumClasses + val_y[i]] = 1.0f;
      st.val_loss = nn::cross_entropy(probs, onehot);
      const auto pred = argmax_rows(probs);
      std::size_t vc = 0;
      for (std::size_t i = 0; i < n_val; ++i) vc += pred[i] == val_y[i];
      st.val_acc = static_cast<double>(vc) / static_cast<double>(n_val);
    }
    report.epochs.push_back(st);
    if (on_epoch) on_epoch(epoch + 1, st);
  }
  return report;
}

}  // namespace wafer
