#include "wafer_app/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "wafer/error.hpp"

namespace wafer::app {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Walks one JSON object, rejecting keys that were never asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + name(key) + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
          throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + name(key) + "' has the wrong type (" + v.dump() + ")");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : "config key '" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

CnnWidths widths_from(const json& v, const std::string& key) {
  if (v.is_string()) {
    if (v == "desk") return CnnWidths::desk();
    if (v == "paper") return CnnWidths::paper();
  } else if (v.is_array() && v.size() == 5) {
    std::array<std::size_t, 5> w{};
    for (std::size_t i = 0; i < 5; ++i) {
      if (!v[i].is_number_integer() || v[i].get<long long>() <= 0) break;
      w[i] = v[i].get<std::size_t>();
      if (i == 4) return CnnWidths{w[0], w[1], w[2], w[3], w[4]};
    }
  }
  throw ConfigError("config key '" + key +
                    "' must be \"desk\", \"paper\" or five positive integers");
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError("config key '" + key + "' " + what);
  };
  if (out.empty()) fail("paths.out", "must not be empty");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("split.train_fraction", "must lie in (0,1)");
  if (ae_batch == 0) fail("autoencoder.batch_size", "must be positive");
  if (!(ae_lr > 0.0)) fail("autoencoder.lr", "must be > 0");
  if (augment_target == 0) fail("augment.target_per_class", "must be positive");
  if (!(augment_sigma > 0.0)) fail("augment.sigma", "must be > 0");
  if (cnn_batch == 0) fail("cnn.batch_size", "must be positive");
  if (!(cnn_lr > 0.0)) fail("cnn.lr", "must be > 0");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) fail("cnn.val_fraction", "must lie in [0,1)");
  if (baselines.logreg.iterations == 0) fail("baselines.logreg.iterations", "must be positive");
  if (!(baselines.logreg.l2 >= 0.0)) fail("baselines.logreg.l2", "must be >= 0");
  if (!(baselines.svm.c > 0.0)) fail("baselines.svm.c", "must be > 0");
  if (baselines.svm.epochs == 0) fail("baselines.svm.epochs", "must be positive");
  synth.validate();
  baselines.forest.validate();
  occlusion.validate();
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["paths"] = {{"input", c.input.generic_string()}, {"out", c.out.generic_string()}};
  j["synth"] = {{"counts", c.synth_counts}, {"salt_noise_prob", c.synth.salt_noise_prob}};
  j["split"] = {{"train_fraction", c.train_fraction}};
  j["autoencoder"] = {{"epochs", c.ae_epochs}, {"batch_size", c.ae_batch}, {"lr", c.ae_lr}};
  j["augment"] = {{"target_per_class", c.augment_target}, {"sigma", c.augment_sigma}};
  const auto& w = c.widths;
  j["cnn"] = {{"variant", variant_name(c.variant)},
              {"widths", {w.conv1, w.conv2, w.conv3, w.dense1, w.dense2}},
              {"epochs", c.cnn_epochs},
              {"batch_size", c.cnn_batch},
              {"lr", c.cnn_lr},
              {"val_fraction", c.val_fraction}};
  const auto& b = c.baselines;
  ordered_json forest = {{"n_trees", b.forest.n_trees},
                         {"max_depth", nullptr},
                         {"min_samples_split", b.forest.min_samples_split},
                         {"features_per_split", b.forest.features_per_split},
                         {"bootstrap", b.forest.bootstrap}};
  if (b.forest.max_depth) forest["max_depth"] = *b.forest.max_depth;
  j["baselines"] = {
      {"enabled", c.run_baselines},
      {"logreg", {{"l2", b.logreg.l2}, {"iterations", b.logreg.iterations}, {"lr", b.logreg.adam.lr}}},
      {"svm", {{"c", b.svm.c}, {"epochs", b.svm.epochs}, {"eta0", b.svm.eta0}}},
      {"forest", forest}};
  j["occlusion"] = {{"enabled", c.run_occlusion},
                    {"window", c.occlusion.window},
                    {"stride", c.occlusion.stride},
                    {"fill", c.occlusion.fill}};
  return j;
}

RunConfig from_json(const json& j, RunConfig c) {
  Section root(j, "");
  root.get("seed", c.seed);
  if (root.has("paths")) {
    Section s(root.raw("paths"), "paths");
    std::string in = c.input.generic_string();
    std::string out = c.out.generic_string();
    s.get("input", in);
    s.get("out", out);
    c.input = in;
    c.out = out;
  }
  if (root.has("synth")) {
    Section s(root.raw("synth"), "synth");
    if (s.has("counts")) {
      const auto& v = s.raw("counts");
      if (!v.is_array() || v.size() != kNumClasses) {
        throw ConfigError("config key 'synth.counts' must list 8 class counts");
      }
      for (std::size_t k = 0; k < kNumClasses; ++k) {
        if (!v[k].is_number_integer() || v[k].get<long long>() < 0) {
          throw ConfigError("config key 'synth.counts' must hold non-negative integers");
        }
        c.synth_counts[k] = v[k].get<std::size_t>();
      }
    }
    s.get("salt_noise_prob", c.synth.salt_noise_prob);
  }
  if (root.has("split")) {
    Section s(root.raw("split"), "split");
    s.get("train_fraction", c.train_fraction);
  }
  if (root.has("autoencoder")) {
    Section s(root.raw("autoencoder"), "autoencoder");
    s.get("epochs", c.ae_epochs);
    s.get("batch_size", c.ae_batch);
    s.get("lr", c.ae_lr);
  }
  if (root.has("augment")) {
    Section s(root.raw("augment"), "augment");
    s.get("target_per_class", c.augment_target);
    s.get("sigma", c.augment_sigma);
  }
  if (root.has("cnn")) {
    Section s(root.raw("cnn"), "cnn");
    std::string variant(variant_name(c.variant));
    s.get("variant", variant);
    c.variant = variant_from_name(variant);
    if (s.has("widths")) c.widths = widths_from(s.raw("widths"), "cnn.widths");
    s.get("epochs", c.cnn_epochs);
    s.get("batch_size", c.cnn_batch);
    s.get("lr", c.cnn_lr);
    s.get("val_fraction", c.val_fraction);
  }
  if (root.has("baselines")) {
    Section s(root.raw("baselines"), "baselines");
    s.get("enabled", c.run_baselines);
    if (s.has("logreg")) {
      Section l(s.raw("logreg"), "baselines.logreg");
      l.get("l2", c.baselines.logreg.l2);
      l.get("iterations", c.baselines.logreg.iterations);
      l.get("lr", c.baselines.logreg.adam.lr);
    }
    if (s.has("svm")) {
      Section v(s.raw("svm"), "baselines.svm");
      v.get("c", c.baselines.svm.c);
      v.get("epochs", c.baselines.svm.epochs);
      v.get("eta0", c.baselines.svm.eta0);
    }
    if (s.has("forest")) {
      Section f(s.raw("forest"), "baselines.forest");
      auto& fc = c.baselines.forest;
      f.get("n_trees", fc.n_trees);
      if (f.has("max_depth")) {
        const auto& v = f.raw("max_depth");
        if (v.is_null()) {
          fc.max_depth.reset();
        } else if (v.is_number_integer() && v.get<long long>() > 0) {
          fc.max_depth = v.get<std::size_t>();
        } else {
          throw ConfigError("config key 'baselines.forest.max_depth' must be null or a positive integer");
        }
      }
      f.get("min_samples_split", fc.min_samples_split);
      f.get("features_per_split", fc.features_per_split);
      f.get("bootstrap", fc.bootstrap);
    }
  }
  if (root.has("occlusion")) {
    Section s(root.raw("occlusion"), "occlusion");
    s.get("enabled", c.run_occlusion);
    s.get("window", c.occlusion.window);
    s.get("stride", c.occlusion.stride);
    if (s.has("fill")) {
      const auto& v = s.raw("fill");
      if (!v.is_array() || v.size() != kChannels ||
          !std::ranges::all_of(v, [](const json& e) { return e.is_number(); })) {
        throw ConfigError("config key 'occlusion.fill' must list 3 numbers");
      }
      for (std::size_t k = 0; k < kChannels; ++k) c.occlusion.fill[k] = v[k].get<float>();
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const Error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunConfig apply_overrides(const RunConfig& c, const std::vector<std::string>& sets) {
  if (sets.empty()) return c;
  json j = json::parse(to_json(c).dump());
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + s + "' must look like key.path=value");
    }
    const std::string key = s.substr(0, eq);
    const std::string text = s.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json::json_pointer ptr;
    std::stringstream parts(key);
    for (std::string part; std::getline(parts, part, '.');) ptr /= part;
    if (!j.contains(ptr)) throw ConfigError("unknown config key '" + key + "'");
    j[ptr] = value;
  }
  return from_json(j);
}

std::string canonical(const RunConfig& c) { return to_json(c).dump(); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace wafer::app
