#include "wafer_app/run.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "wafer/error.hpp"
#include "wafer/random.hpp"
#include "wafer/records.hpp"

namespace wafer::app {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::uint64_t stage_seed(const RunConfig& cfg, SeedTag tag, std::uint64_t sub) {
  return derive_seed(cfg.seed, {static_cast<std::uint64_t>(tag), sub});
}

LabeledDataset source_dataset(const RunConfig& cfg) {
  if (!cfg.input.empty()) return to_dataset(read_records(cfg.input));
  return generate_dataset(cfg.synth_counts, cfg.synth, stage_seed(cfg, SeedTag::synth));
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const RunConfig& cfg,
                                                        const LabeledDataset& all) {
  return stratified_split(all, cfg.train_fraction, stage_seed(cfg, SeedTag::split));
}

AeTrainResult fit_autoencoder(const RunConfig& cfg, const LabeledDataset& train, const Logger& log) {
  AeTrainOptions o;
  o.epochs = cfg.ae_epochs;
  o.batch_size = cfg.ae_batch;
  o.adam.lr = cfg.ae_lr;
  o.seed = stage_seed(cfg, SeedTag::autoencoder);
  return train_autoencoder(train, o, [&](std::size_t epoch, double loss) {
    if (log) log("autoencoder epoch " + std::to_string(epoch) + " mse " + std::to_string(loss));
  });
}

LabeledDataset augment_train(const RunConfig& cfg, Autoencoder& ae, const LabeledDataset& train) {
  AugmentConfig a;
  a.noise_sigma = cfg.augment_sigma;
  a.target_per_class = cfg.augment_target;
  a.seed = stage_seed(cfg, SeedTag::augment);
  return augment_all(ae, train, a);
}

CnnFit fit_cnn(const RunConfig& cfg, const LabeledDataset& train, CnnVariant variant,
               const Logger& log) {
  const auto v = static_cast<std::uint64_t>(variant);
  CnnFit fit{build_cnn(variant, cfg.widths, stage_seed(cfg, SeedTag::cnn_init, v)), {}};
  CnnTrainOptions o;
  o.epochs = cfg.cnn_epochs;
  o.batch_size = cfg.cnn_batch;
  o.val_fraction = cfg.val_fraction;
  o.adam.lr = cfg.cnn_lr;
  o.seed = stage_seed(cfg, SeedTag::cnn_train, v);
  fit.report = train_cnn(fit.model, train, o, [&](std::size_t epoch, const EpochStats& s) {
    if (!log) return;
    std::ostringstream os;
    os << "cnn " << variant_name(variant) << " epoch " << epoch << " loss " << s.train_loss
       << " acc " << s.train_acc << " val_acc " << s.val_acc;
    log(os.str());
  });
  return fit;
}

Evaluation evaluate_proba(nn::Tensor<float> proba, std::vector<int> labels) {
  auto report = evaluate_predictions(proba, labels);
  return {std::move(proba), std::move(labels), report};
}

Evaluation evaluate_cnn(CnnModel& model, const LabeledDataset& test) {
  if (test.empty()) throw DataError("test split is empty");
  return evaluate_proba(model.predict_proba(tensors_of(test)), labels_of(test));
}

BaselineRun fit_baselines(const RunConfig& cfg, const LabeledDataset& train,
                          const LabeledDataset& test, const Logger& log) {
  BaselineRun r;
  if (log) log("extracting features");
  r.train_features = extract_features(train);
  r.test_features = extract_features(test);
  auto bc = cfg.baselines;
  bc.svm.seed = stage_seed(cfg, SeedTag::baselines, 1);
  bc.forest.seed = stage_seed(cfg, SeedTag::baselines, 2);
  if (log) log("fitting logistic regression, linear SVM and random forest");
  r.suite = BaselineSuite::fit(r.train_features, bc);
  auto p = r.suite.predict(r.test_features);
  const auto& y = r.test_features.y;
  r.logreg = evaluate_proba(std::move(p.logreg), y);
  r.svm = evaluate_proba(std::move(p.svm), y);
  r.forest = evaluate_proba(std::move(p.forest), y);
  r.vote = evaluate_proba(std::move(p.vote.proba), y);
  return r;
}

OcclusionRun run_occlusion(const RunConfig& cfg, CnnModel& model, const LabeledDataset& test) {
  OcclusionRun r;
  r.all = occlusion_heatmap(model, test, cfg.occlusion);
  const auto center = test.filter(DefectClass::center);
  if (center.empty()) throw DataError("test split has no Center items for occlusion");
  r.center = occlusion_heatmap(model, center, cfg.occlusion);
  return r;
}

// ---- artifact plumbing ----------------------------------------------------

void check_output_dir(const RunConfig& cfg) {
  if (cfg.input.empty()) return;
  const auto in_dir = fs::weakly_canonical(fs::absolute(cfg.input).parent_path());
  const auto out = fs::weakly_canonical(fs::absolute(cfg.out));
  auto [a, b] = std::mismatch(in_dir.begin(), in_dir.end(), out.begin(), out.end());
  if (a == in_dir.end()) {
    throw ConfigError("output directory " + out.string() + " lies inside the input directory " +
                      in_dir.string() + "; choose another paths.out");
  }
}

fs::path Artifacts::file(const fs::path& rel) {
  const auto p = root_ / rel;
  fs::create_directories(p.parent_path());
  note(rel);
  return p;
}

void Artifacts::note(const fs::path& rel) {
  if (std::ranges::find(written_, rel) == written_.end()) written_.push_back(rel);
}

void Artifacts::write_manifest(const std::string& command, const RunConfig& cfg) const {
  auto files = written_;
  std::ranges::sort(files);
  ordered_json j;
  j["command"] = command;
  j["seed"] = cfg.seed;
  j["config_hash"] = hex64(fnv1a64(canonical(cfg)));
  j["config"] = to_json(cfg);
  auto& arts = j["artifacts"] = ordered_json::array();
  for (const auto& rel : files) {
    const auto bytes = read_text(root_ / rel);
    arts.push_back({{"path", rel.generic_string()},
                    {"bytes", bytes.size()},
                    {"fnv1a64", hex64(fnv1a64(bytes))}});
  }
  write_text(root_ / "manifest.json", j.dump(2) + "\n");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failure on " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void save_dataset(const LabeledDataset& ds, const fs::path& path) {
  std::vector<WaferRecord> recs;
  recs.reserve(ds.size());
  for (const auto& s : ds.items()) recs.push_back(to_record(s));
  write_records(recs, path);
}

LabeledDataset load_dataset(const fs::path& path, SplitRole role) {
  if (!fs::exists(path)) {
    throw DataError("missing " + path.string() + " (run `wafer ingest` or `wafer pipeline` first)");
  }
  auto ds = to_dataset(read_records(path));
  ds.set_role(role);
  return ds;
}

void save_tensor_set(const LabeledDataset& ds, const fs::path& stem) {
  static_assert(std::endian::native == std::endian::little, "tensor store assumes little endian");
  auto bin = stem;
  bin += ".bin";
  auto meta = stem;
  meta += ".json";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw IoError("cannot write " + bin.string());
  ordered_json j;
  j["count"] = ds.size();
  j["shape"] = {kGrid, kGrid, kChannels};
  auto& items = j["items"] = ordered_json::array();
  for (const auto& s : ds.items()) {
    const auto t = to_tensor(s);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    items.push_back({{"id", s.id},
                     {"label", label_of(s.label)},
                     {"provenance", provenance_name(s.provenance)}});
  }
  if (!out) throw IoError("write failure on " + bin.string());
  write_text(meta, j.dump(1) + "\n");
}

LabeledDataset load_tensor_set(const fs::path& stem) {
  auto bin = stem;
  bin += ".bin";
  auto meta = stem;
  meta += ".json";
  json j;
  try {
    j = json::parse(read_text(meta));
  } catch (const json::exception& e) {
    throw DataError(meta.string() + ": " + e.what());
  }
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw IoError("cannot open " + bin.string());
  std::vector<Sample> items;
  try {
    for (const auto& e : j.at("items")) {
      EncodedTensor t;
      in.read(reinterpret_cast<char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
      if (!in) throw DataError(bin.string() + " is shorter than its index");
      items.push_back(Sample{e.at("id").get<std::string>(),
                             class_from_label(e.at("label").get<int>()),
                             provenance_from_name(e.at("provenance").get<std::string>()),
                             std::move(t)});
    }
  } catch (const json::exception& e) {
    throw DataError(meta.string() + ": " + e.what());
  }
  return LabeledDataset(std::move(items), SplitRole::train);
}

void write_curve_csv(const TrainReport& r, const fs::path& path) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (std::size_t e = 0; e < r.epochs.size(); ++e) {
    const auto& s = r.epochs[e];
    os << e + 1 << ',' << s.train_loss << ',' << s.train_acc << ',' << s.val_loss << ','
       << s.val_acc << '\n';
  }
  write_text(path, os.str());
}

void write_loss_csv(const std::vector<double>& loss, const fs::path& path) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,mse\n";
  for (std::size_t e = 0; e < loss.size(); ++e) os << e + 1 << ',' << loss[e] << '\n';
  write_text(path, os.str());
}

void write_grid_images(const EncodedTensor& t, const fs::path& stem) {
  std::ostringstream csv;
  csv.precision(9);
  std::ostringstream pgm;
  pgm << "P2\n" << kGrid << ' ' << kGrid << "\n255\n";
  for (std::size_t r = 0; r < kGrid; ++r) {
    for (std::size_t c = 0; c < kGrid; ++c) {
      const float v = t.at(r, c, 2);
      csv << (c ? "," : "") << v;
      pgm << (c ? " " : "") << std::lround(255.0 * std::clamp(static_cast<double>(v), 0.0, 1.0));
    }
    csv << '\n';
    pgm << '\n';
  }
  auto a = stem;
  a += ".csv";
  auto b = stem;
  b += ".pgm";
  write_text(a, csv.str());
  write_text(b, pgm.str());
}

ordered_json summary_json(const MetricsReport& r) {
  return {{"accuracy", r.prf.accuracy},         {"macro_precision", r.prf.macro_precision},
          {"macro_recall", r.prf.macro_recall}, {"macro_f1", r.prf.macro_f1},
          {"mean_auc", r.ranking.mean_auc},     {"mean_ap", r.ranking.mean_ap}};
}

}  // namespace wafer::app
