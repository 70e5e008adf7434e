#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wafer/autoencoder.hpp"
#include "wafer/baselines.hpp"
#include "wafer/cnn.hpp"
#include "wafer/metrics.hpp"
#include "wafer/occlusion.hpp"
#include "wafer_app/config.hpp"

namespace wafer::app {

using Logger = std::function<void(const std::string&)>;

/// Stage seeds: derive_seed(config seed, {tag, ...}).
enum class SeedTag : std::uint64_t {
  synth = 1,
  split = 2,
  autoencoder = 3,
  augment = 4,
  cnn_init = 5,
  cnn_train = 6,
  baselines = 7,
};
std::uint64_t stage_seed(const RunConfig& cfg, SeedTag tag, std::uint64_t sub = 0);

/// The input records when configured, otherwise a synthetic set.
LabeledDataset source_dataset(const RunConfig& cfg);
std::pair<LabeledDataset, LabeledDataset> split_dataset(const RunConfig& cfg,
                                                        const LabeledDataset& all);

AeTrainResult fit_autoencoder(const RunConfig& cfg, const LabeledDataset& train,
                              const Logger& log = {});
LabeledDataset augment_train(const RunConfig& cfg, Autoencoder& ae, const LabeledDataset& train);

struct CnnFit {
  CnnModel model;
  TrainReport report;
};
CnnFit fit_cnn(const RunConfig& cfg, const LabeledDataset& train, CnnVariant variant,
               const Logger& log = {});

struct Evaluation {
  nn::Tensor<float> proba;
  std::vector<int> labels;
  MetricsReport report;
};
Evaluation evaluate_cnn(CnnModel& model, const LabeledDataset& test);
Evaluation evaluate_proba(nn::Tensor<float> proba, std::vector<int> labels);

struct BaselineRun {
  BaselineSuite suite;
  FeatureMatrix train_features;
  FeatureMatrix test_features;
  Evaluation logreg;
  Evaluation svm;
  Evaluation forest;
  Evaluation vote;
};
BaselineRun fit_baselines(const RunConfig& cfg, const LabeledDataset& train,
                          const LabeledDataset& test, const Logger& log = {});

/// Heatmaps over the whole test split and over its Center-class items.
struct OcclusionRun {
  Heatmap all;
  Heatmap center;
};
OcclusionRun run_occlusion(const RunConfig& cfg, CnnModel& model, const LabeledDataset& test);

// ---- artifact plumbing ----------------------------------------------------

/// Refuses output directories equal to or inside the input's directory.
void check_output_dir(const RunConfig& cfg);

/// Records files written by a command and emits manifest.json.
class Artifacts {
 public:
  explicit Artifacts(std::filesystem::path root) : root_(std::move(root)) {}
  const std::filesystem::path& root() const noexcept { return root_; }
  /// Absolute path of a file under the root; creates parent directories.
  std::filesystem::path file(const std::filesystem::path& rel);
  void note(const std::filesystem::path& rel);
  void write_manifest(const std::string& command, const RunConfig& cfg) const;

 private:
  std::filesystem::path root_;
  std::vector<std::filesystem::path> written_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path, SplitRole role);

/// Tensor samples (augmented sets) as <stem>.bin (float32 little endian,
/// N x 26 x 26 x 3) plus <stem>.json (ids, labels, provenance).
void save_tensor_set(const LabeledDataset& ds, const std::filesystem::path& stem);
LabeledDataset load_tensor_set(const std::filesystem::path& stem);

void write_curve_csv(const TrainReport& r, const std::filesystem::path& path);
void write_loss_csv(const std::vector<double>& loss, const std::filesystem::path& path);

/// Grid of the defect channel as CSV plus a PGM image.
void write_grid_images(const EncodedTensor& t, const std::filesystem::path& stem);

/// {"accuracy":..,"macro_f1":..} etc. for the comparison tables.
nlohmann::ordered_json summary_json(const MetricsReport& r);

}  // namespace wafer::app
