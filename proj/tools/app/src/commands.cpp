#include "wafer_app/commands.hpp"

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "wafer/checkpoint.hpp"
#include "wafer/error.hpp"
#include "wafer/records.hpp"

namespace wafer::app {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void say(const CommandOptions& opt, const std::string& msg) {
  if (opt.log) opt.log(msg);
}

std::string cnn_stem(CnnVariant v) { return "cnn_" + std::string(variant_name(v)); }

ordered_json class_counts_json(const LabeledDataset& ds) {
  ordered_json j;
  const auto counts = ds.class_counts();
  for (std::size_t c = 0; c < kNumClasses; ++c) j[std::string(class_name(static_cast<DefectClass>(c)))] = counts[c];
  return j;
}

void write_split(Artifacts& art, const LabeledDataset& train, const LabeledDataset& test) {
  save_dataset(train, art.file("train.jsonl"));
  save_dataset(test, art.file("test.jsonl"));
  ordered_json j;
  j["train"] = class_counts_json(train);
  j["test"] = class_counts_json(test);
  write_text(art.file("split.json"), j.dump(2) + "\n");
}

// The train/test split in the output directory, produced on first use.
std::pair<LabeledDataset, LabeledDataset> obtain_split(const RunConfig& cfg, Artifacts& art,
                                                       const CommandOptions& opt) {
  const auto tr = cfg.out / "train.jsonl";
  const auto te = cfg.out / "test.jsonl";
  if (fs::exists(tr) && fs::exists(te)) {
    return {load_dataset(tr, SplitRole::train), load_dataset(te, SplitRole::test)};
  }
  say(opt, "splitting source data");
  auto split = split_dataset(cfg, source_dataset(cfg));
  write_split(art, split.first, split.second);
  return split;
}

Autoencoder obtain_autoencoder(const RunConfig& cfg, Artifacts& art, const CommandOptions& opt,
                               const LabeledDataset& train) {
  const auto path = cfg.out / "autoencoder.ckpt";
  if (fs::exists(path)) return Autoencoder::from_checkpoint(nn::load_checkpoint(path));
  auto fit = fit_autoencoder(cfg, train, opt.log);
  nn::save_checkpoint(fit.model.to_checkpoint(), art.file("autoencoder.ckpt"));
  write_loss_csv(fit.loss_curve, art.file("ae_loss.csv"));
  return std::move(fit.model);
}

LabeledDataset obtain_augmented(const RunConfig& cfg, Artifacts& art, const CommandOptions& opt,
                                const LabeledDataset& train) {
  if (fs::exists(cfg.out / "augmented.json")) return load_tensor_set(cfg.out / "augmented");
  auto ae = obtain_autoencoder(cfg, art, opt, train);
  say(opt, "augmenting training split to " + std::to_string(cfg.augment_target) + " per class");
  return augment_train(cfg, ae, train);
}

void write_reconstructions(Autoencoder& ae, const LabeledDataset& train, Artifacts& art) {
  const auto x = to_tensor(train[0]);
  const auto y = ae.decode(ae.encode(x));
  art.note("reconstruction/input.csv");
  art.note("reconstruction/input.pgm");
  art.note("reconstruction/output.csv");
  art.note("reconstruction/output.pgm");
  write_grid_images(x, art.root() / "reconstruction" / "input");
  write_grid_images(y, art.root() / "reconstruction" / "output");
}

void write_eval(Artifacts& art, const fs::path& rel, const Evaluation& ev) {
  write_report(ev.report, ev.proba, ev.labels, art.root() / rel);
  for (const char* f : {"metrics.json", "confusion.csv", "roc_points.csv", "pr_points.csv"}) {
    art.note(rel / f);
  }
}

void write_heatmap_files(Artifacts& art, const fs::path& rel, const Heatmap& h) {
  write_heatmap(h, art.root() / rel);
  for (const char* f : {"heatmap.csv", "heatmap.json", "heatmap.pgm"}) art.note(rel / f);
}

CnnModel load_cnn(const RunConfig& cfg) {
  const auto path = cfg.out / (cnn_stem(cfg.variant) + ".ckpt");
  if (!fs::exists(path)) {
    throw DataError("missing " + path.string() + " (run `wafer train-cnn` first)");
  }
  return CnnModel::from_checkpoint(nn::load_checkpoint(path));
}

void save_cnn(Artifacts& art, const CnnFit& fit) {
  const auto stem = cnn_stem(fit.model.variant());
  nn::save_checkpoint(fit.model.to_checkpoint(), art.file(stem + ".ckpt"));
  write_curve_csv(fit.report, art.file(stem + "_curve.csv"));
}

void write_baselines(Artifacts& art, const BaselineRun& b) {
  write_feature_csv(b.train_features, art.file("features_train.csv"));
  write_feature_csv(b.test_features, art.file("features_test.csv"));
  b.suite.save(art.file("baselines.txt"));
}

ordered_json baseline_evals(Artifacts& art, const BaselineRun& b) {
  ordered_json j;
  const std::pair<const char*, const Evaluation*> rows[] = {
      {"logreg", &b.logreg}, {"svm", &b.svm}, {"forest", &b.forest}, {"vote", &b.vote}};
  for (const auto& [name, ev] : rows) {
    write_eval(art, fs::path("baselines") / name, *ev);
    j[name] = summary_json(ev->report);
  }
  return j;
}

void prepare(const RunConfig& cfg) {
  cfg.validate();
  check_output_dir(cfg);
  fs::create_directories(cfg.out);
}

}  // namespace

void cmd_synth(const RunConfig& cfg, const CommandOptions& opt) {
  prepare(cfg);
  Artifacts art(cfg.out);
  say(opt, "generating synthetic wafers");
  const auto ds = generate_dataset(cfg.synth_counts, cfg.synth, stage_seed(cfg, SeedTag::synth));
  save_dataset(ds, art.file("synthetic.jsonl"));
  art.write_manifest("synth", cfg);
}

void cmd_ingest(const RunConfig& cfg, const CommandOptions& opt) {
  prepare(cfg);
  Artifacts art(cfg.out);
  say(opt, cfg.input.empty() ? "no input given; synthesizing" : "reading " + cfg.input.string());
  const auto [train, test] = split_dataset(cfg, source_dataset(cfg));
  write_split(art, train, test);
  art.write_manifest("ingest", cfg);
}

void cmd_train_ae(const RunConfig& cfg, const CommandOptions& opt) {
  prepare(cfg);
  Artifacts art(cfg.out);
  const auto [train, test] = obtain_split(cfg, art, opt);
  auto fit = fit_autoencoder(cfg, train, opt.log);
  nn::save_checkpoint(fit.model.to_checkpoint(), art.file("autoencoder.ckpt"));
  write_loss_csv(fit.loss_curve, art.file("ae_loss.csv"));
  write_reconstructions(fit.model, train, art);
  art.write_manifest("train-ae", cfg);
}

void cmd_augment(const RunConfig& cfg, const CommandOptions& opt) {
  prepare(cfg);
  Artifacts art(cfg.out);
  const auto [train, test] = obtain_split(cfg, art, opt);
  auto ae = obtain_autoencoder(cfg, art, opt, train);
  const auto aug = augment_train(cfg, ae, train);
  save_tensor_set(aug, cfg.out / "augmented");
  art.note("augmented.bin");
  art.note("augmented.json");
  write_text(art.file("augment_counts.json"), class_counts_json(aug).dump(2) + "\n");
  art.write_manifest("augment", cfg);
}

void cmd_train_cnn(const RunConfig& cfg, const CommandOptions& opt) {
  prepare(cfg);
  Artifacts art(cfg.out);
  const auto [train, test] = obtain_split(cfg, art, opt);
  const auto data = opt.no_augment ? train : obtain_augmented(cfg, art, opt, train);
  save_cnn(art, fit_cnn(cfg, data, cfg.variant, opt.log));
  art.write_manifest("train-cnn", cfg);
}

void cmd_train_baselines(const RunConfig& cfg, const CommandOptions& opt) {
  prepare(cfg);
  Artifacts art(cfg.out);
  const auto [train, test] = obtain_split(cfg, art, opt);
  write_baselines(art, fit_baselines(cfg, train, test, opt.log));
  art.write_manifest("train-baselines", cfg);
}

void cmd_evaluate(const RunConfig& cfg, const CommandOptions& opt) {
  prepare(cfg);
  Artifacts art(cfg.out);
  const auto [train, test] = obtain_split(cfg, art, opt);
  auto model = load_cnn(cfg);
  const auto ev = evaluate_cnn(model, test);
  write_eval(art, ".", ev);
  ordered_json cmp;
  cmp["cnn_aug"] = summary_json(ev.report);
  if (fs::exists(cfg.out / "baselines.txt")) {
    const auto suite = BaselineSuite::load(cfg.out / "baselines.txt");
    const auto f = extract_features(test);
    auto p = suite.predict(f);
    BaselineRun b;
    b.logreg = evaluate_proba(std::move(p.logreg), f.y);
    b.svm = evaluate_proba(std::move(p.svm), f.y);
    b.forest = evaluate_proba(std::move(p.forest), f.y);
    b.vote = evaluate_proba(std::move(p.vote.proba), f.y);
    cmp.update(baseline_evals(art, b));
  }
  write_text(art.file("comparison.json"), cmp.dump(2) + "\n");
  say(opt, "test accuracy " + std::to_string(ev.report.prf.accuracy) + ", macro-F1 " +
               std::to_string(ev.report.prf.macro_f1));
  art.write_manifest("evaluate", cfg);
}

void cmd_occlusion(const RunConfig& cfg, const CommandOptions& opt) {
  prepare(cfg);
  Artifacts art(cfg.out);
  const auto [train, test] = obtain_split(cfg, art, opt);
  auto model = load_cnn(cfg);
  say(opt, "occlusion analysis");
  const auto occ = run_occlusion(cfg, model, test);
  write_heatmap_files(art, "occlusion/all", occ.all);
  write_heatmap_files(art, "occlusion/center", occ.center);
  art.write_manifest("occlusion", cfg);
}

void cmd_ablate(const RunConfig& cfg, const CommandOptions& opt) {
  prepare(cfg);
  Artifacts art(cfg.out);
  const auto [train, test] = obtain_split(cfg, art, opt);
  const auto data = obtain_augmented(cfg, art, opt, train);
  ordered_json table;
  for (const auto v : kAllVariants) {
    auto fit = fit_cnn(cfg, data, v, opt.log);
    const auto ev = evaluate_cnn(fit.model, test);
    write_eval(art, fs::path("ablation") / variant_name(v), ev);
    auto row = summary_json(ev.report);
    row["parameters"] = fit.model.total_parameters();
    table[std::string(variant_name(v))] = row;
  }
  write_text(art.file("ablation.json"), table.dump(2) + "\n");
  art.write_manifest("ablate", cfg);
}

void cmd_pipeline(const RunConfig& cfg, const CommandOptions& opt) {
  prepare(cfg);
  Artifacts art(cfg.out);
  say(opt, "splitting source data");
  const auto [train, test] = split_dataset(cfg, source_dataset(cfg));
  write_split(art, train, test);

  auto ae = fit_autoencoder(cfg, train, opt.log);
  nn::save_checkpoint(ae.model.to_checkpoint(), art.file("autoencoder.ckpt"));
  write_loss_csv(ae.loss_curve, art.file("ae_loss.csv"));
  write_reconstructions(ae.model, train, art);

  say(opt, "augmenting training split to " + std::to_string(cfg.augment_target) + " per class");
  const auto aug = augment_train(cfg, ae.model, train);
  write_text(art.file("augment_counts.json"), class_counts_json(aug).dump(2) + "\n");

  auto fit = fit_cnn(cfg, aug, cfg.variant, opt.log);
  save_cnn(art, fit);
  const auto ev = evaluate_cnn(fit.model, test);
  write_eval(art, ".", ev);
  ordered_json cmp;
  cmp["cnn_aug"] = summary_json(ev.report);

  if (cfg.run_baselines) {
    const auto b = fit_baselines(cfg, train, test, opt.log);
    write_baselines(art, b);
    cmp.update(baseline_evals(art, b));
  }
  write_text(art.file("comparison.json"), cmp.dump(2) + "\n");

  if (cfg.run_occlusion) {
    say(opt, "occlusion analysis");
    const auto occ = run_occlusion(cfg, fit.model, test);
    write_heatmap_files(art, "occlusion/all", occ.all);
    write_heatmap_files(art, "occlusion/center", occ.center);
  }
  say(opt, "test accuracy " + std::to_string(ev.report.prf.accuracy) + ", macro-F1 " +
               std::to_string(ev.report.prf.macro_f1));
  art.write_manifest("pipeline", cfg);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Wafer map defect classification with autoencoder augmentation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "waferaug 0.1.0");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string input;
  std::vector<std::string> sets;
  bool quiet = false;
  bool no_augment = false;
  std::string variant;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON run config (defaults apply to missing keys)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("-o,--out", out, "Override paths.out");
    sub->add_option("-i,--input", input, "Override paths.input (JSON Lines wafer records)");
    sub->add_option("--set", sets, "Override any config key, e.g. --set cnn.epochs=5")
        ->take_all();
    sub->add_flag("-q,--quiet", quiet, "Suppress progress messages");
  };

  struct Cmd {
    const char* name;
    const char* help;
    void (*fn)(const RunConfig&, const CommandOptions&);
  };
  const Cmd cmds[] = {
      {"synth", "Generate a synthetic labeled wafer set (synthetic.jsonl)", cmd_synth},
      {"ingest", "Validate input records (or synthesize) and write the stratified split",
       cmd_ingest},
      {"train-ae", "Train the convolutional autoencoder on the training split", cmd_train_ae},
      {"augment", "Top up every class of the training split with decoded latent samples",
       cmd_augment},
      {"train-cnn", "Train the CNN classifier", cmd_train_cnn},
      {"train-baselines", "Extract 59 features and fit LR, SVM, forest and the vote",
       cmd_train_baselines},
      {"evaluate", "Score the CNN (and stored baselines) on the test split", cmd_evaluate},
      {"occlusion", "Occlusion-sensitivity heatmaps for the trained CNN", cmd_occlusion},
      {"ablate", "Train and score the full, no_conv3 and no_dense1 variants", cmd_ablate},
      {"pipeline", "split, train-ae, augment, train-cnn, evaluate, baselines, occlusion",
       cmd_pipeline},
  };
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    common(sub);
    if (std::string(c.name) == "train-cnn") {
      sub->add_flag("--no-augment", no_augment, "Fit on the original training split only");
    }
    if (std::string(c.name) == "train-cnn" || std::string(c.name) == "evaluate" ||
        std::string(c.name) == "occlusion") {
      sub->add_option("--variant", variant, "full, no_conv3 or no_dense1");
    }
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    cfg = apply_overrides(cfg, sets);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    if (!input.empty()) cfg.input = input;
    if (!variant.empty()) cfg.variant = variant_from_name(variant);
    CommandOptions opt;
    opt.no_augment = no_augment;
    if (!quiet) opt.log = [](const std::string& m) { std::cerr << "[wafer] " << m << '\n'; };
    for (const auto& [sub, cmd] : subs) {
      if (sub->parsed()) cmd->fn(cfg, opt);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
}

}  // namespace wafer::app
