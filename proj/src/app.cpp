#include "autorad/app.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "autorad/config.hpp"
#include "autorad/preprocess.hpp"
#include "autorad/synthetic.hpp"
#include "io_util.hpp"

namespace autorad {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "Run configuration JSON");
    cmd->add_option("--seed", seed, "Override the configured seed");
  }

  RunConfig load() const {
    RunConfig c = config.empty() ? RunConfig{} : load_run_config(config);
    if (seed) c.set_seed(*seed);
    c.validate();
    return c;
  }
};

struct LabelSource {
  std::string labels;
  std::string records;

  void add(CLI::App* cmd) {
    auto* l = cmd->add_option("--labels", labels, "CSV nodule_id,label");
    auto* r = cmd->add_option("--records", records, "Nodule records JSON (labels derived from scores)");
    l->excludes(r);
  }

  std::map<std::string, int> load() const {
    if (!labels.empty()) return load_labels_csv(labels);
    if (!records.empty()) {
      std::map<std::string, int> out;
      for (const auto& r : load_nodule_records(records)) out.emplace(r.nodule_id, static_cast<int>(r.label));
      return out;
    }
    throw ValidationError("one of --labels or --records is required");
  }
};

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// extract: records -> feature CSV + manifest
int cmd_extract(const CommonOptions& common, const std::string& records_path, const std::string& out_path,
                std::ostream& out) {
  const auto config = common.load();
  const auto records = load_nodule_records(records_path);
  if (records.empty()) throw ValidationError(records_path + ": no nodule records");
  std::vector<RadiomicsVector> vectors;
  for (const auto& r : records) vectors.push_back(extract_all(r, config.extraction));
  const auto manifest = build_manifest(config.extraction);
  write_feature_table(vectors, manifest, out_path);
  out << "extracted " << manifest.size() << " features for " << vectors.size() << " nodules -> " << out_path << "\n";
  return 0;
}

// preprocess: records -> resampled volumes, consensus masks, middle-slice
// crops, optional stand-in embeddings
int cmd_preprocess(const CommonOptions& common, const std::string& records_path, const std::string& out_dir,
                   bool embeddings, std::ostream& out) {
  const auto config = common.load();
  const auto records = load_nodule_records(records_path);
  if (records.empty()) throw ValidationError(records_path + ": no nodule records");
  const fs::path dir(out_dir);
  const auto& toy = config.toy_embedding;
  const ToyImageEncoder image_encoder(toy.seed, toy.embed_dim, toy.grid);
  EmbeddingStore store;
  store.embed_dim = toy.embed_dim;
  store.token_dim = toy.token_dim;
  store.class_tokens = make_class_tokens(config.encoder.n_classes, toy.token_dim, config.encoder.class_token_seed,
                                         config.encoder.class_token_scale);
  std::map<std::string, int> labels;
  for (const auto& r : records) {
    const auto prepared = prepare_nodule(r);
    const auto node_dir = dir / "nodules" / r.nodule_id;
    save_volume(prepared.image, node_dir / "image.json");
    save_mask(prepared.mask, node_dir / "mask.json");
    const auto mask_mid = prepared.mask.slice(prepared.middle);
    const auto window = nodule_crop_window(mask_mid);
    const auto crop = resize_bilinear(apply_crop(prepared.image.slice(prepared.middle), window), toy.crop_size);
    std::vector<float> pixels(crop.values().begin(), crop.values().end());
    save_volume(VoxelVolume({1, crop.rows(), crop.cols()}, {1.0, 1.0, 1.0}, std::move(pixels)), node_dir / "crop.json");
    labels.emplace(r.nodule_id, static_cast<int>(r.label));
    if (embeddings) {
      const auto [first, last] = prepared.slice_range;
      Matrix rows(last - first + 1, toy.embed_dim);
      for (int z = first; z <= last; ++z) {
        const auto slice_crop = resize_bilinear(apply_crop(prepared.image.slice(z), window), toy.crop_size);
        rows.row(z - first) = image_encoder.encode(slice_crop).transpose();
      }
      store.slices.emplace(r.nodule_id, std::move(rows));
    }
  }
  save_labels_csv(labels, dir / "labels.csv");
  if (embeddings) save_embeddings(store, dir / "embeddings.json");
  out << "preprocessed " << records.size() << " nodules -> " << out_dir << "\n";
  return 0;
}

struct DataInputs {
  std::string features;
  std::string embeddings;
  LabelSource labels;

  void add(CLI::App* cmd) {
    cmd->add_option("--features", features, "Feature CSV")->required();
    cmd->add_option("--embeddings", embeddings, "Embedding manifest JSON")->required();
    labels.add(cmd);
  }

  std::pair<Dataset, EncoderSpec> load(const RunConfig& config) const {
    const auto store = load_embeddings(embeddings, config.encoder.n_classes, class_token_fallback(config.encoder));
    const auto table = read_feature_table(features);
    auto data = align_dataset(labels.load(), store, table);
    return {std::move(data), encoder_spec(config.encoder, store.token_dim, store.embed_dim)};
  }
};

int cmd_train(const CommonOptions& common, const DataInputs& inputs, const std::string& out_dir, std::ostream& out) {
  const auto config = common.load();
  const auto [data, spec] = inputs.load(config);
  save_run_config(config, fs::path(out_dir) / "config.json");
  const auto cv = run_cv(data, config.train, spec, fs::path(out_dir));
  for (const auto& f : cv.folds) {
    out << "fold " << f.fold << ": accuracy " << fixed(f.metrics.accuracy) << " final loss "
        << fixed(f.epoch_losses.back()) << "\n";
  }
  out << "accuracy " << fixed(cv.mean_accuracy) << " +- " << fixed(cv.std_accuracy) << " over " << cv.folds.size()
      << " folds -> " << out_dir << "\n";
  return 0;
}

std::set<std::string> read_id_list(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("nodule_id", 0) != 0) throw ValidationError(path.string() + ": expected header nodule_id");
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.insert(line.substr(0, line.find(',')));
  }
  return ids;
}

int cmd_evaluate(const CommonOptions& common, const std::string& checkpoint_path, const DataInputs& inputs,
                 const std::string& ids_path, const std::string& out_dir, std::ostream& out) {
  const auto config = common.load();
  const auto ckpt = load_checkpoint(checkpoint_path);
  const auto [data, spec] = inputs.load(config);
  (void)spec;
  if (data.feature_names != ckpt.feature_names) {
    std::size_t i = 0;
    while (i < data.feature_names.size() && i < ckpt.feature_names.size() && data.feature_names[i] == ckpt.feature_names[i]) ++i;
    throw ValidationError("feature column " + std::to_string(i) + " (" +
                          (i < data.feature_names.size() ? data.feature_names[i] : std::string("<missing>")) +
                          ") does not match the checkpoint");
  }
  if (data.images.cols() != ckpt.encoder.embed_dim) throw ValidationError("embedding width does not match the checkpoint d_e");
  std::vector<std::size_t> rows;
  if (ids_path.empty()) {
    for (std::size_t i = 0; i < data.size(); ++i) rows.push_back(i);
  } else {
    const auto ids = read_id_list(ids_path);
    for (const auto& id : ids) {
      if (!std::binary_search(data.ids.begin(), data.ids.end(), id)) throw ValidationError("nodule " + id + ": not in the inputs");
    }
    for (std::size_t i = 0; i < data.size(); ++i)
      if (ids.count(data.ids[i])) rows.push_back(i);
  }
  if (rows.empty()) throw ValidationError("evaluate: no instances selected");
  Matrix images(static_cast<Eigen::Index>(rows.size()), data.images.cols());
  Matrix radiomics(static_cast<Eigen::Index>(rows.size()), data.radiomics.cols());
  std::vector<int> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    images.row(static_cast<Eigen::Index>(i)) = data.images.row(static_cast<Eigen::Index>(rows[i]));
    radiomics.row(static_cast<Eigen::Index>(i)) = data.radiomics.row(static_cast<Eigen::Index>(rows[i]));
    labels.push_back(data.labels[rows[i]]);
  }
  const auto metrics = compute_metrics(labels, predict(ckpt, images, radiomics));
  const auto names = class_names(metrics.n_classes);
  write_metrics_json(metrics, names, fs::path(out_dir) / "metrics.json");
  write_roc_csv(metrics, names, fs::path(out_dir) / "roc.csv");
  out << "accuracy " << fixed(metrics.accuracy) << " on " << rows.size() << " nodules -> " << out_dir << "\n";
  for (int k = 0; k < metrics.n_classes; ++k) {
    const auto& c = metrics.classes[static_cast<std::size_t>(k)];
    out << "  " << names[static_cast<std::size_t>(k)] << ": recall " << fixed(c.recall) << " F1 " << fixed(c.f1)
        << " AUC " << (c.auc ? fixed(*c.auc) : std::string("n/a")) << "\n";
  }
  return 0;
}

int cmd_sweep(const CommonOptions& common, const DataInputs& inputs, const std::string& out_path, std::ostream& out) {
  const auto config = common.load();
  const auto [data, spec] = inputs.load(config);
  const auto rows = run_sweep(data, config.train, spec, config.sweep.grid, config.sweep.folds);
  const auto csv = format_sweep_csv(rows);
  io::write_text(out_path, csv);
  out << "context tokens | accuracy\n";
  for (const auto& r : rows) {
    out << r.context_tokens << " | " << fixed(100.0 * r.mean_accuracy, 2) << " +- " << fixed(100.0 * r.std_accuracy, 2) << "\n";
  }
  out << "-> " << out_path << "\n";
  return 0;
}

int cmd_selftest(std::ostream& out) {
  int failed = 0;
  for (const auto& c : run_selftest_checks()) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) out << " (" << c.detail << ")";
    out << "\n";
    failed += !c.passed;
  }
  out << (failed ? std::to_string(failed) + " check(s) failed" : std::string("all checks passed")) << "\n";
  return failed ? 2 : 0;
}

int cmd_synth(const CommonOptions& common, const std::string& out_dir, bool volumes, int per_class, std::ostream& out) {
  const auto config = common.load();
  const fs::path dir(out_dir);
  SyntheticConfig sc;
  if (per_class > 0) sc.cohort.per_class = per_class;
  const auto tokens = make_class_tokens(config.encoder.n_classes, sc.token_dim, config.encoder.class_token_seed,
                                        config.encoder.class_token_scale);
  sc.cohort.n_classes = config.encoder.n_classes;
  const auto encoder = encoder_spec(config.encoder, sc.token_dim, sc.cohort.embed_dim).build();
  const auto cohort = make_synthetic_cohort(sc.cohort, encoder, tokens);
  save_embeddings(cohort.embeddings, dir / "embeddings.json");
  io::write_text(dir / "features.csv", format_feature_table(cohort.features));
  save_labels_csv(cohort.labels, dir / "labels.csv");
  out << "synthetic cohort: " << cohort.labels.size() << " nodules -> " << out_dir << "\n";
  if (volumes) {
    const auto records = write_synthetic_volumes(sc.volumes, dir / "volumes");
    out << "synthetic volumes: " << records.size() << " nodules -> " << (dir / "volumes" / "records.json").string() << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radiomics-conditioned prompt learning for nodule malignancy classification", "autorad"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "autorad 1.0");

  CommonOptions common;
  std::string records, out_path, out_dir, checkpoint, ids;
  bool with_embeddings = false, with_volumes = false;
  int per_class = 0;
  DataInputs inputs;

  auto* extract = app.add_subcommand("extract", "Volumes + masks -> radiomics feature CSV and manifest");
  common.add(extract);
  extract->add_option("--records", records, "Nodule records JSON")->required();
  extract->add_option("--out", out_path, "Output feature CSV")->required();

  auto* preprocess = app.add_subcommand("preprocess", "Resample, consensus masks and nodule crops");
  common.add(preprocess);
  preprocess->add_option("--records", records, "Nodule records JSON")->required();
  preprocess->add_option("--out", out_dir, "Output directory")->required();
  preprocess->add_flag("--embeddings", with_embeddings, "Also write stand-in per-slice image embeddings");

  auto* train = app.add_subcommand("train", "Cross-validated training of the prompt head");
  common.add(train);
  inputs.add(train);
  train->add_option("--out", out_dir, "Results directory")->required();

  DataInputs eval_inputs;
  auto* evaluate = app.add_subcommand("evaluate", "Checkpoint + inputs -> metrics JSON and ROC CSV");
  common.add(evaluate);
  eval_inputs.add(evaluate);
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  evaluate->add_option("--ids", ids, "CSV of nodule ids to evaluate (default: all)");
  evaluate->add_option("--out", out_dir, "Output directory")->required();

  DataInputs sweep_inputs;
  auto* sweep = app.add_subcommand("sweep", "Accuracy over the context-token grid");
  common.add(sweep);
  sweep_inputs.add(sweep);
  sweep->add_option("--out", out_path, "Output CSV")->required();

  auto* selftest = app.add_subcommand("selftest", "Run the built-in oracle and invariant checks");

  auto* synth = app.add_subcommand("synth", "Write a synthetic cohort (and optionally synthetic volumes)");
  common.add(synth);
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_flag("--volumes", with_volumes, "Also write synthetic CT volumes, masks and records");
  synth->add_option("--per-class", per_class, "Nodules per class in the cohort");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (extract->parsed()) return cmd_extract(common, records, out_path, out);
    if (preprocess->parsed()) return cmd_preprocess(common, records, out_dir, with_embeddings, out);
    if (train->parsed()) return cmd_train(common, inputs, out_dir, out);
    if (evaluate->parsed()) return cmd_evaluate(common, checkpoint, eval_inputs, ids, out_dir, out);
    if (sweep->parsed()) return cmd_sweep(common, sweep_inputs, out_path, out);
    if (selftest->parsed()) return cmd_selftest(out);
    if (synth->parsed()) return cmd_synth(common, out_dir, with_volumes, per_class, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"autorad"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace autorad
