#include "autorad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "autorad/rng.hpp"
#include "io_util.hpp"

namespace autorad {

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& what) {
    throw ValidationError("train." + field + " " + what);
  };
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) fail("lr0", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum", "must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay", "must be non-negative");
  if (epochs < 1) fail("epochs", "must be at least 1");
  if (batch_size < 1) fail("batch_size", "must be at least 1");
  if (folds < 2) fail("folds", "must be at least 2");
  if (context_tokens < 1) fail("context_tokens", "must be at least 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau", "must be positive");
  if (metanet_hidden < 0) fail("metanet_hidden", "must be non-negative");
}

double cosine_lr(long t, long T, double lr0) {
  if (T < 1) throw ValidationError("cosine_lr: T must be at least 1");
  if (t < 0 || t > T) throw ValidationError("cosine_lr: step " + std::to_string(t) + " outside [0, T]");
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(T)));
}

void sgd_step(HeadTensors& params, const HeadTensors& grads, HeadTensors& velocity, double lr, double momentum,
              double weight_decay) {
  for (int g = 0; g < HeadTensors::kGroupCount; ++g) {
    auto p = params.group(g);
    const auto gr = grads.group(g);
    auto v = velocity.group(g);
    if (gr.size() != p.size() || v.size() != p.size()) {
      throw ValidationError(std::string("sgd_step: shape mismatch in ") + HeadTensors::group_name(g));
    }
    if (!gr.allFinite()) throw NumericError(std::string("non-finite gradient in ") + HeadTensors::group_name(g));
    const double decay = HeadTensors::group_is_bias(g) ? 0.0 : weight_decay;
    v = momentum * v + gr + decay * p;
    p -= lr * v;
  }
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("stratified_folds: k must be at least 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, members] : by_class) {
    if (static_cast<int>(members.size()) < k) {
      throw ValidationError("stratified_folds: class " + std::to_string(label) + " has " +
                            std::to_string(members.size()) + " members, fewer than k = " + std::to_string(k));
    }
  }
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  Rng rng(seed);
  std::size_t counter = 0;
  for (auto& [label, members] : by_class) {
    shuffle(std::span<std::size_t>(members), rng);
    for (std::size_t idx : members) folds[counter++ % folds.size()].push_back(idx);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

Dataset align_dataset(const std::map<std::string, int>& labels, const EmbeddingStore& store, const FeatureTable& features) {
  if (labels.empty()) throw ValidationError("dataset: no labelled instances");
  std::set<std::string> feature_ids(features.ids.begin(), features.ids.end());
  if (feature_ids.size() != features.ids.size()) throw ValidationError("dataset: duplicate ids in the feature table");
  for (const auto& [id, m] : store.slices) {
    if (!labels.count(id)) throw ValidationError("nodule " + id + ": has embeddings but no label");
  }
  for (const auto& id : features.ids) {
    if (!labels.count(id)) throw ValidationError("nodule " + id + ": has features but no label");
  }
  Dataset d;
  const auto n = static_cast<Eigen::Index>(labels.size());
  d.images.resize(n, store.embed_dim);
  d.radiomics.resize(n, static_cast<Eigen::Index>(features.names.size()));
  d.feature_names = features.names;
  d.class_tokens = store.class_tokens;
  Eigen::Index row = 0;
  for (const auto& [id, label] : labels) {
    if (label < 0 || label >= store.n_classes()) {
      throw ValidationError("nodule " + id + ": label " + std::to_string(label) + " outside the class range");
    }
    if (!store.slices.count(id)) throw ValidationError("nodule " + id + ": missing image embeddings");
    if (!feature_ids.count(id)) throw ValidationError("nodule " + id + ": missing radiomics features");
    d.ids.push_back(id);
    d.labels.push_back(label);
    d.images.row(row) = store.pooled(id).transpose();
    const auto& values = features.rows[features.row_of(id)];
    for (std::size_t c = 0; c < values.size(); ++c) {
      if (!std::isfinite(values[c])) {
        throw ValidationError("nodule " + id + ": non-finite feature " + features.names[c]);
      }
      d.radiomics(row, static_cast<Eigen::Index>(c)) = values[c];
    }
    ++row;
  }
  return d;
}

std::map<std::string, int> load_labels_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("nodule_id,label", 0) != 0) {
    throw ValidationError(path.string() + ": expected header nodule_id,label");
  }
  std::map<std::string, int> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": missing label");
    const auto id = line.substr(0, comma);
    const auto value = line.substr(comma + 1);
    int label = 0;
    if (!value.empty() && std::all_of(value.begin(), value.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      label = std::stoi(value);
    } else {
      label = static_cast<int>(label_from_name(value));
    }
    if (!out.emplace(id, label).second) throw ValidationError("duplicate nodule_id " + id + " in " + path.string());
  }
  return out;
}

void save_labels_csv(const std::map<std::string, int>& labels, const std::filesystem::path& path) {
  std::string out = "nodule_id,label\n";
  for (const auto& [id, label] : labels) out += id + "," + std::to_string(label) + "\n";
  io::write_text(path, out);
}

namespace {

Batch gather(const Dataset& data, const Matrix& normalized, std::span<const std::size_t> rows) {
  Batch b;
  b.images.resize(static_cast<Eigen::Index>(rows.size()), data.images.cols());
  b.radiomics.resize(static_cast<Eigen::Index>(rows.size()), normalized.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.images.row(static_cast<Eigen::Index>(i)) = data.images.row(static_cast<Eigen::Index>(rows[i]));
    b.radiomics.row(static_cast<Eigen::Index>(i)) = normalized.row(static_cast<Eigen::Index>(rows[i]));
    b.labels.push_back(data.labels[rows[i]]);
  }
  return b;
}

}  // namespace

TrainedHead train_head(const Dataset& data, std::span<const std::size_t> train, const TrainConfig& config,
                       const EncoderSpec& encoder_spec, std::uint64_t seed) {
  config.validate();
  if (train.empty()) throw ValidationError("train_head: empty training split");
  if (encoder_spec.token_dim != data.class_tokens.cols() || encoder_spec.embed_dim != data.images.cols()) {
    throw ValidationError("train_head: encoder dimensions disagree with the embeddings");
  }
  Matrix train_rows(static_cast<Eigen::Index>(train.size()), data.radiomics.cols());
  std::vector<std::string> train_ids;
  for (std::size_t i = 0; i < train.size(); ++i) {
    train_rows.row(static_cast<Eigen::Index>(i)) = data.radiomics.row(static_cast<Eigen::Index>(train[i]));
    train_ids.push_back(data.ids[train[i]]);
  }
  TrainedHead out;
  auto& ckpt = out.checkpoint;
  ckpt.normalizer = FeatureNormalizer::fit(train_rows, std::move(train_ids));
  ckpt.encoder = encoder_spec;
  ckpt.class_tokens = data.class_tokens;
  ckpt.feature_names = data.feature_names;
  ckpt.seed = seed;
  const int n_r = static_cast<int>(data.radiomics.cols());
  const int hidden = config.metanet_hidden > 0 ? config.metanet_hidden : default_metanet_hidden(n_r);
  ckpt.params = init_params(config.context_tokens, encoder_spec.token_dim, n_r, hidden, derive_seed(seed, 1), config.tau);

  const FrozenTextEncoder encoder = encoder_spec.build();
  // Only training rows are ever read from this matrix.
  Matrix normalized = Matrix::Zero(data.radiomics.rows(), data.radiomics.cols());
  for (std::size_t idx : train) {
    normalized.row(static_cast<Eigen::Index>(idx)) =
        ckpt.normalizer.apply(data.radiomics.row(static_cast<Eigen::Index>(idx)).transpose()).transpose();
  }

  std::vector<std::size_t> order(train.begin(), train.end());
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const long steps_per_epoch = static_cast<long>((order.size() + bs - 1) / bs);
  const long total_steps = steps_per_epoch * config.epochs;
  HeadTensors velocity = ckpt.params.tensors.zeros_like();
  Rng rng(derive_seed(seed, 3));
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto len = std::min(bs, order.size() - start);
      const Batch batch = gather(data, normalized, std::span<const std::size_t>(order).subspan(start, len));
      const auto lg = loss_and_grads(ckpt.params, encoder, data.class_tokens, batch);
      if (!std::isfinite(lg.loss)) throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      epoch_loss += lg.loss * static_cast<double>(len);
      sgd_step(ckpt.params.tensors, lg.grads, velocity, cosine_lr(step, total_steps, config.lr0), config.momentum,
               config.weight_decay);
      ++step;
    }
    out.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return out;
}

Matrix predict(const Checkpoint& ckpt, const Matrix& images, const Matrix& radiomics) {
  if (images.rows() != radiomics.rows()) throw ValidationError("predict: image and radiomics rows differ");
  const FrozenTextEncoder encoder = ckpt.encoder.build();
  Matrix probs(images.rows(), ckpt.class_tokens.rows());
  for (Eigen::Index i = 0; i < images.rows(); ++i) {
    const Vector r = ckpt.normalizer.apply(radiomics.row(i).transpose());
    probs.row(i) = classify(ckpt.params, images.row(i).transpose(), encoder, ckpt.class_tokens, r).probabilities.transpose();
  }
  return probs;
}

std::vector<std::string> class_names(int n_classes) {
  std::vector<std::string> out;
  for (int k = 0; k < n_classes; ++k) {
    out.push_back(n_classes == kNumClasses ? label_name(static_cast<Label>(k)) : "class" + std::to_string(k));
  }
  return out;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace

CvResult run_cv(const Dataset& data, const TrainConfig& config, const EncoderSpec& encoder,
                const std::optional<std::filesystem::path>& out_dir, int max_folds) {
  config.validate();
  const auto folds = stratified_folds(data.labels, config.folds, derive_seed(config.seed, 1000));
  const int n_run = max_folds > 0 ? std::min(max_folds, config.folds) : config.folds;
  const auto names = class_names(data.n_classes());
  CvResult cv;
  std::vector<double> accs;
  for (int f = 0; f < n_run; ++f) {
    FoldResult fr;
    fr.fold = f;
    fr.test_indices = folds[static_cast<std::size_t>(f)];
    if (fr.test_indices.empty()) throw ValidationError("fold " + std::to_string(f) + " is empty");
    for (int g = 0; g < config.folds; ++g) {
      if (g == f) continue;
      const auto& other = folds[static_cast<std::size_t>(g)];
      fr.train_indices.insert(fr.train_indices.end(), other.begin(), other.end());
    }
    std::sort(fr.train_indices.begin(), fr.train_indices.end());
    auto trained = train_head(data, fr.train_indices, config, encoder, derive_seed(config.seed, static_cast<std::uint64_t>(f) + 1));
    fr.epoch_losses = std::move(trained.epoch_losses);
    fr.normalizer_fit_ids = trained.checkpoint.normalizer.fitted_ids();

    Matrix images(static_cast<Eigen::Index>(fr.test_indices.size()), data.images.cols());
    Matrix radiomics(static_cast<Eigen::Index>(fr.test_indices.size()), data.radiomics.cols());
    std::vector<int> labels;
    for (std::size_t i = 0; i < fr.test_indices.size(); ++i) {
      images.row(static_cast<Eigen::Index>(i)) = data.images.row(static_cast<Eigen::Index>(fr.test_indices[i]));
      radiomics.row(static_cast<Eigen::Index>(i)) = data.radiomics.row(static_cast<Eigen::Index>(fr.test_indices[i]));
      labels.push_back(data.labels[fr.test_indices[i]]);
    }
    fr.metrics = compute_metrics(labels, predict(trained.checkpoint, images, radiomics));
    if (out_dir) {
      const auto dir = *out_dir / ("fold_" + std::to_string(f));
      fr.checkpoint_path = dir / "checkpoint.json";
      save_checkpoint(trained.checkpoint, fr.checkpoint_path);
      write_metrics_json(fr.metrics, names, dir / "metrics.json");
      write_roc_csv(fr.metrics, names, dir / "roc.csv");
      std::string ids = "nodule_id\n";
      for (std::size_t idx : fr.test_indices) ids += data.ids[idx] + "\n";
      io::write_text(dir / "test_ids.csv", ids);
    }
    accs.push_back(fr.metrics.accuracy);
    cv.folds.push_back(std::move(fr));
  }
  std::tie(cv.mean_accuracy, cv.std_accuracy) = mean_std(accs);
  if (out_dir) write_aggregate_json(cv, config, *out_dir / "aggregate.json");
  return cv;
}

void write_aggregate_json(const CvResult& cv, const TrainConfig& config, const std::filesystem::path& path) {
  nlohmann::json j;
  j["folds_run"] = cv.folds.size();
  j["folds"] = config.folds;
  j["context_tokens"] = config.context_tokens;
  j["seed"] = config.seed;
  j["accuracy_mean"] = cv.mean_accuracy;
  j["accuracy_std"] = cv.std_accuracy;
  j["fold_accuracy"] = nlohmann::json::array();
  j["final_loss"] = nlohmann::json::array();
  for (const auto& f : cv.folds) {
    j["fold_accuracy"].push_back(f.metrics.accuracy);
    j["final_loss"].push_back(f.epoch_losses.empty() ? 0.0 : f.epoch_losses.back());
  }
  io::write_json(path, j);
}

std::vector<SweepRow> run_sweep(const Dataset& data, const TrainConfig& config, const EncoderSpec& encoder,
                                std::span<const int> grid, int max_folds) {
  if (grid.empty()) throw ValidationError("sweep: empty context-token grid");
  std::vector<SweepRow> rows;
  for (int m : grid) {
    TrainConfig c = config;
    c.context_tokens = m;
    const auto cv = run_cv(data, c, encoder, std::nullopt, max_folds);
    SweepRow row;
    row.context_tokens = m;
    for (const auto& f : cv.folds) row.fold_accuracies.push_back(f.metrics.accuracy);
    row.mean_accuracy = cv.mean_accuracy;
    row.std_accuracy = cv.std_accuracy;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "context_tokens,accuracy_mean,accuracy_std,folds\n";
  for (const auto& r : rows) {
    out += std::to_string(r.context_tokens) + "," + io::format_double(r.mean_accuracy) + "," +
           io::format_double(r.std_accuracy) + "," + std::to_string(r.fold_accuracies.size()) + "\n";
  }
  return out;
}

}  // namespace autorad
