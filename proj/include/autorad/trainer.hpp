#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autorad/encoders.hpp"
#include "autorad/metrics.hpp"
#include "autorad/prompt_head.hpp"
#include "autorad/radiomics.hpp"

namespace autorad {

struct TrainConfig {
  double lr0 = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-7;
  int epochs = 200;
  int batch_size = 32;
  int folds = 5;
  std::uint64_t seed = 0;
  int context_tokens = 50;
  double tau = kDefaultTau;
  int metanet_hidden = 0;  // 0 -> ceil(N_r / 16)

  /// Throws ValidationError naming the offending field.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// lr0 * 0.5 * (1 + cos(pi t / T)); requires 0 <= t <= T, T >= 1.
double cosine_lr(long t, long T, double lr0);

/// Heavy-ball step on every tensor group:
///   v <- momentum v + g + weight_decay theta   (decay skipped for biases)
///   theta <- theta - lr v
/// A non-finite gradient throws NumericError naming the group.
void sgd_step(HeadTensors& params, const HeadTensors& grads, HeadTensors& velocity, double lr, double momentum,
              double weight_decay);

/// Per class: member indices ascending, shuffled with Rng(seed) (classes in
/// ascending label order share one generator), then dealt round-robin to
/// folds with a counter that carries over between classes. Each fold is
/// returned sorted.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

/// Instances aligned across labels, embeddings and features, sorted by id.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<int> labels;
  Matrix images;     // pooled embeddings, n x d_e
  Matrix radiomics;  // raw feature values, n x N_r
  std::vector<std::string> feature_names;
  Matrix class_tokens;

  std::size_t size() const { return ids.size(); }
  int n_classes() const { return static_cast<int>(class_tokens.rows()); }
};

/// Every labelled id must appear in the store and the table and vice versa;
/// the first mismatch is reported by id.
Dataset align_dataset(const std::map<std::string, int>& labels, const EmbeddingStore& store, const FeatureTable& features);

/// Labels CSV: header `nodule_id,label`; label is a class name or index.
std::map<std::string, int> load_labels_csv(const std::filesystem::path& path);
void save_labels_csv(const std::map<std::string, int>& labels, const std::filesystem::path& path);

struct TrainedHead {
  Checkpoint checkpoint;
  std::vector<double> epoch_losses;
};

/// Fits the normalizer on `train` rows only, initializes the head from `seed`,
/// then trains for config.epochs with per-epoch shuffling from
/// Rng(derive_seed(seed, 3)) and the cosine schedule over all steps.
TrainedHead train_head(const Dataset& data, std::span<const std::size_t> train, const TrainConfig& config,
                       const EncoderSpec& encoder, std::uint64_t seed);

/// n x N_c class probabilities for raw (un-normalized) radiomics rows.
Matrix predict(const Checkpoint& ckpt, const Matrix& images, const Matrix& radiomics);

struct FoldResult {
  int fold = 0;
  std::vector<double> epoch_losses;
  MetricsBundle metrics;
  std::filesystem::path checkpoint_path;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::vector<std::string> normalizer_fit_ids;
};

struct CvResult {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population (ddof 0) over folds
};

/// Folds from stratified_folds(labels, config.folds, derive_seed(seed, 1000));
/// fold f trains with seed derive_seed(config.seed, f + 1). With `out_dir`,
/// writes fold_<f>/checkpoint.json (+ .bin), fold_<f>/metrics.json,
/// fold_<f>/roc.csv and aggregate.json. `max_folds` > 0 runs only the first
/// folds.
CvResult run_cv(const Dataset& data, const TrainConfig& config, const EncoderSpec& encoder,
                const std::optional<std::filesystem::path>& out_dir = std::nullopt, int max_folds = 0);

void write_aggregate_json(const CvResult& cv, const TrainConfig& config, const std::filesystem::path& path);

inline const std::vector<int> kDefaultSweepGrid{10, 20, 30, 40, 50, 60, 70};

struct SweepRow {
  int context_tokens = 0;
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

std::vector<SweepRow> run_sweep(const Dataset& data, const TrainConfig& config, const EncoderSpec& encoder,
                                std::span<const int> grid, int max_folds = 0);
/// Columns: context_tokens,accuracy_mean,accuracy_std,folds.
std::string format_sweep_csv(std::span<const SweepRow> rows);

std::vector<std::string> class_names(int n_classes);

}  // namespace autorad
