#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "autorad/radiomics.hpp"
#include "autorad/synthetic.hpp"
#include "autorad/trainer.hpp"

namespace autorad {

struct EncoderConfig {
  std::uint64_t seed = 1234;
  int hidden_dim = 64;
  int n_classes = kNumClasses;
  std::uint64_t class_token_seed = 5;
  /// Per-coordinate sd of generated class tokens. With d_t = 32 this gives
  /// |c| close to M + 1 = 51, so the class token carries O(1) weight in the
  /// mean-pooled prompt.
  double class_token_scale = 9.0;

  bool operator==(const EncoderConfig&) const = default;
};

/// Stand-in image encoder used by `preprocess --embeddings`.
struct ToyEmbeddingConfig {
  int embed_dim = 32;
  int token_dim = 32;
  int grid = 4;
  int crop_size = 224;
  std::uint64_t seed = 4321;

  bool operator==(const ToyEmbeddingConfig&) const = default;
};

struct SweepConfig {
  std::vector<int> grid = kDefaultSweepGrid;
  int folds = 0;  // 0 = every fold

  bool operator==(const SweepConfig&) const = default;
};

struct SyntheticConfig {
  SyntheticCohortConfig cohort;
  int token_dim = 32;
  SyntheticVolumeConfig volumes;
};

/// JSON layout (every key optional, unknown keys rejected):
/// {
///   "seed": 0,
///   "extraction": {"bin_width", "log_sigmas", "wavelet_subbands"},
///   "train": {"lr0", "momentum", "weight_decay", "epochs", "batch_size",
///             "folds", "context_tokens", "tau", "metanet_hidden"},
///   "encoder": {"seed", "hidden_dim", "n_classes", "class_token_seed",
///               "class_token_scale"},
///   "toy_embedding": {"embed_dim", "token_dim", "grid", "crop_size", "seed"},
///   "sweep": {"grid", "folds"}
/// }
/// The top-level seed also seeds training (train.seed mirrors it).
struct RunConfig {
  std::uint64_t seed = 0;
  ExtractionConfig extraction;
  TrainConfig train;
  EncoderConfig encoder;
  ToyEmbeddingConfig toy_embedding;
  SweepConfig sweep;

  void set_seed(std::uint64_t s) {
    seed = s;
    train.seed = s;
  }
  /// Throws ValidationError naming the offending field.
  void validate() const;
  std::string to_json() const;
};

RunConfig parse_run_config(const std::string& json_text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

/// Encoder for embeddings of width d_e with tokens of width d_t.
EncoderSpec encoder_spec(const EncoderConfig& config, int token_dim, int embed_dim);
ClassTokenFallback class_token_fallback(const EncoderConfig& config);

}  // namespace autorad
