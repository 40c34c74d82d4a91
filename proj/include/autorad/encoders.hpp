#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "autorad/grid.hpp"

namespace autorad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Mean over rows (one row per slice embedding).
Vector pool_slices(const Matrix& slices);

/// Frozen stand-in for the prompt text encoder:
///   m   = mean of the prompt tokens
///   h   = tanh(W1 m + b1)
///   out = tanh(W2 h + b2)
/// Weights are drawn once from Rng(seed) in the order W1 (row-major), b1,
/// W2 (row-major), b2: weights ~ N(0, 1/fan_in), biases ~ N(0, 0.1^2).
class FrozenTextEncoder {
 public:
  FrozenTextEncoder(std::uint64_t seed, int token_dim, int hidden_dim, int embed_dim);

  std::uint64_t seed() const { return seed_; }
  int token_dim() const { return static_cast<int>(w1_.cols()); }
  int hidden_dim() const { return static_cast<int>(w1_.rows()); }
  int embed_dim() const { return static_cast<int>(w2_.rows()); }

  struct Trace {
    Vector pooled;
    Vector hidden;
    Vector output;
    int token_count = 0;
  };

  /// tokens: one token per row.
  Vector encode(const Matrix& tokens, Trace* trace = nullptr) const;
  /// Gradient w.r.t. the mean-pooled input given dL/d(output). Every token
  /// receives this divided by the token count.
  Vector backward_pooled(const Trace& trace, const Vector& grad_output) const;

  const Matrix& w1() const { return w1_; }
  const Vector& b1() const { return b1_; }
  const Matrix& w2() const { return w2_; }
  const Vector& b2() const { return b2_; }

 private:
  std::uint64_t seed_;
  Matrix w1_;
  Vector b1_;
  Matrix w2_;
  Vector b2_;
};

/// Checks M+1 tokens of width token_dim, then encodes.
Vector encode_prompt(const FrozenTextEncoder& encoder, const Matrix& tokens, int expected_tokens);

/// Class k (0-based) is drawn from Rng(derive_seed(seed, k + 1)), N(0, scale^2)
/// per coordinate. Rows are classes.
Matrix make_class_tokens(int n_classes, int token_dim, std::uint64_t seed, double scale = 1.0);

/// Test stand-in for the image encoder: mean of each cell of a grid x grid
/// partition (cell rows [i n / g, (i + 1) n / g)), then a seeded affine map to
/// embed_dim. Weights W (embed_dim x grid^2) ~ N(0, 1/grid^2), bias ~ N(0, 1),
/// drawn from Rng(seed) in that order.
class ToyImageEncoder {
 public:
  ToyImageEncoder(std::uint64_t seed, int embed_dim, int grid = 4);
  Vector encode(const ImageGrid& crop) const;
  Vector patch_means(const ImageGrid& crop) const;
  const Vector& bias() const { return bias_; }
  const Matrix& weights() const { return weights_; }

 private:
  int grid_;
  Matrix weights_;
  Vector bias_;
};

/// Precomputed per-slice image embeddings and the class token embeddings.
struct EmbeddingStore {
  int embed_dim = 0;
  int token_dim = 0;
  std::map<std::string, Matrix> slices;  // nodule_id -> rows x embed_dim
  Matrix class_tokens;                   // n_classes x token_dim

  Vector pooled(const std::string& nodule_id) const;
  int n_classes() const { return static_cast<int>(class_tokens.rows()); }
  bool operator==(const EmbeddingStore& o) const;
};

/// Manifest JSON:
///   {"d_e", "d_t", "entries": [{"nodule_id", "path", "rows", "d_e"}],
///    "class_tokens": {"path", "count", "d_t"}}   (class_tokens optional)
/// Arrays are raw little-endian float32, row-major; paths are relative to the
/// manifest. Values are stored at float32 precision.
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& manifest);

struct ClassTokenFallback {
  int n_classes = 3;
  std::uint64_t seed = 0;
  double scale = 1.0;
};

/// Validates widths, ids and class-token count. Without a class_tokens block
/// the tokens come from make_class_tokens(fallback). `expected_classes`, when
/// set, must match the class-token count.
EmbeddingStore load_embeddings(const std::filesystem::path& manifest,
                               std::optional<int> expected_classes = std::nullopt,
                               const ClassTokenFallback& fallback = {});

}  // namespace autorad
