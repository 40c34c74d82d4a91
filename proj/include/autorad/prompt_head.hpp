#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "autorad/encoders.hpp"

namespace autorad {

/// Trainable tensors. context is M x d_t (one token per row); the MetaNet
/// maps N_r -> hidden -> d_t with a ReLU in between.
struct HeadTensors {
  Matrix context;
  Matrix w1;  // hidden x N_r
  Vector b1;
  Matrix w2;  // d_t x hidden
  Vector b2;

  static constexpr int kGroupCount = 5;
  static const char* group_name(int g);
  /// Biases are excluded from weight decay; the context counts as a weight.
  static bool group_is_bias(int g) { return g == 2 || g == 4; }
  /// Group g as a flat column-major view.
  Eigen::Map<Vector> group(int g);
  Eigen::Map<const Vector> group(int g) const;

  HeadTensors zeros_like() const;
  bool all_finite() const;
  bool operator==(const HeadTensors& o) const;
};

struct PromptHeadParams {
  HeadTensors tensors;
  double tau = 0.07;

  int context_tokens() const { return static_cast<int>(tensors.context.rows()); }
  int token_dim() const { return static_cast<int>(tensors.context.cols()); }
  int radiomics_dim() const { return static_cast<int>(tensors.w1.cols()); }
  int hidden_dim() const { return static_cast<int>(tensors.w1.rows()); }
  /// Throws ValidationError when shapes disagree, M < 1, tau <= 0 or a value
  /// is non-finite.
  void validate() const;
};

inline constexpr double kDefaultTau = 0.07;
inline constexpr double kContextInitStd = 0.02;
/// W2 starts at this fraction of the unit-variance scale so the initial
/// delta is small and prompts start close to the static ones.
inline constexpr double kMetaNetOutputInitGain = 0.1;

/// ceil(N_r / 16), at least 1.
int default_metanet_hidden(int radiomics_dim);

/// Context ~ N(0, 0.02^2) from Rng(derive_seed(seed, 1)); W1 ~ N(0, 1/N_r)
/// and W2 ~ N(0, 0.01/hidden) from Rng(derive_seed(seed, 2)); biases zero.
PromptHeadParams init_params(int context_tokens, int token_dim, int radiomics_dim, int hidden_dim, std::uint64_t seed,
                             double tau = kDefaultTau);

struct MetaNetTrace {
  Vector pre;  // W1 r + b1
  Vector hidden;
  Vector delta;
};

/// delta = W2 relu(W1 r + b1) + b2.
Vector metanet_forward(const PromptHeadParams& params, const Vector& r, MetaNetTrace* trace = nullptr);

/// [v_1 + delta, ..., v_M + delta, c_i].
Matrix assemble_prompt(const PromptHeadParams& params, const Vector& delta, const Vector& class_token);

struct PromptOutput {
  Vector delta;
  Matrix prompt_embeddings;  // N_c x d_e
  Vector similarities;
  Vector logits;  // similarities / tau
  Vector probabilities;
  int predicted() const;
};

/// Softmax with max subtraction.
Vector softmax(const Vector& logits);
/// Throws NumericError when either vector has zero norm.
double cosine_similarity(const Vector& a, const Vector& b);

/// class_tokens: N_c x d_t. r is the normalized radiomics vector.
PromptOutput classify(const PromptHeadParams& params, const Vector& image_embedding, const FrozenTextEncoder& encoder,
                      const Matrix& class_tokens, const Vector& r);

struct Batch {
  Matrix images;            // n x d_e
  Matrix radiomics;         // n x N_r (normalized)
  std::vector<int> labels;  // 0-based class index
  std::size_t size() const { return labels.size(); }
};

struct LossAndGrads {
  double loss = 0.0;
  HeadTensors grads;
};

/// Mean cross-entropy over the batch and its gradient for the context and the
/// MetaNet. Instances are accumulated in batch order.
LossAndGrads loss_and_grads(const PromptHeadParams& params, const FrozenTextEncoder& encoder,
                            const Matrix& class_tokens, const Batch& batch);
double batch_loss(const PromptHeadParams& params, const FrozenTextEncoder& encoder, const Matrix& class_tokens,
                  const Batch& batch);

/// Per-feature z-score with statistics from the rows passed to fit; zero
/// spread maps to scale 1; normalized values are clipped to [-5, 5].
class FeatureNormalizer {
 public:
  static constexpr double kClip = 5.0;

  FeatureNormalizer() = default;
  FeatureNormalizer(Vector mean, Vector scale);

  /// rows: n x N_r with n >= 1; `row_ids` is recorded for auditing.
  static FeatureNormalizer fit(const Matrix& rows, std::vector<std::string> row_ids = {});

  Vector apply(const Vector& r) const;
  Matrix apply_rows(const Matrix& rows) const;
  const Vector& mean() const { return mean_; }
  const Vector& scale() const { return scale_; }
  const std::vector<std::string>& fitted_ids() const { return fitted_ids_; }
  int size() const { return static_cast<int>(mean_.size()); }

 private:
  Vector mean_;
  Vector scale_;
  std::vector<std::string> fitted_ids_;
};

struct EncoderSpec {
  std::uint64_t seed = 0;
  int token_dim = 0;
  int hidden_dim = 0;
  int embed_dim = 0;

  FrozenTextEncoder build() const { return FrozenTextEncoder(seed, token_dim, hidden_dim, embed_dim); }
  bool operator==(const EncoderSpec&) const = default;
};

struct Checkpoint {
  PromptHeadParams params;
  FeatureNormalizer normalizer;
  EncoderSpec encoder;
  Matrix class_tokens;
  std::vector<std::string> feature_names;
  std::uint64_t seed = 0;
};

inline constexpr const char* kCheckpointFormat = "autorad-prompt-head/1";

/// `<path>` holds the JSON header; the arrays go to `<path stem>.bin` as
/// little-endian float64 in the order listed in the header.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace autorad
