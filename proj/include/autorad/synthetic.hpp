#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "autorad/encoders.hpp"
#include "autorad/radiomics.hpp"
#include "autorad/volume.hpp"

namespace autorad {

/// Generated cohort of precomputed inputs, built like a pretrained aligned
/// space around the frozen text encoder. Each class k has a hidden reference
/// operating point u_k = u* + shift_k in token space. At u_k the encoder's
/// prompt embeddings for all classes are computed; their normalized mean e_k
/// plus `signal_gain` times the unit class-k deviation (orthogonal to e_k) is
/// the class centre. Nodule embeddings scatter around it, slices around the
/// nodule. Radiomics rows carry a per-class offset on the first `informative`
/// columns; the rest is noise, every column on its own unit scale.
struct SyntheticCohortConfig {
  int per_class = 100;
  int n_classes = 3;
  int embed_dim = 32;
  int n_features = 1312;
  int informative = 328;
  int reference_tokens = 50;  // prompt length M used for the reference points
  int min_slices = 3;
  int max_slices = 7;
  double reference_norm = 1.5;    // |u*|
  double class_shift = 8.0;       // |shift_k|
  double signal_gain = 0.5;
  double embedding_noise = 0.9;   // norm of the per-nodule scatter
  double slice_noise = 0.2;       // norm of the per-slice scatter
  double feature_separation = 0.5;  // class offset sd in units of the noise sd
  std::uint64_t seed = 8;
};

struct SyntheticCohort {
  EmbeddingStore embeddings;
  FeatureTable features;
  std::map<std::string, int> labels;
};

/// class_tokens: n_classes x encoder.token_dim().
SyntheticCohort make_synthetic_cohort(const SyntheticCohortConfig& config, const FrozenTextEncoder& encoder,
                                      const Matrix& class_tokens);

/// Small CT-like volumes on anisotropic spacing with an ellipsoidal nodule
/// and several jittered annotator masks. Class 0 nodules are small and
/// smooth, class 2 large and heterogeneous; scores follow the class.
struct SyntheticVolumeConfig {
  int per_class = 5;
  int n_classes = 3;
  Dims3 dims{12, 40, 40};
  Vec3 spacing{2.0, 0.8, 0.8};
  int annotators = 3;
  std::uint64_t seed = 11;
};

/// Writes volumes, masks and `records.json` under `dir`; returns the records.
std::vector<NoduleRecord> write_synthetic_volumes(const SyntheticVolumeConfig& config, const std::filesystem::path& dir);

}  // namespace autorad
