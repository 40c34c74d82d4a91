#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autorad/filters.hpp"

namespace autorad {

/// Ordered (name, value) list; the order is part of the feature contract.
struct NamedVector {
  std::vector<std::string> names;
  std::vector<double> values;

  void push(std::string name, double value) {
    names.push_back(std::move(name));
    values.push_back(value);
  }
  std::size_t size() const { return values.size(); }
  /// Throws std::out_of_range for an unknown name.
  double at(std::string_view name) const;
};

enum class MatrixKind { glcm, glrlm, glszm, ngtdm, gldm };

const char* matrix_kind_name(MatrixKind k);

/// Pixel step (row, column).
struct Offset {
  int dr = 0;
  int dc = 0;
  bool operator==(const Offset&) const = default;
};

/// 2D defaults: distance 1 in four directions (E, S, SE, SW).
inline constexpr Offset kDefaultDirections[4] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};

struct TextureParams {
  Offset offset{};        // GLCM offset or GLRLM direction
  bool symmetric = true;  // GLCM
  int connectivity = 8;   // GLSZM
  int distance = 1;       // NGTDM / GLDM Chebyshev radius
  double alpha = 0.0;     // GLDM dependence tolerance
};

/// Raw counts, row a-1 for gray level a (1..n_levels).
///   GLCM   n_levels x n_levels     C[a, b]
///   GLRLM  n_levels x max run      R[a, l]    column l-1
///   GLSZM  n_levels x max zone     S[a, z]    column z-1
///   NGTDM  n_levels x 3            (n_a, p_a, s_a)
///   GLDM   n_levels x (2d+1)^2     D[a, k]    column k, k = 0..(2d+1)^2-1
struct TextureMatrix {
  MatrixKind kind = MatrixKind::glcm;
  int n_levels = 0;
  int n_cols = 0;
  std::vector<double> counts;
  TextureParams params;

  double& at(int level, int col) { return counts[static_cast<std::size_t>(level - 1) * n_cols + col]; }
  double at(int level, int col) const { return counts[static_cast<std::size_t>(level - 1) * n_cols + col]; }
  double total() const;
  /// counts / total (NGTDM: the p_a column, which already sums to 1).
  std::vector<double> normalized() const;
};

/// Counts in-ROI pairs (p, p + offset); symmetric mode adds the transpose.
/// Throws ValidationError("no valid pairs") when no pair lies inside the ROI.
TextureMatrix glcm(const DiscretizedROI& d, Offset offset, bool symmetric = true);
/// Maximal same-level runs along `direction`, truncated at the ROI boundary.
TextureMatrix glrlm(const DiscretizedROI& d, Offset direction);
/// Same-level 8-connected (or 4-connected) zones.
TextureMatrix glszm(const DiscretizedROI& d, int connectivity = 8);
/// s_a accumulates |a - mean of in-ROI neighbours within Chebyshev `distance`|;
/// pixels with no in-ROI neighbour count in n_a but add nothing to s_a.
TextureMatrix ngtdm(const DiscretizedROI& d, int distance = 1);
/// k = number of in-ROI neighbours within Chebyshev `distance` whose level
/// differs from the centre by at most alpha.
TextureMatrix gldm(const DiscretizedROI& d, double alpha = 0.0, int distance = 1);

std::span<const std::string_view> feature_names(MatrixKind kind);

/// Feature vector of one matrix, ordered as feature_names(kind).
std::vector<double> matrix_feature_values(const TextureMatrix& m);
NamedVector matrix_features(const TextureMatrix& m);
/// Mean over matrices of one kind (per-direction GLCM / GLRLM averaging).
NamedVector matrix_features(std::span<const TextureMatrix> matrices);

/// All five classes with the default parameters, ordered GLCM (24), GLRLM (16),
/// GLSZM (16), NGTDM (5), GLDM (14). Names are "<class>::<feature>". A ROI with
/// no valid GLCM pair in any direction (single pixel) uses the GLCM of a single
/// gray level, P = [[1]].
NamedVector texture_features(const DiscretizedROI& d);

inline constexpr int kTextureFeatureCount = 24 + 16 + 16 + 5 + 14;

}  // namespace autorad
