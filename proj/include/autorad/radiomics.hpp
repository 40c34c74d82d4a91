#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "autorad/filters.hpp"
#include "autorad/texture.hpp"
#include "autorad/volume.hpp"

namespace autorad {

inline constexpr int kFirstOrderFeatureCount = 18;
inline constexpr int kShapeFeatureCount = 10;

/// Intensity statistics over in-ROI pixels. Entropy and uniformity use
/// fixed-width bins; percentiles interpolate linearly between order
/// statistics; skewness and kurtosis are 0 for a zero-variance ROI.
/// `pixel_volume` (mm^3) scales TotalEnergy.
NamedVector firstorder_features(const ImageGrid& slice, const MaskGrid& roi, double bin_width = kDefaultBinWidth,
                                double pixel_volume = 1.0);

/// 2D shape descriptors of the ROI at 1 mm pixel spacing:
/// PixelSurface (pixel count), Perimeter (exposed pixel edges), ratio,
/// Sphericity 2 sqrt(pi A) / P, EquivalentDiameter, Major/MinorAxisLength
/// (4 sqrt of the coordinate-covariance eigenvalues), Elongation
/// sqrt(minor/major eigenvalue; 1 when both are 0), MaximumDiameter (largest
/// distance between pixel corners), Extent (area / bounding-box area).
NamedVector shape2d_features(const MaskGrid& roi);

struct ExtractionConfig {
  double bin_width = kDefaultBinWidth;
  FilterConfig filters;

  bool operator==(const ExtractionConfig&) const = default;
};

/// How a feature responds when every intensity is shifted by a constant.
enum class ShiftBehavior { invariant, translates, varies, not_applicable };
const char* shift_behavior_name(ShiftBehavior b);

struct ManifestEntry {
  std::string channel;
  std::string feature_class;
  std::string feature;
  std::string parameters;
  ShiftBehavior shift = ShiftBehavior::not_applicable;

  std::string name() const { return channel + "::" + feature_class + "::" + feature; }
};

struct FeatureManifest {
  std::string version;
  ExtractionConfig config;
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::vector<std::string> names() const;
};

inline constexpr const char* kManifestVersion = "autorad-features/1";

/// Order: original shape2D, then per channel (list_filter_channels order)
/// firstorder, glcm, glrlm, glszm, ngtdm, gldm.
FeatureManifest build_manifest(const ExtractionConfig& config = {});

void write_manifest(const FeatureManifest& m, const std::filesystem::path& path);
FeatureManifest read_manifest(const std::filesystem::path& path);

struct RadiomicsVector {
  std::string nodule_id;
  std::vector<std::string> names;
  std::vector<double> values;
};

/// Features of one prepared slice. Filters run on the ROI bounding box grown
/// by ceil(4 * max sigma) + 1 pixels (clipped to the slice), so every ROI
/// pixel sees its full kernel support; global filter normalisers are taken
/// over that region.
RadiomicsVector extract_slice(const std::string& nodule_id, const ImageGrid& slice, const MaskGrid& roi,
                              const ExtractionConfig& config = {});

/// Full pipeline for one record (prepare_nodule then extract_slice on the
/// middle slice). Errors carry the nodule id.
RadiomicsVector extract_all(const NoduleRecord& record, const ExtractionConfig& config = {});

struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;

  /// Row index of `id`; throws ValidationError when absent.
  std::size_t row_of(const std::string& id) const;
};

/// CSV: header `nodule_id,<names>`, rows sorted by nodule_id, values printed
/// with %.17g. Also writes `<stem>.manifest.json` next to the table.
void write_feature_table(std::span<const RadiomicsVector> vectors, const FeatureManifest& manifest,
                         const std::filesystem::path& path);
FeatureTable read_feature_table(const std::filesystem::path& path);
std::string format_feature_table(const FeatureTable& table);

std::filesystem::path manifest_path_for(const std::filesystem::path& table_path);

}  // namespace autorad
