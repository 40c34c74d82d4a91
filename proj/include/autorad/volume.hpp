#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "autorad/grid.hpp"

namespace autorad {

/// Axis order everywhere is (z, y, x) = (slice, row, column); storage is C-order,
/// so x varies fastest. Spacing and origin use the same axis order.
using Dims3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

class VoxelVolume {
 public:
  VoxelVolume() = default;
  /// Throws ValidationError on dims/length mismatch, non-positive spacing or
  /// non-finite values (the message names the first offending index).
  VoxelVolume(Dims3 dims, Vec3 spacing, std::vector<float> data, Vec3 origin = {0.0, 0.0, 0.0});

  const Dims3& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  std::span<const float> data() const { return data_; }
  std::size_t voxel_count() const { return data_.size(); }

  std::size_t index(int z, int y, int x) const {
    return (static_cast<std::size_t>(z) * dims_[1] + y) * dims_[2] + x;
  }
  float at(int z, int y, int x) const { return data_[index(z, y, x)]; }

  /// Copies slice z into a double grid (rows = y, cols = x).
  ImageGrid slice(int z) const;

  bool operator==(const VoxelVolume&) const = default;

 private:
  Dims3 dims_{0, 0, 0};
  Vec3 spacing_{1.0, 1.0, 1.0};
  Vec3 origin_{0.0, 0.0, 0.0};
  std::vector<float> data_;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(Dims3 dims, std::vector<std::uint8_t> data);

  const Dims3& dims() const { return dims_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::size_t index(int z, int y, int x) const {
    return (static_cast<std::size_t>(z) * dims_[1] + y) * dims_[2] + x;
  }
  bool at(int z, int y, int x) const { return data_[index(z, y, x)] != 0; }
  std::size_t foreground_count() const;
  /// Foreground voxel count of slice z.
  std::size_t slice_foreground(int z) const;
  MaskGrid slice(int z) const;

  bool operator==(const BinaryMask&) const = default;

 private:
  Dims3 dims_{0, 0, 0};
  std::vector<std::uint8_t> data_;  // 0 or 1
};

enum class Label : int { benign = 0, unsure = 1, malignant = 2 };
inline constexpr int kNumClasses = 3;

const char* label_name(Label l);
Label label_from_name(const std::string& name);

/// Mean score < 2.5 -> benign, > 3.5 -> malignant, otherwise unsure.
/// Every score must lie in [1, 5].
Label derive_label(std::span<const double> scores);

/// Voxel is foreground iff at least half of the annotators marked it.
BinaryMask consensus_mask(std::span<const BinaryMask> annotator_masks);

/// floor((first + last) / 2).
int middle_slice(std::pair<int, int> slice_range);

struct NoduleRecord {
  std::string nodule_id;
  std::filesystem::path volume_path;
  std::vector<std::filesystem::path> mask_paths;
  std::vector<double> scores;
  std::pair<int, int> slice_range{0, 0};
  Label label = Label::unsure;
};

// Volume container: `<name>.json` header + `<name>.raw` little-endian payload
// in C-order. Header keys: dims, spacing, origin, dtype ("float32" | "uint8"),
// endianness ("little"), data_file (relative to the header).
void save_volume(const VoxelVolume& v, const std::filesystem::path& header_path);
VoxelVolume load_volume(const std::filesystem::path& header_path);
void save_mask(const BinaryMask& m, const std::filesystem::path& header_path, const Vec3& spacing = {1, 1, 1});
/// Accepts uint8 or float32 payloads; any non-zero value is foreground.
BinaryMask load_mask(const std::filesystem::path& header_path);

/// Nodule metadata: JSON array of {nodule_id, volume_path, mask_paths[], scores[],
/// slice_range[2]}. Relative paths resolve against the metadata file's directory.
std::vector<NoduleRecord> load_nodule_records(const std::filesystem::path& path);
void save_nodule_records(std::span<const NoduleRecord> records, const std::filesystem::path& path);

/// CSV with header `nodule_id,annotator,score`; returns scores grouped by id in
/// file order of annotators.
std::map<std::string, std::vector<double>> load_scores_csv(const std::filesystem::path& path);

}  // namespace autorad
