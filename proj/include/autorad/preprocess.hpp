#pragma once

#include <string>
#include <utility>

#include "autorad/grid.hpp"
#include "autorad/volume.hpp"

namespace autorad {

/// Resamples to 1 mm isotropic spacing. Output dims per axis are
/// round(dim * spacing). Output sample k on an axis sits k mm from the first
/// input sample (corner-aligned grids); positions past the last input sample
/// clamp to it. Image: trilinear. Mask: nearest neighbour (ties round up).
/// An axis with dim < 2 and spacing != 1 cannot be interpolated and is rejected.
std::pair<VoxelVolume, BinaryMask> resample_isotropic(const VoxelVolume& volume, const BinaryMask& mask);

/// Image-only variant of resample_isotropic.
VoxelVolume resample_isotropic(const VoxelVolume& volume);

inline constexpr double kIntensityShift = 1000.0;

/// Adds exactly 1000 to every voxel.
VoxelVolume shift_intensities(const VoxelVolume& volume);

/// Square crop window in slice coordinates; may extend past the slice.
struct CropWindow {
  int row0 = 0;
  int col0 = 0;
  int side = 0;
};

/// 2 * sqrt(area / pi) with area in pixels (== mm^2 at 1 mm spacing).
double equivalent_diameter(double area);

/// Side round(2 * d_eq), centred on the foreground centroid rounded to the
/// nearest pixel; the window starts side/2 (integer division) before the centre.
CropWindow nodule_crop_window(const MaskGrid& mask_slice);

/// Cuts `window` out of `grid`; pixels outside the grid are zero.
template <typename T>
Grid2D<T> apply_crop(const Grid2D<T>& grid, const CropWindow& window) {
  Grid2D<T> out(window.side, window.side, T{});
  for (int r = 0; r < window.side; ++r) {
    for (int c = 0; c < window.side; ++c) {
      const int sr = window.row0 + r;
      const int sc = window.col0 + c;
      if (grid.in_bounds(sr, sc)) out(r, c) = grid(sr, sc);
    }
  }
  return out;
}

ImageGrid crop_nodule(const ImageGrid& slice, const MaskGrid& mask_slice);

/// Bilinear resize to out_size x out_size with align-corners sampling: output
/// index i maps to input coordinate i * (n_in - 1) / (out_size - 1).
ImageGrid resize_bilinear(const ImageGrid& crop, int out_size);

}  // namespace autorad

namespace autorad {

/// A nodule after the full geometric/intensity pipeline: consensus mask,
/// 1 mm resampling, +1000 shift. `middle` indexes the resampled volume.
struct PreparedNodule {
  std::string nodule_id;
  VoxelVolume image;
  BinaryMask mask;
  std::pair<int, int> slice_range{0, 0};  // resampled annotated range
  int middle = 0;
};

/// Loads volume and annotator masks, builds the consensus mask, resamples both
/// to 1 mm, shifts intensities and locates the middle slice. The annotated
/// range maps to round(index * z_spacing); if the consensus mask is empty on
/// the middle slice, the nearest non-empty slice inside the range is used
/// (lower index on ties). Errors carry the nodule id.
PreparedNodule prepare_nodule(const NoduleRecord& record);

}  // namespace autorad
