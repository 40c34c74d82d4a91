#include "autorad/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace autorad {

namespace {

struct AxisSample {
  int i0;
  int i1;
  double w;  // weight of i1
  int nearest;
};

std::vector<AxisSample> axis_samples(int n_in, double spacing, int axis) {
  if (n_in < 2 && spacing != 1.0) {
    throw ValidationError("resample_isotropic: degenerate axis " + std::to_string(axis) + " (dim " +
                          std::to_string(n_in) + ", spacing " + std::to_string(spacing) + ")");
  }
  const int n_out = std::max(1, static_cast<int>(std::lround(n_in * spacing)));
  std::vector<AxisSample> out(n_out);
  for (int k = 0; k < n_out; ++k) {
    const double u = std::min(static_cast<double>(k) / spacing, static_cast<double>(n_in - 1));
    const int i0 = std::min(static_cast<int>(std::floor(u)), n_in - 1);
    const int i1 = std::min(i0 + 1, n_in - 1);
    const int nearest = std::min(static_cast<int>(std::floor(u + 0.5)), n_in - 1);
    out[k] = {i0, i1, u - i0, nearest};
  }
  return out;
}

// a + w (b - a): exact at w = 0 and for a == b
double lerp(double a, double b, double w) { return a + w * (b - a); }

bool is_unit_spacing(const Vec3& s) { return s[0] == 1.0 && s[1] == 1.0 && s[2] == 1.0; }

}  // namespace

VoxelVolume resample_isotropic(const VoxelVolume& volume) {
  if (is_unit_spacing(volume.spacing())) return volume;
  const auto& d = volume.dims();
  const auto& s = volume.spacing();
  std::array<std::vector<AxisSample>, 3> ax;
  for (int a = 0; a < 3; ++a) ax[a] = axis_samples(d[a], s[a], a);

  const Dims3 od{static_cast<int>(ax[0].size()), static_cast<int>(ax[1].size()), static_cast<int>(ax[2].size())};
  std::vector<float> out(static_cast<std::size_t>(od[0]) * od[1] * od[2]);
  std::size_t idx = 0;
  for (const auto& sz : ax[0]) {
    for (const auto& sy : ax[1]) {
      for (const auto& sx : ax[2]) {
        auto lerp_x = [&](int z, int y) {
          return lerp(volume.at(z, y, sx.i0), volume.at(z, y, sx.i1), sx.w);
        };
        auto lerp_yx = [&](int z) { return lerp(lerp_x(z, sy.i0), lerp_x(z, sy.i1), sy.w); };
        out[idx++] = static_cast<float>(lerp(lerp_yx(sz.i0), lerp_yx(sz.i1), sz.w));
      }
    }
  }
  return VoxelVolume(od, {1.0, 1.0, 1.0}, std::move(out), volume.origin());
}

std::pair<VoxelVolume, BinaryMask> resample_isotropic(const VoxelVolume& volume, const BinaryMask& mask) {
  if (mask.dims() != volume.dims()) throw ValidationError("resample_isotropic: mask dims differ from volume dims");
  if (is_unit_spacing(volume.spacing())) return {volume, mask};
  auto image = resample_isotropic(volume);

  const auto& d = volume.dims();
  const auto& s = volume.spacing();
  std::array<std::vector<AxisSample>, 3> ax;
  for (int a = 0; a < 3; ++a) ax[a] = axis_samples(d[a], s[a], a);
  std::vector<std::uint8_t> out;
  out.reserve(image.voxel_count());
  for (const auto& sz : ax[0])
    for (const auto& sy : ax[1])
      for (const auto& sx : ax[2]) out.push_back(mask.at(sz.nearest, sy.nearest, sx.nearest) ? 1 : 0);
  BinaryMask resampled(image.dims(), std::move(out));
  return {std::move(image), std::move(resampled)};
}

VoxelVolume shift_intensities(const VoxelVolume& volume) {
  std::vector<float> out(volume.data().begin(), volume.data().end());
  for (auto& v : out) v = static_cast<float>(static_cast<double>(v) + kIntensityShift);
  return VoxelVolume(volume.dims(), volume.spacing(), std::move(out), volume.origin());
}

double equivalent_diameter(double area) { return 2.0 * std::sqrt(area / std::numbers::pi); }

CropWindow nodule_crop_window(const MaskGrid& mask_slice) {
  double sr = 0.0, sc = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < mask_slice.rows(); ++r) {
    for (int c = 0; c < mask_slice.cols(); ++c) {
      if (mask_slice(r, c)) {
        sr += r;
        sc += c;
        ++n;
      }
    }
  }
  if (n == 0) throw ValidationError("crop_nodule: empty mask");
  const int cr = static_cast<int>(std::lround(sr / static_cast<double>(n)));
  const int cc = static_cast<int>(std::lround(sc / static_cast<double>(n)));
  const int side = static_cast<int>(std::lround(2.0 * equivalent_diameter(static_cast<double>(n))));
  return {cr - side / 2, cc - side / 2, side};
}

ImageGrid crop_nodule(const ImageGrid& slice, const MaskGrid& mask_slice) {
  if (slice.rows() != mask_slice.rows() || slice.cols() != mask_slice.cols()) {
    throw ValidationError("crop_nodule: slice and mask shapes differ");
  }
  return apply_crop(slice, nodule_crop_window(mask_slice));
}

ImageGrid resize_bilinear(const ImageGrid& crop, int out_size) {
  if (out_size <= 0) throw ValidationError("resize_bilinear: out_size must be positive");
  if (crop.empty()) throw ValidationError("resize_bilinear: empty input");
  if (crop.rows() == out_size && crop.cols() == out_size) return crop;

  auto coords = [out_size](int n_in) {
    std::vector<AxisSample> v(out_size);
    for (int i = 0; i < out_size; ++i) {
      const double u = out_size == 1 ? 0.5 * (n_in - 1)
                                     : static_cast<double>(i) * (n_in - 1) / static_cast<double>(out_size - 1);
      const int i0 = std::min(static_cast<int>(std::floor(u)), n_in - 1);
      v[i] = {i0, std::min(i0 + 1, n_in - 1), u - i0, 0};
    }
    return v;
  };
  const auto rs = coords(crop.rows());
  const auto cs = coords(crop.cols());
  ImageGrid out(out_size, out_size);
  for (int i = 0; i < out_size; ++i) {
    for (int j = 0; j < out_size; ++j) {
      const auto& a = rs[i];
      const auto& b = cs[j];
      const double top = lerp(crop(a.i0, b.i0), crop(a.i0, b.i1), b.w);
      const double bot = lerp(crop(a.i1, b.i0), crop(a.i1, b.i1), b.w);
      out(i, j) = lerp(top, bot, a.w);
    }
  }
  return out;
}

}  // namespace autorad

namespace autorad {

PreparedNodule prepare_nodule(const NoduleRecord& record) {
  try {
    const auto volume = load_volume(record.volume_path);
    std::vector<BinaryMask> masks;
    for (const auto& p : record.mask_paths) masks.push_back(load_mask(p));
    for (std::size_t k = 0; k < masks.size(); ++k) {
      if (masks[k].dims() != volume.dims()) {
        throw ValidationError("mask " + std::to_string(k) + " dims differ from volume dims");
      }
    }
    const auto consensus = consensus_mask(masks);
    auto [image, mask] = resample_isotropic(volume, consensus);

    PreparedNodule out;
    out.nodule_id = record.nodule_id;
    out.image = shift_intensities(image);
    out.mask = std::move(mask);

    const int nz = out.image.dims()[0];
    const double sz = volume.spacing()[0];
    auto map_index = [&](int i) { return std::clamp(static_cast<int>(std::lround(i * sz)), 0, nz - 1); };
    if (record.slice_range.first < 0 || record.slice_range.second >= volume.dims()[0]) {
      throw ValidationError("slice_range outside the volume");
    }
    out.slice_range = {map_index(record.slice_range.first), map_index(record.slice_range.second)};
    const int mid = middle_slice(out.slice_range);
    int chosen = -1;
    for (int dist = 0; chosen < 0 && dist <= out.slice_range.second - out.slice_range.first; ++dist) {
      for (int z : {mid - dist, mid + dist}) {
        if (z >= out.slice_range.first && z <= out.slice_range.second && out.mask.slice_foreground(z) > 0) {
          chosen = z;
          break;
        }
      }
    }
    if (chosen < 0) throw ValidationError("consensus mask is empty inside the annotated slice range");
    out.middle = chosen;
    return out;
  } catch (const ValidationError& e) {
    throw ValidationError("nodule " + record.nodule_id + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("nodule " + record.nodule_id + ": " + e.what());
  }
}

}  // namespace autorad
