#pragma once

#include <string>
#include <utility>
#include <vector>

#include "autorad/grid.hpp"

namespace autorad {

/// Fixed-width discretization of the in-ROI pixels of one channel.
struct DiscretizedROI {
  Grid2D<int> grid;  // bin index >= 1 inside the ROI, 0 outside
  MaskGrid roi;
  int n_levels = 0;  // largest bin index present
  double min_value = 0.0;
  double bin_width = 0.0;

  std::size_t pixel_count() const { return count_foreground(roi); }
};

inline constexpr double kDefaultBinWidth = 25.0;

/// bin(x) = floor((x - min_roi) / width) + 1 over in-ROI pixels.
DiscretizedROI discretize_fixed_width(const ImageGrid& slice, const MaskGrid& roi, double width = kDefaultBinWidth);

enum class FilterKind { wavelet, log, square, squareroot, logarithm, exponential, gradient, lbp2d };

const char* filter_name(FilterKind k);
FilterKind filter_from_name(const std::string& name);

struct FilterConfig {
  /// Laplacian-of-Gaussian scales in mm (== pixels after resampling).
  std::vector<double> log_sigmas{1.0, 2.0, 3.0};
  /// Enabled Haar sub-bands, drawn from {"LL", "LH", "HL", "HH"}.
  std::vector<std::string> wavelet_subbands{"LL", "LH", "HL", "HH"};

  bool operator==(const FilterConfig&) const = default;
};

struct FilterBankOutput {
  std::string name;
  std::vector<std::pair<std::string, ImageGrid>> channels;
};

// Filter conventions (M = max |x| over the input grid):
//   wavelet      undecimated single-level Haar, low = (a + b) / 2, high = (a - b) / 2
//                where b is the next sample; sub-band name "XY" is X along columns,
//                Y along rows
//   log          scale-normalised Laplacian of Gaussian (kernel * sigma^2), truncated
//                at radius ceil(4 sigma), re-centred to zero sum
//   square       (x / sqrt(M))^2
//   squareroot   sign(x) sqrt(M |x|)
//   logarithm    sign(x) log(|x| + 1), rescaled so the max magnitude equals M
//   exponential  exp(x log(M) / M); exp(0) = 1 everywhere when M = 0
//   gradient     |(d/dy, d/dx)| with central differences (unit spacing)
//   lbp2d        8 neighbours at radius 1 (no interpolation), rotation-invariant
//                uniform codes 0..8, non-uniform patterns -> 9
// Borders use symmetric padding (edge sample repeated: x[-1] = x[0]).
FilterBankOutput apply_filter(const ImageGrid& slice, FilterKind filter, const FilterConfig& config = {});

/// Ordered channel names: original, wavelet sub-bands, log sigmas, square,
/// squareroot, logarithm, exponential, gradient, lbp2d.
std::vector<std::string> list_filter_channels(const FilterConfig& config = {});

/// Every channel of list_filter_channels(config), same order, same dims as `slice`.
std::vector<std::pair<std::string, ImageGrid>> apply_filter_bank(const ImageGrid& slice,
                                                                 const FilterConfig& config = {});

inline constexpr int kLbpCodeCount = 10;  // codes 0..9

/// Symmetric-padding index for any integer i and length n >= 1.
int reflect_index(int i, int n);

std::string sigma_label(double sigma);

}  // namespace autorad
