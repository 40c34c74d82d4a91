#pragma once

// Straightforward re-derivations of the first-order, shape and filter-bank
// computations, used to check the library's full feature vector.

#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  // mirror padding: index -1 maps to 0, n maps to n-1
  double mirrored(int r, int c) const;
};

std::vector<double> firstorder(const Image& img, const std::vector<int>& roi, double bin_width);
std::vector<double> shape(int rows, int cols, const std::vector<int>& roi);

// The 14 default channels in bank order (original, wavelet LL/LH/HL/HH,
// LoG sigma 1/2/3, square, squareroot, logarithm, exponential, gradient, lbp2d).
std::vector<std::pair<std::string, Image>> filter_bank(const Image& img);

// Full per-slice vector: shape on the whole ROI, then per channel first-order
// plus texture over the ROI bounding box grown by 13 pixels.
std::vector<double> extract(const Image& img, const std::vector<int>& roi, double bin_width);

}  // namespace oracle
