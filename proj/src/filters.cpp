#include "autorad/filters.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace autorad {

DiscretizedROI discretize_fixed_width(const ImageGrid& slice, const MaskGrid& roi, double width) {
  if (!(width > 0.0)) throw ValidationError("discretize_fixed_width: width must be positive");
  if (slice.rows() != roi.rows() || slice.cols() != roi.cols()) {
    throw ValidationError("discretize_fixed_width: slice and ROI shapes differ");
  }
  double lo = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < roi.size(); ++i) {
    if (!roi.values()[i]) continue;
    const double v = slice.values()[i];
    if (!std::isfinite(v)) throw ValidationError("discretize_fixed_width: non-finite in-ROI value");
    lo = any ? std::min(lo, v) : v;
    any = true;
  }
  if (!any) throw ValidationError("discretize_fixed_width: empty ROI");

  DiscretizedROI d;
  d.grid = Grid2D<int>(slice.rows(), slice.cols(), 0);
  d.roi = roi;
  d.min_value = lo;
  d.bin_width = width;
  for (std::size_t i = 0; i < roi.size(); ++i) {
    if (!roi.values()[i]) continue;
    const int bin = static_cast<int>(std::floor((slice.values()[i] - lo) / width)) + 1;
    d.grid.values()[i] = bin;
    d.n_levels = std::max(d.n_levels, bin);
  }
  return d;
}

const char* filter_name(FilterKind k) {
  switch (k) {
    case FilterKind::wavelet: return "wavelet";
    case FilterKind::log: return "log";
    case FilterKind::square: return "square";
    case FilterKind::squareroot: return "squareroot";
    case FilterKind::logarithm: return "logarithm";
    case FilterKind::exponential: return "exponential";
    case FilterKind::gradient: return "gradient";
    case FilterKind::lbp2d: return "lbp2d";
  }
  return "?";
}

FilterKind filter_from_name(const std::string& name) {
  for (auto k : {FilterKind::wavelet, FilterKind::log, FilterKind::square, FilterKind::squareroot,
                 FilterKind::logarithm, FilterKind::exponential, FilterKind::gradient, FilterKind::lbp2d}) {
    if (name == filter_name(k)) return k;
  }
  throw ValidationError("unknown filter identifier '" + name + "'");
}

int reflect_index(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

std::string sigma_label(double sigma) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", sigma);
  return buf;
}

namespace {

double max_abs(const ImageGrid& g) {
  double m = 0.0;
  for (double v : g.values()) m = std::max(m, std::abs(v));
  return m;
}

double sample(const ImageGrid& g, int r, int c) { return g(reflect_index(r, g.rows()), reflect_index(c, g.cols())); }

ImageGrid map_values(const ImageGrid& g, auto&& fn) {
  ImageGrid out = g;
  for (auto& v : out.values()) v = fn(v);
  return out;
}

// Haar step along one axis: low = (a + b) / 2, high = (a - b) / 2 with b the
// next sample (mirror-padded).
ImageGrid haar_pass(const ImageGrid& g, bool along_cols, bool high) {
  ImageGrid out(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) {
      const double a = g(r, c);
      const double b = along_cols ? sample(g, r, c + 1) : sample(g, r + 1, c);
      out(r, c) = high ? (a - b) / 2.0 : (a + b) / 2.0;
    }
  }
  return out;
}

std::vector<std::pair<std::string, ImageGrid>> wavelet_channels(const ImageGrid& g, const FilterConfig& cfg) {
  std::vector<std::pair<std::string, ImageGrid>> out;
  for (const auto& band : {"LL", "LH", "HL", "HH"}) {
    if (std::find(cfg.wavelet_subbands.begin(), cfg.wavelet_subbands.end(), band) == cfg.wavelet_subbands.end()) {
      continue;
    }
    const bool x_high = band[0] == 'H';
    const bool y_high = band[1] == 'H';
    out.emplace_back(std::string("wavelet-") + band, haar_pass(haar_pass(g, true, x_high), false, y_high));
  }
  return out;
}

ImageGrid laplacian_of_gaussian(const ImageGrid& g, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("log filter: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  const int side = 2 * radius + 1;
  std::vector<double> kernel(static_cast<std::size_t>(side) * side);
  const double s2 = sigma * sigma;
  double sum = 0.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const double q = (dx * dx + dy * dy) / (2.0 * s2);
      const double k = -(1.0 / (std::numbers::pi * s2)) * (1.0 - q) * std::exp(-q);
      kernel[(dy + radius) * side + dx + radius] = k;
      sum += k;
    }
  }
  const double mean = sum / static_cast<double>(kernel.size());
  for (auto& k : kernel) k -= mean;

  // sum_k w_k (x_k - x_centre) equals the zero-sum convolution and is exactly 0
  // on flat neighbourhoods.
  ImageGrid out(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) {
      const double centre = g(r, c);
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          acc += kernel[(dy + radius) * side + dx + radius] * (sample(g, r + dy, c + dx) - centre);
      out(r, c) = acc;
    }
  }
  return out;
}

ImageGrid gradient_magnitude(const ImageGrid& g) {
  ImageGrid out(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) {
      const double gy = (sample(g, r + 1, c) - sample(g, r - 1, c)) / 2.0;
      const double gx = (sample(g, r, c + 1) - sample(g, r, c - 1)) / 2.0;
      out(r, c) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

// Neighbours in circular (counter-clockwise) order starting east.
constexpr std::array<std::array<int, 2>, 8> kLbpRing{{{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}}};

ImageGrid local_binary_pattern(const ImageGrid& g) {
  ImageGrid out(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) {
      const double centre = g(r, c);
      std::array<int, 8> bits{};
      for (int p = 0; p < 8; ++p) bits[p] = sample(g, r + kLbpRing[p][0], c + kLbpRing[p][1]) >= centre ? 1 : 0;
      int transitions = 0;
      int ones = 0;
      for (int p = 0; p < 8; ++p) {
        transitions += bits[p] != bits[(p + 1) % 8];
        ones += bits[p];
      }
      out(r, c) = transitions <= 2 ? ones : 9;
    }
  }
  return out;
}

}  // namespace

FilterBankOutput apply_filter(const ImageGrid& slice, FilterKind filter, const FilterConfig& config) {
  if (slice.empty()) throw ValidationError("apply_filter: empty slice");
  FilterBankOutput out;
  out.name = filter_name(filter);
  const double m = max_abs(slice);
  switch (filter) {
    case FilterKind::wavelet:
      out.channels = wavelet_channels(slice, config);
      break;
    case FilterKind::log:
      for (double s : config.log_sigmas) {
        out.channels.emplace_back("log-sigma-" + sigma_label(s), laplacian_of_gaussian(slice, s));
      }
      break;
    case FilterKind::square: {
      const double c = m > 0.0 ? 1.0 / std::sqrt(m) : 1.0;
      out.channels.emplace_back("square", map_values(slice, [c](double x) { return (c * x) * (c * x); }));
      break;
    }
    case FilterKind::squareroot:
      out.channels.emplace_back("squareroot", map_values(slice, [m](double x) {
                                  return x >= 0.0 ? std::sqrt(m * x) : -std::sqrt(-m * x);
                                }));
      break;
    case FilterKind::logarithm: {
      auto l = map_values(slice, [](double x) { return x >= 0.0 ? std::log1p(x) : -std::log1p(-x); });
      const double lm = max_abs(l);
      if (lm > 0.0) {
        const double scale = m / lm;
        for (auto& v : l.values()) v *= scale;
      }
      out.channels.emplace_back("logarithm", std::move(l));
      break;
    }
    case FilterKind::exponential: {
      const double c = m > 0.0 ? std::log(m) / m : 0.0;
      out.channels.emplace_back("exponential", map_values(slice, [c](double x) { return std::exp(c * x); }));
      break;
    }
    case FilterKind::gradient:
      out.channels.emplace_back("gradient", gradient_magnitude(slice));
      break;
    case FilterKind::lbp2d:
      out.channels.emplace_back("lbp2d", local_binary_pattern(slice));
      break;
  }
  return out;
}

namespace {
constexpr std::array kBankOrder{FilterKind::wavelet,     FilterKind::log,       FilterKind::square,
                                FilterKind::squareroot,  FilterKind::logarithm, FilterKind::exponential,
                                FilterKind::gradient,    FilterKind::lbp2d};
}

std::vector<std::string> list_filter_channels(const FilterConfig& config) {
  std::vector<std::string> names{"original"};
  for (const auto& band : {"LL", "LH", "HL", "HH"}) {
    if (std::find(config.wavelet_subbands.begin(), config.wavelet_subbands.end(), band) !=
        config.wavelet_subbands.end()) {
      names.push_back(std::string("wavelet-") + band);
    }
  }
  for (double s : config.log_sigmas) names.push_back("log-sigma-" + sigma_label(s));
  for (auto k : kBankOrder) {
    if (k != FilterKind::wavelet && k != FilterKind::log) names.emplace_back(filter_name(k));
  }
  return names;
}

std::vector<std::pair<std::string, ImageGrid>> apply_filter_bank(const ImageGrid& slice, const FilterConfig& config) {
  std::vector<std::pair<std::string, ImageGrid>> out;
  out.emplace_back("original", slice);
  for (auto k : kBankOrder) {
    auto bank = apply_filter(slice, k, config);
    for (auto& ch : bank.channels) out.push_back(std::move(ch));
  }
  return out;
}

}  // namespace autorad
