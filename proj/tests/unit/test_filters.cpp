#include <doctest.h>

#include <cmath>

#include "autorad/filters.hpp"
#include "radiomics_oracle.hpp"
#include "support.hpp"

using namespace autorad;
using testsupport::Gen;

namespace {

oracle::Image to_oracle(const ImageGrid& g) {
  return {g.rows(), g.cols(), std::vector<double>(g.values().begin(), g.values().end())};
}

}  // namespace

TEST_CASE("fixed-width discretization examples") {
  ImageGrid img(1, 4, std::vector<double>{0, 24, 25, 74});
  MaskGrid roi(1, 4, 1);
  const auto d = discretize_fixed_width(img, roi, 25.0);
  CHECK(d.grid(0, 0) == 1);
  CHECK(d.grid(0, 1) == 1);
  CHECK(d.grid(0, 2) == 2);
  CHECK(d.grid(0, 3) == 3);
  CHECK(d.n_levels == 3);

  const auto c = discretize_fixed_width(ImageGrid(3, 3, 42.0), MaskGrid(3, 3, 1));
  CHECK(c.n_levels == 1);
  for (int v : c.grid.values()) CHECK(v == 1);

  CHECK_THROWS_AS(discretize_fixed_width(img, MaskGrid(1, 4, 0)), ValidationError);
  CHECK_THROWS_AS(discretize_fixed_width(img, roi, 0.0), ValidationError);
}

TEST_CASE("discretization is shift-invariant and ignores pixels outside the ROI") {
  Gen g(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = g.integer(1, 12), cols = g.integer(1, 12);
    ImageGrid img(rows, cols);
    for (auto& v : img.values()) v = g.real(-1000, 800);
    const auto roi = testsupport::random_roi(g, rows, cols, 0.6);
    const auto d = discretize_fixed_width(img, roi);
    // integer-valued copy so that +1000 is exact
    ImageGrid ints = img;
    for (auto& v : ints.values()) v = std::round(v);
    ImageGrid ints_shift = ints;
    for (auto& v : ints_shift.values()) v += 1000.0;
    CHECK(discretize_fixed_width(ints, roi).grid == discretize_fixed_width(ints_shift, roi).grid);

    double lo = INFINITY, hi = -INFINITY;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        if (!roi(r, c)) {
          CHECK(d.grid(r, c) == 0);
          continue;
        }
        lo = std::min(lo, img(r, c));
        hi = std::max(hi, img(r, c));
        CHECK(d.grid(r, c) >= 1);
        CHECK(d.grid(r, c) <= d.n_levels);
      }
    CHECK(d.n_levels == static_cast<int>(std::floor((hi - lo) / 25.0)) + 1);
  }
}

TEST_CASE("filters on a constant slice") {
  const ImageGrid flat(9, 9, 130.0);
  for (const auto& [name, ch] : apply_filter(flat, FilterKind::log).channels)
    for (double v : ch.values()) CHECK(v == 0.0);
  const auto grad = apply_filter(flat, FilterKind::gradient);
  for (double v : grad.channels[0].second.values()) CHECK(v == 0.0);
  const auto lbp = apply_filter(flat, FilterKind::lbp2d).channels[0].second;
  for (int r = 1; r < 8; ++r)
    for (int c = 1; c < 8; ++c) CHECK(lbp(r, c) == lbp(1, 1));

  const auto w = apply_filter(flat, FilterKind::wavelet).channels;
  REQUIRE(w.size() == 4);
  for (double v : w[0].second.values()) CHECK(v == 130.0);
  for (int b = 1; b < 4; ++b)
    for (double v : w[b].second.values()) CHECK(v == 0.0);
}

TEST_CASE("channel list") {
  const auto names = list_filter_channels();
  REQUIRE(names.size() == 14);
  CHECK(names.front() == "original");
  int wavelets = 0;
  for (const auto& n : names) wavelets += n.rfind("wavelet-", 0) == 0;
  CHECK(wavelets == 4);
  const std::vector<std::string> expected{"original",    "wavelet-LL",  "wavelet-LH", "wavelet-HL", "wavelet-HH",
                                          "log-sigma-1", "log-sigma-2", "log-sigma-3", "square",   "squareroot",
                                          "logarithm",   "exponential", "gradient",   "lbp2d"};
  CHECK(names == expected);
  CHECK(list_filter_channels() == names);
  FilterConfig cfg;
  cfg.log_sigmas = {1.5};
  cfg.wavelet_subbands = {"HH"};
  CHECK(list_filter_channels(cfg).size() == 9);
  CHECK_THROWS_AS(filter_from_name("sobel"), ValidationError);
}

TEST_CASE("LBP codes stay in range") {
  Gen g(8);
  for (int trial = 0; trial < 20; ++trial) {
    ImageGrid img(g.integer(1, 10), g.integer(1, 10));
    for (auto& v : img.values()) v = g.integer(0, 4);
    const auto lbp = apply_filter(img, FilterKind::lbp2d);
    for (double v : lbp.channels[0].second.values()) {
      CHECK(v >= 0.0);
      CHECK(v < kLbpCodeCount);
      CHECK(v == std::floor(v));
    }
  }
}

TEST_CASE("scaled filters keep the input range") {
  Gen g(12);
  for (int trial = 0; trial < 20; ++trial) {
    ImageGrid img(6, 6);
    for (auto& v : img.values()) v = g.real(-300, 1500);
    double m = 0.0;
    for (double v : img.values()) m = std::max(m, std::fabs(v));
    for (auto k : {FilterKind::square, FilterKind::squareroot, FilterKind::logarithm, FilterKind::exponential}) {
      const auto out = apply_filter(img, k);
      for (double v : out.channels[0].second.values()) CHECK(std::fabs(v) <= m * (1 + 1e-12));
    }
  }
}

TEST_CASE("filter bank matches the reference implementation") {
  Gen g(31);
  for (int trial = 0; trial < 8; ++trial) {
    ImageGrid img(g.integer(1, 14), g.integer(1, 14));
    for (auto& v : img.values()) v = g.integer(-200, 1400);
    const auto lib = apply_filter_bank(img);
    const auto ref = oracle::filter_bank(to_oracle(img));
    REQUIRE(lib.size() == ref.size());
    for (std::size_t k = 0; k < lib.size(); ++k) {
      const auto& a = lib[k].second;
      const auto& b = ref[k].second;
      REQUIRE(a.size() == b.v.size());
      double scale = 1.0;
      for (double v : b.v) scale = std::max(scale, std::fabs(v));
      for (std::size_t i = 0; i < a.size(); ++i) {
        INFO("channel " << lib[k].first << " index " << i);
        CHECK(std::fabs(a.values()[i] - b.v[i]) <= 1e-12 * scale);
      }
    }
  }
}

TEST_CASE("reflect index") {
  CHECK(reflect_index(-1, 5) == 0);
  CHECK(reflect_index(-2, 5) == 1);
  CHECK(reflect_index(5, 5) == 4);
  CHECK(reflect_index(6, 5) == 3);
  CHECK(reflect_index(-3, 1) == 0);
  CHECK(reflect_index(12, 3) == 0);
}
