#include <doctest.h>

#include <cmath>
#include <set>

#include "autorad/preprocess.hpp"
#include "autorad/synthetic.hpp"
#include "support.hpp"

using namespace autorad;
using testsupport::Gen;

namespace {

// Trilinear value at physical position (mm) p, clamped to the last sample.
double trilinear_at(const VoxelVolume& v, const std::array<double, 3>& p) {
  std::array<int, 3> lo{}, hi{};
  std::array<double, 3> t{};
  for (int a = 0; a < 3; ++a) {
    const double u = std::min(p[a] / v.spacing()[a], v.dims()[a] - 1.0);
    lo[a] = static_cast<int>(std::floor(u));
    hi[a] = std::min(lo[a] + 1, v.dims()[a] - 1);
    t[a] = u - lo[a];
  }
  double acc = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    std::array<int, 3> idx{};
    for (int a = 0; a < 3; ++a) {
      const bool up = (corner >> a) & 1;
      w *= up ? t[a] : 1.0 - t[a];
      idx[a] = up ? hi[a] : lo[a];
    }
    acc += w * v.at(idx[0], idx[1], idx[2]);
  }
  return acc;
}

VoxelVolume random_volume(Gen& g, Dims3 dims, Vec3 spacing) {
  std::vector<float> d(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (auto& x : d) x = static_cast<float>(g.integer(-1000, 400));
  return VoxelVolume(dims, spacing, d);
}

}  // namespace

TEST_CASE("1D resampling of [0, 10] at 2 mm") {
  VoxelVolume v({1, 1, 2}, {1, 1, 2}, {0.0f, 10.0f});
  const auto out = resample_isotropic(v);
  REQUIRE(out.dims() == Dims3{1, 1, 4});  // round(2 * 2)
  CHECK(out.at(0, 0, 0) == 0.0f);
  CHECK(out.at(0, 0, 1) == 5.0f);
  CHECK(out.at(0, 0, 2) == 10.0f);
  CHECK(out.at(0, 0, 3) == 10.0f);  // past the last sample: clamped
  CHECK(out.spacing() == Vec3{1, 1, 1});
}

TEST_CASE("unit spacing is returned unchanged") {
  Gen g(1);
  const auto v = random_volume(g, {3, 4, 5}, {1, 1, 1});
  const BinaryMask m({3, 4, 5}, std::vector<std::uint8_t>(60, 1));
  const auto [img, mask] = resample_isotropic(v, m);
  CHECK(img == v);
  CHECK(mask == m);
}

TEST_CASE("degenerate axis is rejected with its index") {
  VoxelVolume v({1, 2, 2}, {2, 1, 1}, std::vector<float>(4, 0.0f));
  try {
    resample_isotropic(v);
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("axis 0") != std::string::npos);
  }
}

TEST_CASE("resampling matches a direct trilinear evaluation") {
  Gen g(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Dims3 dims{g.integer(2, 4), g.integer(2, 6), g.integer(2, 6)};
    const Vec3 sp{g.real(0.5, 2.5), g.real(0.5, 2.5), g.real(0.5, 2.5)};
    const auto v = random_volume(g, dims, sp);
    const auto out = resample_isotropic(v);
    for (int a = 0; a < 3; ++a) CHECK(out.dims()[a] == std::max(1, static_cast<int>(std::lround(dims[a] * sp[a]))));
    for (int z = 0; z < out.dims()[0]; ++z)
      for (int y = 0; y < out.dims()[1]; ++y)
        for (int x = 0; x < out.dims()[2]; ++x) {
          const double ref = trilinear_at(v, {double(z), double(y), double(x)});
          CHECK(out.at(z, y, x) == doctest::Approx(ref).epsilon(1e-6));
        }
  }
}

TEST_CASE("resampled masks stay binary and resampling is idempotent at 1 mm") {
  Gen g(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Dims3 dims{g.integer(2, 4), g.integer(2, 5), g.integer(2, 5)};
    const auto v = random_volume(g, dims, {2, 0.7, 1.3});
    std::vector<std::uint8_t> md(v.voxel_count());
    for (auto& b : md) b = g.coin(0.5);
    const auto [img, mask] = resample_isotropic(v, BinaryMask(dims, md));
    std::set<int> labels(mask.data().begin(), mask.data().end());
    for (int l : labels) CHECK((l == 0 || l == 1));
    const auto [img2, mask2] = resample_isotropic(img, mask);
    CHECK(img2 == img);
    CHECK(mask2 == mask);
  }
}

TEST_CASE("intensity shift") {
  VoxelVolume v({1, 1, 3}, {1, 1, 1}, {-500.0f, 0.0f, 12.5f});
  const auto s = shift_intensities(v);
  CHECK(s.at(0, 0, 0) == 500.0f);
  CHECK(s.at(0, 0, 1) == 1000.0f);
  for (int x = 0; x < 3; ++x) CHECK(s.at(0, 0, x) - 1000.0f == v.at(0, 0, x));
}

TEST_CASE("crop sizes") {
  CHECK(equivalent_diameter(std::numbers::pi) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(equivalent_diameter(100.0) == doctest::Approx(11.284).epsilon(1e-4));

  MaskGrid m(20, 20, 0);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) m(r + 5, c + 5) = 1;
  CHECK(nodule_crop_window(m).side == 23);

  MaskGrid one(16, 16, 0);
  one(5, 5) = 1;
  const auto w = nodule_crop_window(one);
  CHECK(w.side == 2);
  CHECK(w.row0 == 4);
  CHECK(w.col0 == 4);
  ImageGrid img(16, 16, 0.0);
  img(5, 5) = 3.0;
  const auto crop = crop_nodule(img, one);
  CHECK(crop.rows() == 2);
  CHECK(crop(1, 1) == 3.0);

  CHECK_THROWS_AS(crop_nodule(img, MaskGrid(16, 16, 0)), ValidationError);
}

TEST_CASE("crop pads outside the slice with zeros") {
  ImageGrid img(8, 8, 7.0);
  MaskGrid m(8, 8, 0);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = 1;
  const auto crop = crop_nodule(img, m);
  const auto w = nodule_crop_window(m);
  REQUIRE(w.row0 < 0);
  for (int r = 0; r < crop.rows(); ++r)
    for (int c = 0; c < crop.cols(); ++c)
      CHECK(crop(r, c) == (img.in_bounds(w.row0 + r, w.col0 + c) ? 7.0 : 0.0));
}

TEST_CASE("crop is translation-equivariant") {
  Gen g(13);
  for (int trial = 0; trial < 20; ++trial) {
    ImageGrid img(40, 40, 0.0);
    for (auto& v : img.values()) v = g.integer(0, 100);
    MaskGrid m(40, 40, 0);
    const int r0 = g.integer(12, 16), c0 = g.integer(12, 16);
    const int h = g.integer(1, 5), w = g.integer(1, 5);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) m(r0 + r, c0 + c) = 1;
    const int dr = g.integer(-4, 4), dc = g.integer(-4, 4);
    ImageGrid img2(40, 40, 0.0);
    MaskGrid m2(40, 40, 0);
    for (int r = 0; r < 40; ++r)
      for (int c = 0; c < 40; ++c)
        if (img.in_bounds(r - dr, c - dc)) {
          img2(r, c) = img(r - dr, c - dc);
          m2(r, c) = m(r - dr, c - dc);
        }
    CHECK(crop_nodule(img, m) == crop_nodule(img2, m2));
  }
}

TEST_CASE("bilinear resize") {
  ImageGrid seven(5, 3, 7.0);
  const auto big = resize_bilinear(seven, 224);
  for (double v : big.values()) CHECK(v == 7.0);

  ImageGrid id(224, 224, 0.0);
  Gen g(2);
  for (auto& v : id.values()) v = g.normal();
  CHECK(resize_bilinear(id, 224) == id);

  ImageGrid two(2, 2, std::vector<double>{0, 10, 0, 10});
  const auto three = resize_bilinear(two, 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(three(r, 0) == 0.0);
    CHECK(three(r, 1) == 5.0);
    CHECK(three(r, 2) == 10.0);
  }
  CHECK_THROWS_AS(resize_bilinear(two, 0), ValidationError);
}

TEST_CASE("shift commutes with crop and resize") {
  Gen g(21);
  for (int trial = 0; trial < 10; ++trial) {
    ImageGrid img(24, 24, 0.0);
    for (auto& v : img.values()) v = g.integer(-1000, 400);
    MaskGrid m(24, 24, 0);
    const int h = g.integer(1, 6), wd = g.integer(1, 6);
    for (int r = 8; r < 8 + h; ++r)
      for (int c = 9; c < 9 + wd; ++c) m(r, c) = 1;
    ImageGrid shifted = img;
    for (auto& v : shifted.values()) v += 1000.0;

    // crop of the shifted slice == shifted crop inside the slice
    const auto w = nodule_crop_window(m);
    const auto a = crop_nodule(shifted, m);
    const auto b = crop_nodule(img, m);
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < a.cols(); ++c)
        if (img.in_bounds(w.row0 + r, w.col0 + c)) CHECK(a(r, c) == b(r, c) + 1000.0);

    ImageGrid bs = b;
    for (auto& v : bs.values()) v += 1000.0;
    const auto ra = resize_bilinear(bs, 17);
    const auto rb = resize_bilinear(b, 17);
    for (int r = 0; r < 17; ++r)
      for (int c = 0; c < 17; ++c) CHECK(ra(r, c) == doctest::Approx(rb(r, c) + 1000.0).epsilon(1e-12));
  }
}

TEST_CASE("prepare_nodule on generated volumes") {
  testsupport::TempDir dir("prep");
  SyntheticVolumeConfig cfg;
  cfg.per_class = 1;
  const auto records = write_synthetic_volumes(cfg, dir.path());
  REQUIRE(records.size() == 3);
  for (const auto& rec : records) {
    const auto raw = load_volume(rec.volume_path);
    const auto p = prepare_nodule(rec);
    CHECK(p.image.spacing() == Vec3{1, 1, 1});
    CHECK(p.image.dims()[0] == static_cast<int>(std::lround(raw.dims()[0] * raw.spacing()[0])));
    CHECK(p.mask.slice_foreground(p.middle) > 0);
    CHECK(p.middle >= p.slice_range.first);
    CHECK(p.middle <= p.slice_range.second);
    // shifted by exactly 1000 relative to the plain resampling
    const auto plain = resample_isotropic(raw);
    for (std::size_t i = 0; i < plain.voxel_count(); i += 97)
      CHECK(p.image.data()[i] == static_cast<float>(double(plain.data()[i]) + 1000.0));
  }
}
