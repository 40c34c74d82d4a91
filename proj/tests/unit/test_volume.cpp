#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <numeric>

#include "autorad/volume.hpp"
#include "support.hpp"

using namespace autorad;
using testsupport::Gen;
using testsupport::TempDir;

namespace {

void write_raw_floats(const std::filesystem::path& p, const std::vector<float>& v) {
  std::string bytes(v.size() * 4, '\0');
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, &v[i], 4);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((u >> (8 * b)) & 0xFF);
  }
  testsupport::write_file(p, bytes);
}

BinaryMask random_mask(Gen& g, Dims3 dims, double density) {
  std::vector<std::uint8_t> d(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (auto& v : d) v = g.coin(density);
  return BinaryMask(dims, std::move(d));
}

}  // namespace

TEST_CASE("volume round-trip of a zero 4x4x4 volume") {
  TempDir dir("vol");
  VoxelVolume v({4, 4, 4}, {1, 1, 1}, std::vector<float>(64, 0.0f));
  save_volume(v, dir / "v.json");
  CHECK(load_volume(dir / "v.json") == v);
}

TEST_CASE("header dims 2x2x2 with 7 values is a length mismatch") {
  TempDir dir("vol");
  testsupport::write_file(dir / "v.json",
                          R"({"dims":[2,2,2],"spacing":[1,1,1],"dtype":"float32","endianness":"little","data_file":"v.raw"})");
  write_raw_floats(dir / "v.raw", std::vector<float>(7, 1.0f));
  try {
    load_volume(dir / "v.json");
    FAIL("expected a length mismatch");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("length mismatch") != std::string::npos);
  }
}

TEST_CASE("load performs no transformation") {
  TempDir dir("vol");
  std::vector<float> data(8, 0.0f);
  data[0] = -500.0f;
  VoxelVolume v({2, 2, 2}, {2, 2, 2}, data);
  save_volume(v, dir / "v.json");
  const auto back = load_volume(dir / "v.json");
  CHECK(back.at(0, 0, 0) == -500.0f);
  CHECK(back.spacing() == Vec3{2, 2, 2});
}

TEST_CASE("non-finite voxel is rejected with its index") {
  std::vector<float> data(8, 0.0f);
  data[5] = std::numeric_limits<float>::quiet_NaN();
  try {
    VoxelVolume({2, 2, 2}, {1, 1, 1}, data);
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("index 5") != std::string::npos);
  }
}

TEST_CASE("malformed headers are rejected") {
  TempDir dir("vol");
  testsupport::write_file(dir / "a.json", R"({"dims":[2,2],"spacing":[1,1,1],"data_file":"a.raw"})");
  CHECK_THROWS_AS(load_volume(dir / "a.json"), ValidationError);
  testsupport::write_file(dir / "b.json", R"({"dims":[1,1,1],"spacing":[1,1,1],"endianness":"big","data_file":"b.raw"})");
  CHECK_THROWS_AS(load_volume(dir / "b.json"), ValidationError);
  testsupport::write_file(dir / "c.json", "not json");
  CHECK_THROWS_AS(load_volume(dir / "c.json"), ValidationError);
  CHECK_THROWS_AS(VoxelVolume({1, 1, 1}, {0, 1, 1}, {0.0f}), ValidationError);
}

TEST_CASE("round-trip is bit-exact for random volumes") {
  TempDir dir("vol");
  Gen g(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Dims3 dims{g.integer(1, 5), g.integer(1, 6), g.integer(1, 7)};
    std::vector<float> data(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
    for (auto& v : data) v = static_cast<float>(g.normal(800.0));
    if (trial % 3 == 0) data[0] = -0.0f;
    VoxelVolume v(dims, {g.real(0.1, 3), g.real(0.1, 3), g.real(0.1, 3)}, data, {g.normal(), g.normal(), g.normal()});
    save_volume(v, dir / "r.json");
    const auto back = load_volume(dir / "r.json");
    REQUIRE(back.dims() == v.dims());
    CHECK(back.spacing() == v.spacing());
    CHECK(back.origin() == v.origin());
    CHECK(std::memcmp(back.data().data(), v.data().data(), data.size() * sizeof(float)) == 0);

    const auto m = random_mask(g, dims, 0.4);
    save_mask(m, dir / "m.json");
    CHECK(load_mask(dir / "m.json") == m);
  }
}

TEST_CASE("derive_label examples") {
  CHECK(derive_label(std::vector<double>{2, 2, 3}) == Label::benign);
  CHECK(derive_label(std::vector<double>{4, 4, 5}) == Label::malignant);
  CHECK(derive_label(std::vector<double>{2.5}) == Label::unsure);
  CHECK(derive_label(std::vector<double>{3.5}) == Label::unsure);
  CHECK_THROWS_AS(derive_label(std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(derive_label(std::vector<double>{0.5}), ValidationError);
  CHECK_THROWS_AS(derive_label(std::vector<double>{3, 5.5}), ValidationError);
}

TEST_CASE("derive_label partitions [1,5] by the mean") {
  Gen g(11);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> s(g.integer(1, 6));
    for (auto& v : s) v = g.coin(0.5) ? g.integer(1, 5) : g.real(1, 5);
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
    const Label l = derive_label(s);
    if (mean < 2.5) CHECK(l == Label::benign);
    else if (mean > 3.5) CHECK(l == Label::malignant);
    else CHECK(l == Label::unsure);
  }
}

TEST_CASE("label names") {
  for (auto l : {Label::benign, Label::unsure, Label::malignant}) CHECK(label_from_name(label_name(l)) == l);
  CHECK_THROWS_AS(label_from_name("maybe"), ValidationError);
}

TEST_CASE("consensus_mask examples") {
  auto one = [](bool on) { return BinaryMask({1, 1, 1}, {static_cast<std::uint8_t>(on)}); };
  std::vector<BinaryMask> half{one(true), one(true), one(false), one(false)};
  CHECK(consensus_mask(half).at(0, 0, 0));
  std::vector<BinaryMask> quarter{one(true), one(false), one(false), one(false)};
  CHECK_FALSE(consensus_mask(quarter).at(0, 0, 0));
  std::vector<BinaryMask> single{one(true)};
  CHECK(consensus_mask(single).at(0, 0, 0));
  CHECK_THROWS_AS(consensus_mask(std::vector<BinaryMask>{}), ValidationError);
  std::vector<BinaryMask> mismatch{one(true), BinaryMask({1, 1, 2}, {1, 1})};
  CHECK_THROWS_AS(consensus_mask(mismatch), ValidationError);
}

TEST_CASE("consensus_mask is idempotent and permutation-invariant") {
  Gen g(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Dims3 dims{g.integer(1, 3), g.integer(1, 5), g.integer(1, 5)};
    const auto m = random_mask(g, dims, 0.5);
    std::vector<BinaryMask> copies(g.integer(1, 5), m);
    CHECK(consensus_mask(copies) == m);

    std::vector<BinaryMask> many;
    for (int k = g.integer(1, 6); k > 0; --k) many.push_back(random_mask(g, dims, 0.5));
    const auto ref = consensus_mask(many);
    std::shuffle(many.begin(), many.end(), g.eng);
    CHECK(consensus_mask(many) == ref);

    // direct vote count
    for (std::size_t i = 0; i < ref.data().size(); ++i) {
      int votes = 0;
      for (const auto& a : many) votes += a.data()[i];
      CHECK(ref.data()[i] == (2 * votes >= static_cast<int>(many.size()) ? 1 : 0));
    }
  }
}

TEST_CASE("middle_slice examples") {
  CHECK(middle_slice({10, 14}) == 12);
  CHECK(middle_slice({10, 13}) == 11);
  CHECK(middle_slice({7, 7}) == 7);
  CHECK_THROWS_AS(middle_slice({5, 4}), ValidationError);
}

TEST_CASE("nodule records and scores CSV") {
  TempDir dir("rec");
  NoduleRecord r;
  r.nodule_id = "n1";
  r.volume_path = dir / "v.json";
  r.mask_paths = {dir / "m0.json", dir / "m1.json"};
  r.scores = {2, 3, 4};
  r.slice_range = {1, 3};
  save_nodule_records(std::vector<NoduleRecord>{r}, dir / "records.json");
  const auto back = load_nodule_records(dir / "records.json");
  REQUIRE(back.size() == 1);
  CHECK(back[0].nodule_id == "n1");
  CHECK(back[0].volume_path == r.volume_path);
  CHECK(back[0].mask_paths == r.mask_paths);
  CHECK(back[0].scores == r.scores);
  CHECK(back[0].slice_range == r.slice_range);
  CHECK(back[0].label == Label::unsure);

  testsupport::write_file(dir / "dup.json",
                          R"([{"nodule_id":"a","volume_path":"v","mask_paths":["m"],"scores":[1],"slice_range":[0,0]},
                              {"nodule_id":"a","volume_path":"v","mask_paths":["m"],"scores":[1],"slice_range":[0,0]}])");
  CHECK_THROWS_AS(load_nodule_records(dir / "dup.json"), ValidationError);

  testsupport::write_file(dir / "s.csv", "nodule_id,annotator,score\na,1,2\nb,1,4\na,2,3\n");
  const auto scores = load_scores_csv(dir / "s.csv");
  CHECK(scores.at("a") == std::vector<double>{2, 3});
  CHECK(scores.at("b") == std::vector<double>{4});
  testsupport::write_file(dir / "bad.csv", "nodule_id,annotator,score\na,1,7\n");
  CHECK_THROWS_AS(load_scores_csv(dir / "bad.csv"), ValidationError);
}
