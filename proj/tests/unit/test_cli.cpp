#include <doctest.h>

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "autorad/app.hpp"
#include "autorad/radiomics.hpp"
#include "autorad/volume.hpp"
#include "support.hpp"

using namespace autorad;
using testsupport::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

long lines(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

}  // namespace

TEST_CASE("help and usage errors") {
  const auto help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("extract") != std::string::npos);
  CHECK(help.out.find("sweep") != std::string::npos);
  CHECK(cli({"train", "--help"}).code == 0);
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"extract", "--records", "x.json"}).code == 1);  // --out missing
}

TEST_CASE("selftest passes") {
  const auto r = cli({"selftest"});
  INFO(r.out);
  CHECK(r.code == 0);
  CHECK(r.out.find("all checks passed") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("end-to-end commands on generated data") {
  TempDir dir("cli");
  const auto d = dir.path().string();
  testsupport::write_file(dir / "cfg.json",
                          R"({"seed": 3, "train": {"epochs": 2, "folds": 2, "context_tokens": 4},
                              "sweep": {"folds": 1}})");
  const std::string cfg = (dir / "cfg.json").string();

  const auto synth = cli({"synth", "--out", d, "--volumes", "--per-class", "6", "--config", cfg});
  REQUIRE_MESSAGE(synth.code == 0, synth.err);
  CHECK(std::filesystem::exists(dir / "embeddings.json"));
  CHECK(std::filesystem::exists(dir / "volumes" / "records.json"));
  CHECK(lines(testsupport::read_file(dir / "labels.csv")) == 19);

  SUBCASE("extract") {
    auto records = load_nodule_records(dir / "volumes" / "records.json");
    records.resize(2);
    save_nodule_records(records, dir / "two.json");
    const auto r = cli({"extract", "--records", (dir / "two.json").string(), "--out", (dir / "f.csv").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto table = read_feature_table(dir / "f.csv");
    CHECK(table.ids.size() == 2u);
    CHECK(table.names.size() == 1312u);
    CHECK(read_manifest(manifest_path_for(dir / "f.csv")).size() == 1312u);
  }

  SUBCASE("preprocess") {
    auto records = load_nodule_records(dir / "volumes" / "records.json");
    records.resize(2);
    save_nodule_records(records, dir / "two.json");
    const auto r = cli({"preprocess", "--records", (dir / "two.json").string(), "--out", (dir / "prep").string(),
                        "--embeddings", "--config", cfg});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(std::filesystem::exists(dir / "prep" / "labels.csv"));
    CHECK(std::filesystem::exists(dir / "prep" / "embeddings.json"));
    CHECK(std::filesystem::exists(dir / "prep" / "nodules" / records[0].nodule_id / "crop.json"));
    const auto crop = load_volume(dir / "prep" / "nodules" / records[0].nodule_id / "crop.json");
    CHECK(crop.dims() == Dims3{1, 224, 224});
  }

  SUBCASE("train, evaluate and sweep") {
    const std::vector<std::string> inputs{"--features",   (dir / "features.csv").string(),
                                          "--embeddings", (dir / "embeddings.json").string(),
                                          "--labels",     (dir / "labels.csv").string(),
                                          "--config",     cfg};
    auto with = [&](std::vector<std::string> head) {
      head.insert(head.end(), inputs.begin(), inputs.end());
      return head;
    };
    const auto train = cli(with({"train", "--out", (dir / "run").string()}));
    REQUIRE_MESSAGE(train.code == 0, train.err);
    CHECK(std::filesystem::exists(dir / "run" / "aggregate.json"));
    CHECK(std::filesystem::exists(dir / "run" / "config.json"));
    for (const char* f : {"fold_0", "fold_1"}) {
      CHECK(std::filesystem::exists(dir / "run" / f / "checkpoint.json"));
      CHECK(std::filesystem::exists(dir / "run" / f / "checkpoint.bin"));
      CHECK(std::filesystem::exists(dir / "run" / f / "metrics.json"));
    }

    const auto eval = cli(with({"evaluate", "--checkpoint", (dir / "run" / "fold_0" / "checkpoint.json").string(),
                                "--ids", (dir / "run" / "fold_0" / "test_ids.csv").string(), "--out",
                                (dir / "eval").string()}));
    REQUIRE_MESSAGE(eval.code == 0, eval.err);
    // evaluating the held-out fold reproduces the fold metrics
    CHECK(testsupport::read_file(dir / "eval" / "metrics.json") ==
          testsupport::read_file(dir / "run" / "fold_0" / "metrics.json"));

    const auto sweep = cli(with({"sweep", "--out", (dir / "sweep.csv").string()}));
    REQUIRE_MESSAGE(sweep.code == 0, sweep.err);
    const auto csv = testsupport::read_file(dir / "sweep.csv");
    CHECK(lines(csv) == 8);
    CHECK(csv.find("\n70,") != std::string::npos);

    // wrong checkpoint path, unknown ids: invalid input
    CHECK(cli(with({"evaluate", "--checkpoint", (dir / "nope.json").string(), "--out", d})).code == 1);
    testsupport::write_file(dir / "ids.csv", "nodule_id\nnot-a-nodule\n");
    const auto bad_ids = cli(with({"evaluate", "--checkpoint", (dir / "run" / "fold_0" / "checkpoint.json").string(),
                                   "--ids", (dir / "ids.csv").string(), "--out", d}));
    CHECK(bad_ids.code == 1);
    CHECK(bad_ids.err.find("not-a-nodule") != std::string::npos);
  }

  SUBCASE("invalid input and failures") {
    testsupport::write_file(dir / "bad.json", R"({"train": {"epochz": 3}})");
    const auto bad = cli({"synth", "--out", d, "--config", (dir / "bad.json").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("train.epochz: unknown key") != std::string::npos);
    CHECK(cli({"extract", "--records", (dir / "missing.json").string(), "--out", d + "/x.csv"}).code == 1);
    // output under a regular file cannot be written
    const auto blocked = cli({"extract", "--records", (dir / "volumes" / "records.json").string(), "--out",
                              (dir / "labels.csv" / "x.csv").string()});
    CHECK(blocked.code == 2);
  }
}
