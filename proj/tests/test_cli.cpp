#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "arst/cli.hpp"
#include "arst/io.hpp"

using namespace arst;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& rel) const { return (path / rel).string(); }
};

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

constexpr const char* kTinyConfig = R"({
  "profile": "desk",
  "seed": 31,
  "model": {"d_model": 16, "n_heads": 2, "d_ffn": 32, "width": 3},
  "train": {"epochs": 2},
  "data": {"n_train": 2, "n_val": 0, "n_test": 2, "t_min": 40, "t_max": 60}
})";

std::size_t count_lines_with(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) n += line.find(needle) != std::string::npos ? 1 : 0;
  return n;
}

// gen -> train -> infer (greedy and CCI) -> eval inside `dir`.
std::vector<std::string> run_pipeline(const TempDir& dir) {
  write_file_bytes(dir / "cfg.json", kTinyConfig);
  auto r = run_cli({"gen", "--config", dir / "cfg.json", "--out", dir / "data"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = run_cli({"train", "--data", dir / "data", "--out-model", dir / "m.arst"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(count_lines_with(r.out, "\"epoch\"") == 2);
  CHECK(count_lines_with(r.out, "\"mean_loss\"") == 2);
  r = run_cli({"infer", "--model", dir / "m.arst", "--features", dir / "data/test/test_000.feat", "--out",
               dir / "greedy.csv"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = run_cli({"infer", "--model", dir / "m.arst", "--features", dir / "data/test/test_000.feat", "--cci", "--n",
               "4", "--out", dir / "cci.csv"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = run_cli({"eval", "--pred", dir / "cci.csv", "--gt", dir / "data/test/test_000.labels", "--report",
               dir / "report.json", "--ribbon", dir / "ribbon.svg"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::vector<std::string> artefacts;
  for (const char* f : {"data/manifest.json", "data/train/train_000.feat", "data/test/test_001.labels", "m.arst",
                        "greedy.csv", "cci.csv", "report.json", "ribbon.svg"}) {
    artefacts.push_back(read_file_bytes(dir / f));
  }
  return artefacts;
}

}  // namespace

TEST_CASE("end-to-end pipeline is byte-reproducible") {
  TempDir a("arst_test_cli_a"), b("arst_test_cli_b");
  const auto first = run_pipeline(a);
  const auto second = run_pipeline(b);
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    INFO("artefact " << i);
    CHECK(first[i] == second[i]);
  }
  const auto ck = load_checkpoint(a / "m.arst");
  CHECK(ck.model.cfg.d_model == 16);
  CHECK(ck.config.seed == 31);
  const auto report = nlohmann::json::parse(read_file_bytes(a / "report.json"));
  CHECK(report.at("aggregate").at("n_videos") == 1);
  const auto pred = read_phase_sequence(a / "cci.csv");
  CHECK(pred.size() == read_labels(a / "data/test/test_000.labels").size());
}

TEST_CASE("exit codes") {
  TempDir d("arst_test_cli_codes");
  write_file_bytes(d / "cfg.json", kTinyConfig);
  REQUIRE(run_cli({"gen", "--config", d / "cfg.json", "--out", d / "data"}).code == 0);
  REQUIRE(run_cli({"train", "--data", d / "data", "--out-model", d / "m.arst"}).code == 0);

  SUBCASE("2: argument and config errors") {
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"infer", "--model", d / "m.arst"}).code == 2);
    write_file_bytes(d / "bad.json", R"({"model": {"foo": 1}})");
    const auto r = run_cli({"gen", "--config", d / "bad.json", "--out", d / "x"});
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown key 'model.foo'") != std::string::npos);
    CHECK(run_cli({"gen", "--config", d / "missing.json", "--out", d / "x"}).code == 2);
    CHECK(run_cli({"infer", "--model", d / "m.arst", "--features", d / "data/test/test_000.feat", "--cci", "--n",
                   "0", "--out", d / "p.csv"})
              .code == 2);
    CHECK(run_cli({"sweep-w", "--data", d / "data", "--w-list", "1,x"}).code == 2);
  }

  SUBCASE("3: non-finite training loss") {
    const std::string feat = d / "data/train/train_001.feat";
    auto m = read_features(feat);
    m(5, 0) = std::numeric_limits<float>::quiet_NaN();
    write_features(feat, m);
    const auto r = run_cli({"train", "--data", d / "data", "--out-model", d / "nan.arst"});
    CHECK(r.code == 3);
    CHECK(r.err.find("train_001") != std::string::npos);
    CHECK_FALSE(fs::exists(d / "nan.arst"));
  }

  SUBCASE("4: malformed inputs") {
    const std::string bytes = read_file_bytes(d / "data/test/test_000.feat");
    write_file_bytes(d / "short.feat", bytes.substr(0, bytes.size() - 2));
    CHECK(run_cli({"infer", "--model", d / "m.arst", "--features", d / "short.feat", "--out", d / "p.csv"}).code ==
          4);
    write_features(d / "wide.feat", Matrix<float>(10, 7));
    CHECK(run_cli({"infer", "--model", d / "m.arst", "--features", d / "wide.feat", "--out", d / "p.csv"}).code ==
          4);
    const std::string ck = read_file_bytes(d / "m.arst");
    write_file_bytes(d / "short.arst", ck.substr(0, ck.size() / 2));
    CHECK(run_cli({"infer", "--model", d / "short.arst", "--features", d / "data/test/test_000.feat", "--out",
                   d / "p.csv"})
              .code == 4);
    CHECK(run_cli({"infer", "--model", d / "m.arst", "--features", d / "nope.feat", "--out", d / "p.csv"}).code ==
          4);
  }

  SUBCASE("5: evaluation length mismatch") {
    REQUIRE(run_cli({"infer", "--model", d / "m.arst", "--features", d / "data/test/test_000.feat", "--out",
                     d / "p.csv"})
                .code == 0);
    CHECK(run_cli({"eval", "--pred", d / "p.csv", "--gt", d / "data/test/test_001.labels"}).code == 5);
    const std::string csv = read_file_bytes(d / "p.csv");
    write_file_bytes(d / "cut.csv", csv.substr(0, csv.rfind('\n', csv.size() - 2) + 1));
    CHECK(run_cli({"eval", "--pred", d / "cut.csv", "--gt", d / "data/test/test_000.labels"}).code == 5);
    CHECK(run_cli({"eval", "--pred", d / "p.csv", "--pred", d / "p.csv", "--gt", d / "data/test/test_000.labels"})
              .code == 5);
  }
}

TEST_CASE("sweep-w and ablate tables") {
  TempDir d("arst_test_cli_sweep");
  write_file_bytes(d / "cfg.json", kTinyConfig);
  REQUIRE(run_cli({"gen", "--config", d / "cfg.json", "--out", d / "data"}).code == 0);
  auto r = run_cli({"sweep-w", "--data", d / "data", "--w-list", "0,2,5", "--out", d / "sweep.json"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(count_lines_with(r.out, "+-") == 3);
  const auto table = nlohmann::json::parse(read_file_bytes(d / "sweep.json"));
  REQUIRE(table.at("rows").size() == 3);
  CHECK(table["rows"][0]["width"] == 0);
  CHECK(table["rows"][2]["width"] == 5);

  r = run_cli({"ablate", "--data", d / "data", "--out", d / "ablate.json"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto ab = nlohmann::json::parse(read_file_bytes(d / "ablate.json"));
  REQUIRE(ab.at("rows").size() == 2);
  CHECK(ab["rows"][0]["decoder"] == "AR");

  r = run_cli({"bench", "--config", d / "cfg.json", "--frames", "120", "--out", d / "bench.json"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(nlohmann::json::parse(read_file_bytes(d / "bench.json")).at("samples_ms").size() == 120);
  CHECK(run_cli({"bench", "--frames", "50"}).code != 0);
}
