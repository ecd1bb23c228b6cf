#include "doctest.h"

#include "../support/test_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;
using testutil::TempDir;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

// Runs the CLI with `args`, capturing stdout; stderr is discarded.
RunResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" SLIM_CLI_PATH "' " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string data_flag() { return "--data-dir '" + testutil::data_dir().string() + "'"; }

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(testutil::read_text(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

const char* kTiny = "--k 3 --epochs 2 --latent 4 --hops 1 --jobs 1";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help lists subcommands and defaults") {
  const RunResult top = run_cli("--help");
  CHECK(top.code == 0);
  for (const char* sub : {"cv", "train", "sweep-k", "coherence", "gradcheck", "inspect"})
    CHECK(top.out.find(sub) != std::string::npos);
  const RunResult cv = run_cli("cv --help");
  CHECK(cv.code == 0);
  CHECK(cv.out.find("--epochs") != std::string::npos);
  CHECK(cv.out.find("[300]") != std::string::npos);
  CHECK(cv.out.find("[100]") != std::string::npos);
  CHECK(cv.out.find("SLIM_DATA_DIR") != std::string::npos);
}

TEST_CASE("configuration errors exit with 2") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("cv").code == 2);
  CHECK(run_cli("cv --dataset MUTAG --k 0 " + data_flag()).code == 2);
  CHECK(run_cli("cv --dataset MUTAG --folds 1 " + data_flag()).code == 2);
  CHECK(run_cli("cv --dataset MUTAG --hops 11 " + data_flag()).code == 2);
  CHECK(run_cli("cv --dataset MUTAG --variant nope " + data_flag()).code == 2);
  CHECK(run_cli("sweep-k --dataset MUTAG --ks , " + data_flag()).code == 2);
  CHECK(run_cli("coherence --ks 2,0").code == 2);
}

TEST_CASE("missing data exits with 3") {
  TempDir dir("cli-io");
  CHECK(run_cli("cv --dataset NOPE --data-dir '" + dir.path().string() + "' --out '" + dir.path().string() + "'")
            .code == 3);
  CHECK(run_cli("inspect --dataset MUTAG --model '" + (dir.path() / "absent.slim").string() + "' " + data_flag())
            .code == 3);
  CHECK(run_cli("cv --dataset MUTAG --config '" + (dir.path() / "absent.ini").string() + "'").code == 3);
}

TEST_CASE("analytic bound") {
  const RunResult r = run_cli("coherence --analytic-only --d 2 --K 8 --cdcp-over-umax2 1");
  CHECK(r.code == 0);
  CHECK(std::stod(r.out) == doctest::Approx(-1.1213).epsilon(1e-4));
  CHECK(run_cli("coherence --analytic-only --d 2 --K 1").code == 2);
  CHECK(run_cli("coherence --analytic-only --d 1 --K 8").code == 2);
}

TEST_CASE("gradcheck exit status follows the tolerance") {
  const RunResult ok = run_cli("gradcheck");
  CHECK(ok.code == 0);
  const json doc = json::parse(ok.out);
  CHECK(doc.size() > 20);
  for (const auto& r : doc) CHECK(r["passed"].get<bool>());
  CHECK(run_cli("gradcheck --tolerance 1e-14 --step 1e-2").code == 1);
}

TEST_CASE("coherence sweep output is reproducible") {
  TempDir a("coh-a"), b("coh-b");
  const std::string args = "coherence --ks 2,4,8 --seeds 2 --seed 3 --jobs 2 --out ";
  REQUIRE(run_cli(args + "'" + a.path().string() + "'").code == 0);
  REQUIRE(run_cli(args + "'" + b.path().string() + "'").code == 0);
  const std::string csv = testutil::read_text(a.path() / "coherence.csv");
  CHECK(csv == testutil::read_text(b.path() / "coherence.csv"));
  CHECK(csv.rfind("K,seed,coherence,distortion,bound\n", 0) == 0);
  const json manifest = json::parse(testutil::read_text(a.path() / "manifest.json"));
  CHECK(manifest["command"] == "coherence");
  CHECK_FALSE(manifest["finished_at"].is_null());
}

TEST_CASE("cv, sweep-k, train and inspect on MUTAG") {
  if (!testutil::has_dataset("MUTAG")) {
    MESSAGE("MUTAG not available, skipping");
    return;
  }
  TempDir dir("cli-run");
  const std::string out = "--out '" + dir.path().string() + "'";

  SUBCASE("cv writes metrics, result and manifest") {
    REQUIRE(run_cli("cv --dataset MUTAG --folds 3 " + std::string(kTiny) + " " + data_flag() + " " + out).code == 0);
    const json r = json::parse(testutil::read_text(dir.path() / "cv_result.json"));
    CHECK(r["per_fold"].size() == 3);
    CHECK(r["mean"].get<double>() >= 0.0);
    std::istringstream lines(testutil::read_text(dir.path() / "metrics.jsonl"));
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
      const json m = json::parse(line);
      CHECK(m.contains("val_accuracy"));
      ++count;
    }
    CHECK(count == 6);
    const json manifest = json::parse(testutil::read_text(dir.path() / "manifest.json"));
    CHECK(manifest["config"]["k"] == "3");
    CHECK(manifest["dataset"] == "MUTAG");
  }

  SUBCASE("the environment supplies the data root") {
    const std::string env = "SLIM_DATA_DIR='" + testutil::data_dir().string() + "'";
    CHECK(run_cli("cv --dataset MUTAG --folds 2 --epochs 1 --k 2 --latent 2 --hops 1 " + out, env).code == 0);
  }

  SUBCASE("config file values yield to flags") {
    testutil::write_text(dir.path() / "run.ini", "[model]\nk = 4\nepochs = 1\nlatent = 3\nhops = 1\n");
    REQUIRE(run_cli("cv --dataset MUTAG --folds 2 --k 2 --config '" + (dir.path() / "run.ini").string() + "' " +
                    data_flag() + " " + out)
                .code == 0);
    const json manifest = json::parse(testutil::read_text(dir.path() / "manifest.json"));
    CHECK(manifest["config"]["k"] == "2");
    CHECK(manifest["config"]["epochs"] == "1");
    CHECK(manifest["config"]["latent"] == "3");
  }

  SUBCASE("sweep-k removes duplicates and sorts") {
    REQUIRE(run_cli("sweep-k --dataset MUTAG --folds 2 --ks 4,2,4 " + std::string(kTiny) + " " + data_flag() + " " +
                    out)
                .code == 0);
    const std::string csv = testutil::read_text(dir.path() / "sweep.csv");
    CHECK(csv.rfind("K,mean_acc,std_acc\n2,", 0) == 0);
    CHECK(csv.find("\n4,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  }

  SUBCASE("train then inspect") {
    REQUIRE(run_cli("train --dataset MUTAG " + std::string(kTiny) + " " + data_flag() + " " + out).code == 0);
    const fs::path model = dir.path() / "model.slim";
    REQUIRE(fs::exists(model));
    TempDir insp("cli-insp");
    REQUIRE(run_cli("inspect --dataset MUTAG --graph 5 --model '" + model.string() + "' " + data_flag() +
                    " --out '" + insp.path().string() + "'")
                .code == 0);
    const auto w = read_csv(insp.path() / "graph5_W.csv");
    const auto p = read_csv(insp.path() / "graph5_p.csv");
    const auto c = read_csv(insp.path() / "graph5_C.csv");
    REQUIRE(w.size() > 0);
    CHECK(w.front().size() == 3);
    double mass = 0.0, inter = 0.0;
    for (const auto& row : p) mass += row.front();
    for (const auto& row : c)
      for (double v : row) inter += v;
    CHECK(mass == doctest::Approx(static_cast<double>(w.size())));
    CHECK(inter == doctest::Approx(std::round(inter)).epsilon(1e-9));
    CHECK(fs::exists(insp.path() / "graph5_M.csv"));
    CHECK(fs::exists(insp.path() / "graph5_C_norm.csv"));
    CHECK(run_cli("inspect --dataset MUTAG --graph 500 --model '" + model.string() + "' " + data_flag() +
                  " --out '" + insp.path().string() + "'")
              .code == 2);
  }
}

}  // TEST_SUITE
