#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "eign/checkpoint.hpp"
#include "eign/datasets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = EIGN_CLI_PATH;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("eign_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args, const std::string& env = "") const {
    const std::string cmd =
        "cd '" + dir_.string() + "' && " + env + " '" + kCli + "' " + args + " >stdout.txt 2>stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream is(dir_ / name);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  json read_json(const std::string& name) const { return json::parse(read(name)); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenerateTrainEvaluateRoundTrip) {
  ASSERT_EQ(run("generate-data --dataset rw-comp --graphs 12 --seed 4 --out rw"), 0);
  const auto ds = eign::load_dataset(dir_ / "rw");
  EXPECT_EQ(ds.samples.size(), 12u);

  ASSERT_EQ(run("train --dataset-dir rw --epochs 2 --hidden 8 --seed 3 --out run/m.json --checkpoint run/m.ckpt"), 0);
  const auto m = read_json("run/m.json");
  EXPECT_EQ(m["dataset"], "rw-comp");
  EXPECT_EQ(m["model"]["arch"], "eign");
  EXPECT_EQ(m["model"]["hidden"], 8);
  EXPECT_EQ(m["train"]["epochs"], 2);
  EXPECT_EQ(m["history"].size(), 3u);
  EXPECT_TRUE(m["metrics"]["test"]["auc"].is_number());
  EXPECT_TRUE(fs::exists(dir_ / "run/m.ckpt"));

  ASSERT_EQ(run("evaluate --metrics run/m.json --dataset-dir rw --out run/e.json"), 0);
  const auto e = read_json("run/e.json");
  EXPECT_DOUBLE_EQ(e["metrics"]["auc"].get<double>(), m["metrics"]["test"]["auc"].get<double>());
  EXPECT_EQ(e["metrics"]["edges"], m["metrics"]["test"]["edges"]);
}

TEST_F(Cli, TrainingIsReproducible) {
  ASSERT_EQ(run("generate-data --dataset tri-flow --graphs 6 --seed 1 --out tri"), 0);
  ASSERT_EQ(run("train --dataset-dir tri --epochs 2 --hidden 8 --batch-size 2 --seed 5 --out a.json"), 0);
  ASSERT_EQ(run("train --dataset-dir tri --epochs 2 --hidden 8 --batch-size 2 --seed 5 --out b.json"), 0);
  auto a = read_json("a.json"), b = read_json("b.json");
  a.erase("wall_seconds");
  b.erase("wall_seconds");
  EXPECT_EQ(a, b);
}

TEST_F(Cli, DatasetDirFallsBackToEnvironment) {
  ASSERT_EQ(run("generate-data --dataset ld-cycles --graphs 4 --out data/ld"), 0);
  EXPECT_EQ(run("train --dataset-dir ld --epochs 1 --hidden 8 --out m.json", "EIGN_DATA_DIR=" + (dir_ / "data").string()),
            0);
  EXPECT_EQ(run("train --dataset-dir ld --epochs 1 --hidden 8 --out m.json", "EIGN_DATA_DIR="), 3);
}

TEST_F(Cli, CheckInvariantsExitCodes) {
  ASSERT_EQ(run("check-invariants --trials 5 --seed 2 --out ok.json"), 0);
  const auto ok = read_json("ok.json");
  EXPECT_TRUE(ok["pass"].get<bool>());
  EXPECT_EQ(ok["checks"].size(), 7u);

  ASSERT_EQ(run("check-invariants --trials 5 --seed 2 --model hodge+dir --out bad.json"), 1);
  const auto bad = read_json("bad.json");
  EXPECT_FALSE(bad["pass"].get<bool>());
  bool found = false;
  for (const auto& c : bad["checks"])
    if (c["name"] == "joint_equivariance") {
      EXPECT_FALSE(c["pass"].get<bool>());
      EXPECT_TRUE(c["counterexample"].is_object());
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST_F(Cli, DumpLaplacianCoordinateFormat) {
  {
    std::ofstream os(dir_ / "g.txt");
    eign::Graph g(3, {{0, 1, eign::EdgeKind::Directed}, {1, 2, eign::EdgeKind::Undirected}});
    eign::write_graph(os, g);
  }
  ASSERT_EQ(run("dump-laplacian --graph g.txt --kind equ --q 0 --out l.txt"), 0);
  // Two edges sharing node 1: two diagonal and two off-diagonal entries.
  std::istringstream is(read("l.txt"));
  std::size_t lines = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++lines;
  EXPECT_EQ(lines, 4u);
  EXPECT_EQ(run("dump-laplacian --out l.txt"), 2);
  EXPECT_EQ(run("dump-laplacian --graph g.txt --kind sideways --out l.txt"), 2);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("reproduce --table nope --out x"), 2);
  EXPECT_EQ(run("train --model bogus --dataset-dir . --out m.json"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("generate-data --dataset nope --out x"), 2);
  EXPECT_FALSE(fs::exists(dir_ / "x"));
}

TEST_F(Cli, TrafficNeedsATask) {
  ASSERT_EQ(run("generate-data --dataset anaheim-fixture --seed 1 --out data"), 0);
  ASSERT_TRUE(fs::exists(dir_ / "data/Anaheim/Anaheim_net.tntp"));
  ASSERT_EQ(run("generate-data --dataset tntp --net data/Anaheim/Anaheim_net.tntp "
                "--flow data/Anaheim/Anaheim_flow.tntp --out ana"),
            0);
  EXPECT_EQ(run("train --dataset-dir ana --epochs 1 --out t.json"), 2);
  EXPECT_EQ(run("train --dataset-dir ana --task teleport --epochs 1 --out t.json"), 2);
  ASSERT_EQ(run("train --dataset-dir ana --task interpolate --epochs 1 --batch-size 1 --hidden 8 --out t.json"), 0);
  EXPECT_TRUE(read_json("t.json")["metrics"]["test"]["rmse"].is_number());
}

TEST_F(Cli, GridWritesCsvOrJson) {
  ASSERT_EQ(run("generate-data --dataset tri-flow --graphs 6 --out tri"), 0);
  ASSERT_EQ(run("grid --dataset-dir tri --epochs 1 --lrs 0.01 0.003 --hidden-list 8 --layers-list 2 --out g.csv"), 0);
  std::istringstream is(read("g.csv"));
  std::string header, a, b, extra;
  std::getline(is, header);
  std::getline(is, a);
  std::getline(is, b);
  EXPECT_EQ(header.rfind("lr,hidden,layers", 0), 0u);
  EXPECT_EQ(a.rfind("0.01,8,2,", 0), 0u);
  EXPECT_EQ(b.rfind("0.003,8,2,", 0), 0u);
  EXPECT_FALSE(std::getline(is, extra) && !extra.empty());

  ASSERT_EQ(run("--threads 2 grid --dataset-dir tri --epochs 1 --lrs 0.01 0.003 --hidden-list 8 --layers-list 2 "
                "--out g.json"),
            0);
  const auto g = read_json("g.json");
  EXPECT_EQ(g["rows"].size(), 2u);
}
