// Copyright 2026 The GeoConv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "geoconv/binary_io.hpp"
#include "geoconv/geoweight.hpp"
#include "geoconv/network.hpp"
#include "json.hpp"

namespace {

using namespace geoconv;
namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("geoconv_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "small.json")
        << R"({"model":{"resolution":16},"dataset":{"samples":48,"identities":6,"imageSize":32},)"
           R"("training":{"epochs":2}})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) {
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" GEOCONV_BIN "' " + args + " >'" + out.string() +
                            "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  fs::path dir_;
};

TEST_F(Cli, UnknownKeyIsValidationError) {
  auto r = run("build-shape --output-dir o --set model.colour=3 --json-errors");
  EXPECT_EQ(r.code, 2);
  const auto nl = r.err.find('\n');
  ASSERT_NE(nl, std::string::npos);
  const auto rec = nlohmann::json::parse(r.err.substr(nl + 1));
  EXPECT_EQ(rec.at("error").at("type"), "ValidationError");
  EXPECT_EQ(rec.at("error").at("exitCode"), 2);
  EXPECT_EQ(rec.at("error").at("command"), "build-shape");

  EXPECT_EQ(run("build-shape --output-dir o --set model.resolution=\\\"x\\\"").code, 2);
  EXPECT_EQ(run("eval --output-dir o").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(Cli, FlatPlaneReducesToConvolution) {
  auto r = run("compile-weights --output-dir o --mesh flat --set camera.width=32 --set camera.height=32");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("flat reduction: PASS"), std::string::npos);
  for (const char* stage : {"shape", "rasterize", "geodesic", "assembly", "write", "total"})
    EXPECT_NE(r.out.find(std::string("\n") + stage + "\t"), std::string::npos) << stage;
  const auto stack = loadWeightStack(dir_ / "o" / "weights.gws");
  ASSERT_EQ(stack.layers.size(), 5u);
  for (const auto& l : stack.layers)
    for (float g : l.g) EXPECT_EQ(g, 1.0f);
}

TEST_F(Cli, ResolvedConfigReproducesOutputs) {
  ASSERT_EQ(run("build-shape --output-dir a --set model.resolution=12 --set coefficients.wExp=[1.5]").code, 2);
  std::string wExp = "[1.5";
  for (int i = 1; i < 79; ++i) wExp += ",0";
  wExp += "]";
  ASSERT_EQ(run("build-shape --output-dir a --set model.resolution=12 --set coefficients.wExp=" + wExp).code, 0);
  ASSERT_EQ(run("build-shape --config a/resolved-config.json --output-dir b").code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "shape.obj"), slurp(dir_ / "b" / "shape.obj"));
  auto cfg = nlohmann::json::parse(slurp(dir_ / "a" / "resolved-config.json"));
  EXPECT_EQ(cfg.at("model").at("resolution"), 12);
  EXPECT_EQ(cfg.at("training").at("epochs"), 10);
}

TEST_F(Cli, ZeroEpochCheckpointEqualsInitialization) {
  ASSERT_EQ(run("make-dataset --config small.json --output-dir d").code, 0);
  const auto before = slurp(dir_ / "d" / "dataset.gds");
  auto r = run("train --config small.json --output-dir t --dataset d/dataset.gds --epochs 0 --mask 10101");
  ASSERT_EQ(r.code, 0) << r.err;
  Network init(NetSpec::toy(2, NetSpec::parseMask("10101"), 32), 1);
  EXPECT_EQ(io::readFile(dir_ / "t" / "checkpoint.gck"), encodeCheckpoint(init));
  EXPECT_EQ(slurp(dir_ / "t" / "train-log.jsonl"), "");
  EXPECT_EQ(slurp(dir_ / "d" / "dataset.gds"), before);
}

TEST_F(Cli, TrainEvalAndAblate) {
  ASSERT_EQ(run("make-dataset --config small.json --output-dir d").code, 0);
  ASSERT_EQ(run("train --config small.json --output-dir t --dataset d/dataset.gds").code, 0);
  std::istringstream log(slurp(dir_ / "t" / "train-log.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch"), ++lines);
  }
  EXPECT_EQ(lines, 2);

  auto r = run("eval --config small.json --output-dir e --dataset d/dataset.gds --checkpoint t/checkpoint.gck --json");
  ASSERT_EQ(r.code, 0) << r.err;
  auto doc = nlohmann::json::parse(r.out);
  ASSERT_EQ(doc.at("tables").at("f1").size(), 2u);
  EXPECT_EQ(doc.at("tables").at("f1")[0].at("variant"), "G_(11111)");
  EXPECT_EQ(doc.at("tables").at("f1")[1].at("variant"), "chance");

  r = run("ablate --config small.json --output-dir ab --dataset d/dataset.gds --epochs 1 "
          "--set 'ablate.variants=[\"G_(11111)\",\"G_(00000)\"]'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto table = slurp(dir_ / "ab" / "ablation.tsv");
  EXPECT_EQ(table.rfind("variant\tAU1\tAU2\tavg\nG_(11111)\t", 0), 0u) << table;
  EXPECT_NE(table.find("\nG_(00000)\t"), std::string::npos);
  EXPECT_NE(table.find("\nchance\t"), std::string::npos);
}

TEST_F(Cli, GradcheckPasses) {
  auto r = run("gradcheck --output-dir g --set gradcheck.seeds=[1,2]");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("gradcheck: PASS"), std::string::npos);
}

TEST_F(Cli, GeodesicOracleColumns) {
  auto r = run("geodesic --output-dir o --mesh icosphere:2 --sources [0,7] --oracle");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("source\treachable\tmax\tmean\toracleMaxRelDev\toracleMeanRelDev\n", 0), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "o" / "geodesic-7.gfd"));
  EXPECT_EQ(run("geodesic --output-dir o --mesh icosphere:2 --sources [100000]").code, 2);
}

}  // namespace
