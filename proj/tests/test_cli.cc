// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "support.h"

namespace {

namespace fs = std::filesystem;

using Result = bolt::testing::CommandResult;
using bolt::testing::ReadFile;
using bolt::testing::RunBoltc;

std::string Slurp(const fs::path& p) { return ReadFile(p.string()); }

fs::path Scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("boltc_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

Result Boltc(const std::string& args) { return RunBoltc(args); }

std::string Graph(const std::string& name) {
  return std::string(BOLT_SOURCE_DIR) + "/fixtures/graphs/" + name + ".json";
}

std::string ErrorCodeOf(const Result& r) {
  try {
    return nlohmann::json::parse(r.err)["error"]["code"].get<std::string>();
  } catch (...) {
    return "<unparsable: " + r.err + ">";
  }
}

TEST(Cli, VerifyPasses) {
  const Result r = Boltc("verify --graph " + Graph("gemm_bias_relu") + " --arch sm75-t4-like --seed 3");
  EXPECT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["status"], "pass");
}

TEST(Cli, CompileWritesArtifacts) {
  const fs::path out = Scratch("compile");
  const Result r = Boltc("compile --graph " + Graph("b2b_gemm_chains") + " --arch sm80-a100-like --out " +
                         out.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "report.json"));
  const auto manifest = nlohmann::json::parse(Slurp(out / "manifest.json"));
  ASSERT_FALSE(manifest["plans"].empty());
  for (const auto& p : manifest["plans"]) {
    EXPECT_TRUE(fs::exists(out / "kernels" / p["source"].get<std::string>())) << p["source"];
  }
  EXPECT_EQ(nlohmann::json::parse(Slurp(out / "report.json")), nlohmann::json::parse(r.out));

  // The written manifest replays through verify.
  const Result v = Boltc("verify --graph " + Graph("b2b_gemm_chains") + " --arch sm80-a100-like --manifest " +
                         (out / "manifest.json").string());
  EXPECT_EQ(v.rc, 0) << v.err;
}

TEST(Cli, BenchWritesBenchJson) {
  const fs::path out = Scratch("bench");
  const Result r = Boltc("bench --graph " + Graph("repvgg_a0_like") + " --arch sm75-t4-like --reps 2 --out " +
                         out.string());
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto bench = nlohmann::json::parse(Slurp(out / "bench.json"));
  EXPECT_EQ(bench, nlohmann::json::parse(r.out));
  EXPECT_GT(bench["savings"]["kernel_launches"].get<int64_t>(), 0);
}

TEST(Cli, CompileRequiresOut) {
  const Result r = Boltc("compile --graph " + Graph("gemm_bias_relu") + " --arch sm75-t4-like");
  EXPECT_EQ(r.rc, 2);
}

TEST(Cli, InputErrors) {
  Result r = Boltc("verify --graph " + Graph("empty") + " --arch sm75-t4-like");
  EXPECT_EQ(r.rc, 2);
  EXPECT_EQ(ErrorCodeOf(r), "EMPTY_GRAPH");

  r = Boltc("verify --graph /nonexistent/graph.json --arch sm75-t4-like");
  EXPECT_EQ(r.rc, 2);
  EXPECT_EQ(ErrorCodeOf(r), "PARSE_ERROR");

  const fs::path bad = Scratch("bad.json");
  std::ofstream(bad) << "{\"version\": \"bolt-graph/1\", \"nodes\": [";
  r = Boltc("verify --graph " + bad.string() + " --arch sm75-t4-like");
  EXPECT_EQ(r.rc, 2);
  EXPECT_EQ(ErrorCodeOf(r), "PARSE_ERROR");

  r = Boltc("verify --graph " + Graph("gemm_bias_relu") + " --arch sm90-made-up");
  EXPECT_EQ(r.rc, 2);

  r = Boltc("verify --graph " + Graph("gemm_bias_relu") + " --arch sm75-t4-like --fusion maybe");
  EXPECT_EQ(r.rc, 2);

  r = Boltc("frobnicate");
  EXPECT_EQ(r.rc, 2);
}

TEST(Cli, TamperedManifestIsIllegal) {
  const fs::path out = Scratch("tamper");
  ASSERT_EQ(Boltc("compile --graph " + Graph("b2b_gemm_chains") + " --arch sm75-t4-like --out " + out.string()).rc,
            0);
  auto m = nlohmann::json::parse(Slurp(out / "manifest.json"));
  bool tampered = false;
  for (auto& p : m["plans"]) {
    if (p["pattern"] == "chain") {
      p["fusion"] = "none";
      tampered = true;
      break;
    }
  }
  ASSERT_TRUE(tampered);
  std::ofstream(out / "bad_manifest.json") << m.dump(2);
  const Result r = Boltc("verify --graph " + Graph("b2b_gemm_chains") + " --arch sm75-t4-like --manifest " +
                         (out / "bad_manifest.json").string());
  EXPECT_EQ(r.rc, 3);
  EXPECT_EQ(ErrorCodeOf(r), "ILLEGAL_FUSION");
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(Boltc("--help").rc, 0); }

}  // namespace
