// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// boltc: compile, bench and verify graphs against the tiled oracle.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bolt/codegen.h"
#include "bolt/graph_io.h"
#include "bolt/kernel_config.h"
#include "bolt/pipeline.h"

namespace {

struct Args {
  std::string graph, arch, out, manifest;
  std::string fusion = "on", padding = "on";
  uint64_t seed = 0;
  int64_t launch_weight = bolt::kDefaultLaunchWeight;
  int reps = 1;
  bool timing = false;
};

void AddCommon(CLI::App* cmd, Args& a, bool needs_out) {
  cmd->add_option("--graph", a.graph, "graph JSON (bolt-graph/1)")->required();
  cmd->add_option("--arch", a.arch, "architecture JSON or bundled name")->required();
  auto* out = cmd->add_option("--out", a.out, "output directory");
  if (needs_out) out->required();
  cmd->add_option("--fusion", a.fusion, "persistent-kernel fusion")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--padding", a.padding, "input-channel padding")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--seed", a.seed, "random seed for inputs and weights");
  cmd->add_option("--launch-weight", a.launch_weight, "bytes charged per kernel launch when ranking")
      ->check(CLI::NonNegativeNumber);
  cmd->add_flag("--timing", a.timing, "include tuning wall time in the report");
}

bolt::ArchSpec ResolveArch(const std::string& arg) {
  if (arg == "sm75-t4-like" || arg == "sm80-a100-like") return bolt::BundledArch(arg);
  return bolt::LoadArchSpec(arg);
}

void WriteFile(const std::string& dir, const std::string& name, const std::string& text) {
  std::filesystem::create_directories(dir);
  std::ofstream f(std::filesystem::path(dir) / name, std::ios::binary);
  if (!f) bolt::Fail(bolt::ErrorCode::kParseError, "cannot write '" + name + "' in '" + dir + "'");
  f << text;
}

int Run(const std::string& command, const Args& a) {
  bolt::PipelineOptions opts;
  opts.fusion = a.fusion == "on";
  opts.padding = a.padding == "on";
  opts.seed = a.seed;
  opts.launch_weight = a.launch_weight;
  opts.reps = a.reps;
  opts.timing = a.timing;

  const bolt::ArchSpec arch = ResolveArch(a.arch);
  const bolt::Compiled c = bolt::Compile(bolt::LoadGraph(a.graph), arch, opts);

  if (command == "compile") {
    const nlohmann::json report = bolt::CompileReport(c, arch, opts);
    bolt::WriteArtifacts(c, report, a.out);
    std::cout << report.dump(2) << "\n";
    return 0;
  }
  if (command == "bench") {
    const bolt::BenchResult b = bolt::Bench(c, arch, opts);
    if (!a.out.empty()) {
      bolt::WriteArtifacts(c, bolt::CompileReport(c, arch, opts), a.out);
      WriteFile(a.out, "bench.json", b.report.dump(2) + "\n");
    }
    std::cout << b.report.dump(2) << "\n";
    return 0;
  }
  std::optional<bolt::RuntimeManifest> manifest;
  if (!a.manifest.empty()) {
    std::ifstream f(a.manifest);
    if (!f) bolt::Fail(bolt::ErrorCode::kParseError, "cannot open manifest '" + a.manifest + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      bolt::Fail(bolt::ErrorCode::kParseError, std::string("manifest is not JSON: ") + e.what());
    }
    manifest = bolt::ManifestFromJson(j);
  }
  const bolt::VerifyResult v = bolt::Verify(c, arch, opts, manifest);
  if (!a.out.empty()) WriteFile(a.out, "verify.json", v.report.dump(2) + "\n");
  if (!v.mismatch.equal) {
    nlohmann::json err{{"error", {{"code", "VERIFY_FAILED"}, {"message", "output differs from reference"}}},
                       {"first_mismatch", v.report["first_mismatch"]}};
    std::cerr << err.dump(2) << "\n";
    std::cout << v.report.dump(2) << "\n";
    return bolt::ExitCodeFor(bolt::ErrorCode::kVerifyFailed);
  }
  std::cout << v.report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boltc: template-based kernel compiler driver"};
  app.require_subcommand(1);
  Args args;
  auto* compile = app.add_subcommand("compile", "tune and emit kernels, manifest and report");
  auto* bench = app.add_subcommand("bench", "execute the tuned plan and report counters");
  auto* verify = app.add_subcommand("verify", "check the tuned plan against the naive reference");
  AddCommon(compile, args, true);
  AddCommon(bench, args, false);
  AddCommon(verify, args, false);
  bench->add_option("--reps", args.reps, "repetitions")->check(CLI::PositiveNumber);
  verify->add_option("--manifest", args.manifest, "execute this manifest's plans instead of retuning");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return Run(command, args);
  } catch (const bolt::Error& e) {
    std::cerr << bolt::ErrorJson(e).dump(2) << "\n";
    return bolt::ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", {{"code", "INTERNAL"}, {"message", e.what()}}}};
    std::cerr << err.dump(2) << "\n";
    return 4;
  }
}
