// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end flow behind boltc: type inference, layout and padding passes,
// pattern matching and partitioning, tuning, code generation, execution on
// the tiled oracle and reporting.

#ifndef BOLT_PIPELINE_H_
#define BOLT_PIPELINE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bolt/codegen.h"
#include "bolt/error.h"
#include "bolt/executor.h"
#include "bolt/graph.h"
#include "bolt/kernel_config.h"
#include "bolt/layout_pad.h"
#include "bolt/partition.h"
#include "bolt/tuner.h"
#include "json.hpp"

namespace bolt {

struct PipelineOptions {
  bool fusion = true;   // off: persistent chains are split into their stages
  bool padding = true;
  uint64_t seed = 0;
  int64_t launch_weight = kDefaultLaunchWeight;
  int reps = 1;         // bench repetitions; counters must agree across them
  bool timing = false;  // include wall-clock tuning time (breaks byte-identity)
};

struct Compiled {
  Graph source;                 // typed input graph
  Graph graph;                  // after layout and padding passes
  std::vector<PadPlan> pads;
  std::vector<std::string> rejected_chains;  // chains split before tuning, with reasons
  TuneResult tuning;            // holds the final partition and schedule
  std::vector<KernelPlan> plans;
  RuntimeManifest manifest;
  std::map<std::string, std::string> sources;  // file name -> text
  double tuning_seconds = 0;

  const Partition& partition() const { return tuning.partition; }
  const Schedule& schedule() const { return tuning.schedule; }
};

/// Throws EmptyGraph for a graph without nodes.
Compiled Compile(const Graph& graph, const ArchSpec& arch, const PipelineOptions& options);

/// Random inputs and weights for the compiled graph, including padded copies.
TensorMap PipelineValues(const Compiled& c, uint64_t seed);

/// Rejects plans that violate config invariants or chain fusion legality
/// (IllegalFusion) and plans that do not match the compiled partition
/// (MissingPlan).
Schedule CheckedSchedule(const Compiled& c, const RuntimeManifest& manifest, const ArchSpec& arch);

nlohmann::json CompileReport(const Compiled& c, const ArchSpec& arch, const PipelineOptions& options);

struct BenchResult {
  GraphRun run;           // with the chosen options
  GraphRun unfused;       // chains split, same seed
  nlohmann::json report;
};

/// Executes with seeded values `reps` times; the unfused baseline recompiles
/// with fusion off.
BenchResult Bench(const Compiled& c, const ArchSpec& arch, const PipelineOptions& options);

struct VerifyResult {
  Mismatch mismatch;
  ExecCounters counters;
  nlohmann::json report;
};

/// Runs the plan (or `manifest`'s plan when given) and the naive whole-graph
/// reference with the same seed.
VerifyResult Verify(const Compiled& c, const ArchSpec& arch, const PipelineOptions& options,
                    const std::optional<RuntimeManifest>& manifest = std::nullopt);

/// Exit status of an error code: 2 input, 3 verification, 4 internal.
int ExitCodeFor(ErrorCode code);
nlohmann::json ErrorJson(const Error& e);

/// Writes manifest.json, report.json and kernels/<symbol>.cu.txt under `dir`.
void WriteArtifacts(const Compiled& c, const nlohmann::json& report, const std::string& dir);

}  // namespace bolt

#endif  // BOLT_PIPELINE_H_
