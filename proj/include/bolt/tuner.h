// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// Template-parameter search: enumerate KernelConfigs from an ArchSpec, prune
// with capacity rules and heuristics, rank analytically, then pick the best
// by measuring candidates on the tiled executor.

#ifndef BOLT_TUNER_H_
#define BOLT_TUNER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bolt/executor.h"
#include "bolt/fusion.h"
#include "bolt/graph.h"
#include "bolt/kernel_config.h"
#include "bolt/partition.h"
#include "json.hpp"

namespace bolt {

inline constexpr size_t kMaxCandidates = 50;
inline constexpr int64_t kDefaultLaunchWeight = 16 * 1024;

struct TunerOptions {
  int64_t launch_weight = kDefaultLaunchWeight;  // bytes charged per kernel launch
  size_t max_candidates = kMaxCandidates;
};

struct CostEstimate {
  int64_t global_bytes = 0;
  int64_t math_ops = 0;
  double occupancy = 0;  // threadblocks / SMs
  double score = 0;      // seconds at peak bandwidth or peak math, whichever is slower
};

CostEstimate EstimateCost(const KernelConfig& config, const GemmProblem& problem, const ArchSpec& arch);

/// Operand elements fetched when each wave of sm_count threadblocks loads the
/// distinct A row bands and B column bands it touches, in swizzled launch
/// order. Lower means better L2 reuse.
int64_t L2ReuseProxy(const KernelConfig& config, const GemmProblem& problem, const ArchSpec& arch);

/// Ranked, capped candidate list for one kernel. `conv_ic` > 0 selects the
/// convolution alignment rule. Throws NoValidConfig.
std::vector<KernelConfig> EnumerateCandidates(const GemmProblem& problem, const ArchSpec& arch,
                                              int64_t conv_ic = 0, size_t cap = kMaxCandidates);

/// Joint per-stage candidates for a persistent chain: TB_N equals each
/// stage's GEMM_N, TB_M and stages are shared, warp counts match, and the
/// fusion kind is not None. Throws NoLegalFusedConfig.
std::vector<GroupSchedule> EnumerateChainCandidates(const ChainShape& chain, const ArchSpec& arch,
                                                    size_t cap = kMaxCandidates);

struct CandidateReport {
  GroupSchedule schedule;
  ExecCounters counters;
  int64_t cost = 0;     // global bytes + launches * launch_weight
  std::string skipped;  // rule tag when the candidate was not measured
};

struct ProfileReport {
  GroupSchedule best;
  std::vector<CandidateReport> candidates;
};

/// Scalarized measurement.
int64_t MeasuredCost(const ExecCounters& c, int64_t launch_weight);

/// Measures every candidate of `group` in measure-only mode and returns the
/// argmin of MeasuredCost (ties: smem bytes moved, bank conflicts, then configs). Illegal
/// candidates are skipped with a reason; throws NoLegalFusedConfig (chains)
/// or NoValidConfig when none remain.
ProfileReport Profile(const Graph& graph, const Group& group, const std::vector<GroupSchedule>& candidates,
                      const ArchSpec& arch, const TunerOptions& options = {});

struct GroupTuning {
  ProfileReport report;
  size_t enumerated = 0;
};

GroupTuning TuneGroup(const Graph& graph, const Group& group, const ArchSpec& arch,
                      const TunerOptions& options = {});

struct Demotion {
  std::string group;
  std::string reason;
};

struct TuneResult {
  Partition partition;  // after demotions
  Schedule schedule;
  std::map<std::string, GroupTuning> groups;
  std::vector<Demotion> demoted;
};

/// Tunes every group; chains without a legal fused config are demoted to
/// their stages and re-tuned.
TuneResult TunePartition(const Graph& graph, const Partition& partition, const ArchSpec& arch,
                         const TunerOptions& options = {});

}  // namespace bolt

#endif  // BOLT_TUNER_H_
