// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// Long-prefix pattern matching of epilogue groups and persistent chains, and
// partitioning of the graph into template-compilable groups plus fallback.

#ifndef BOLT_PARTITION_H_
#define BOLT_PARTITION_H_

#include <string>
#include <vector>

#include "bolt/graph.h"

namespace bolt {

struct EpiloguePattern {
  std::string anchor;                 // Gemm or Conv2d node id
  std::vector<std::string> epilogue;  // fused element-wise tail, in order

  /// Node producing the group's result.
  const std::string& Output() const { return epilogue.empty() ? anchor : epilogue.back(); }
  std::vector<std::string> Nodes() const;

  bool operator==(const EpiloguePattern&) const = default;
};

struct PersistentChain {
  std::vector<EpiloguePattern> stages;

  const std::string& Output() const { return stages.back().Output(); }
  std::vector<std::string> Nodes() const;

  bool operator==(const PersistentChain&) const = default;
};

enum class GroupKind { kEpilogue, kChain };

struct Group {
  std::string id;  // id of the first anchor; stable under demotion
  GroupKind kind = GroupKind::kEpilogue;
  EpiloguePattern pattern;  // kEpilogue
  PersistentChain chain;    // kChain

  std::vector<std::string> Nodes() const;
  const std::string& Output() const;
  /// Stage patterns: one for an epilogue group, all stages for a chain.
  std::vector<EpiloguePattern> Stages() const;

  bool operator==(const Group&) const = default;
};

struct Partition {
  std::vector<Group> groups;
  std::vector<std::string> fallback;

  const Group* FindGroup(const std::string& id) const;
  bool operator==(const Partition&) const = default;
};

/// For every Gemm/Conv2d anchor, the longest epilogue whose ops each have a
/// single use. ReduceColumns terminates a group. Ordered by anchor position
/// in TopoOrder.
std::vector<EpiloguePattern> MatchEpilogues(const Graph& graph);

/// Greedily chains adjacent patterns (same anchor kind, stage output is the
/// sole use and feeds the next anchor's activation operand). Structural
/// legality is not checked here.
std::vector<PersistentChain> MatchChains(const std::vector<EpiloguePattern>& patterns,
                                         const Graph& graph);

/// `chain_legal[i]` is the verdict for `chains[i]`; illegal chains are split
/// back into their stages. Nodes outside every pattern go to fallback.
Partition MakePartition(const Graph& graph, const std::vector<PersistentChain>& chains,
                        const std::vector<EpiloguePattern>& patterns,
                        const std::vector<bool>& chain_legal);

/// Replaces chain group `group_id` by its stage patterns, renumbering groups.
Partition DemoteChain(const Partition& partition, const std::string& group_id, const Graph& graph);

/// Every anchor as a bare group with an empty epilogue; everything else in
/// fallback. Baseline for launch-count comparisons.
Partition UnfusedPartition(const Graph& graph);

/// Throws Internal when groups and fallback do not cover every node exactly once.
void CheckCoverage(const Partition& partition, const Graph& graph);

}  // namespace bolt

#endif  // BOLT_PARTITION_H_
