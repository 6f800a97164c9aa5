// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/partition.h"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "bolt/error.h"

namespace bolt {

std::vector<std::string> EpiloguePattern::Nodes() const {
  std::vector<std::string> out{anchor};
  out.insert(out.end(), epilogue.begin(), epilogue.end());
  return out;
}

std::vector<std::string> PersistentChain::Nodes() const {
  std::vector<std::string> out;
  for (const auto& s : stages) {
    auto n = s.Nodes();
    out.insert(out.end(), n.begin(), n.end());
  }
  return out;
}

std::vector<std::string> Group::Nodes() const {
  return kind == GroupKind::kChain ? chain.Nodes() : pattern.Nodes();
}

const std::string& Group::Output() const {
  return kind == GroupKind::kChain ? chain.Output() : pattern.Output();
}

std::vector<EpiloguePattern> Group::Stages() const {
  if (kind == GroupKind::kChain) return chain.stages;
  return {pattern};
}

const Group* Partition::FindGroup(const std::string& id) const {
  for (const auto& g : groups) {
    if (g.id == id) return &g;
  }
  return nullptr;
}

namespace {

std::unordered_map<std::string, size_t> TopoPositions(const Graph& graph) {
  std::unordered_map<std::string, size_t> pos;
  const auto order = TopoOrder(graph);
  for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  return pos;
}

// Non-activation operands of a fused op must be parameters.
bool SideInputsAreParams(const Graph& graph, const OpNode& node, const std::string& activation) {
  for (size_t i = 1; i < node.inputs.size(); ++i) {
    if (node.inputs[i] == activation || !graph.IsParam(node.inputs[i])) return false;
  }
  return true;
}

Group MakeEpilogueGroup(EpiloguePattern p) {
  Group g;
  g.id = p.anchor;
  g.kind = GroupKind::kEpilogue;
  g.pattern = std::move(p);
  return g;
}

Group MakeChainGroup(PersistentChain c) {
  Group g;
  g.id = c.stages.front().anchor;
  g.kind = GroupKind::kChain;
  g.chain = std::move(c);
  return g;
}

Partition Assemble(const Graph& graph, std::vector<Group> groups) {
  const auto pos = TopoPositions(graph);
  std::sort(groups.begin(), groups.end(), [&](const Group& a, const Group& b) {
    return pos.at(a.Nodes().front()) < pos.at(b.Nodes().front());
  });
  std::set<std::string> covered;
  for (const auto& g : groups) {
    for (const auto& n : g.Nodes()) covered.insert(n);
  }
  Partition p;
  p.groups = std::move(groups);
  for (const auto& id : TopoOrder(graph)) {
    if (!covered.count(id)) p.fallback.push_back(id);
  }
  return p;
}

}  // namespace

std::vector<EpiloguePattern> MatchEpilogues(const Graph& graph) {
  std::vector<EpiloguePattern> patterns;
  for (const auto& id : TopoOrder(graph)) {
    const OpNode* node = graph.FindNode(id);
    if (!IsAnchorKind(node->kind)) continue;
    EpiloguePattern p;
    p.anchor = id;
    std::string cur = id;
    while (true) {
      if (graph.Uses(cur) != 1) break;
      const auto consumers = graph.Consumers(cur);
      if (consumers.size() != 1) break;
      const OpNode* next = graph.FindNode(consumers.front());
      if (!IsEpilogueKind(next->kind)) break;
      if (next->inputs.empty() || next->inputs[0] != cur) break;
      if (!SideInputsAreParams(graph, *next, cur)) break;
      if (graph.Uses(next->id) > 1) break;
      p.epilogue.push_back(next->id);
      cur = next->id;
      if (next->kind == OpKind::kReduceColumns) break;
    }
    patterns.push_back(std::move(p));
  }
  return patterns;
}

std::vector<PersistentChain> MatchChains(const std::vector<EpiloguePattern>& patterns, const Graph& graph) {
  std::unordered_map<std::string, size_t> by_anchor;
  for (size_t i = 0; i < patterns.size(); ++i) by_anchor[patterns[i].anchor] = i;

  // Patterns arrive in topological order, so the earliest chain claims a
  // shared stage first.
  std::vector<bool> used(patterns.size(), false);
  std::vector<PersistentChain> chains;
  for (size_t i = 0; i < patterns.size(); ++i) {
    if (used[i]) continue;
    std::vector<size_t> members{i};
    const OpKind kind = graph.FindNode(patterns[i].anchor)->kind;
    while (true) {
      const std::string& out = patterns[members.back()].Output();
      if (graph.Uses(out) != 1) break;
      const auto consumers = graph.Consumers(out);
      if (consumers.size() != 1) break;
      auto it = by_anchor.find(consumers.front());
      if (it == by_anchor.end() || used[it->second]) break;
      const OpNode* next = graph.FindNode(consumers.front());
      if (next->kind != kind || next->inputs[0] != out) break;
      if (!SideInputsAreParams(graph, *next, out)) break;
      members.push_back(it->second);
    }
    if (members.size() < 2) continue;
    PersistentChain chain;
    for (size_t m : members) {
      used[m] = true;
      chain.stages.push_back(patterns[m]);
    }
    chains.push_back(std::move(chain));
  }
  return chains;
}

Partition MakePartition(const Graph& graph, const std::vector<PersistentChain>& chains,
                        const std::vector<EpiloguePattern>& patterns, const std::vector<bool>& chain_legal) {
  if (chain_legal.size() != chains.size()) {
    Fail(ErrorCode::kInternal, "one legality verdict per chain is required");
  }
  std::set<std::string> in_legal_chain;
  std::vector<Group> groups;
  for (size_t i = 0; i < chains.size(); ++i) {
    if (!chain_legal[i]) continue;
    for (const auto& s : chains[i].stages) in_legal_chain.insert(s.anchor);
    groups.push_back(MakeChainGroup(chains[i]));
  }
  for (const auto& p : patterns) {
    if (!in_legal_chain.count(p.anchor)) groups.push_back(MakeEpilogueGroup(p));
  }
  Partition part = Assemble(graph, std::move(groups));
  CheckCoverage(part, graph);
  return part;
}

Partition DemoteChain(const Partition& partition, const std::string& group_id, const Graph& graph) {
  std::vector<Group> groups;
  bool found = false;
  for (const auto& g : partition.groups) {
    if (g.id == group_id && g.kind == GroupKind::kChain) {
      found = true;
      for (const auto& s : g.chain.stages) groups.push_back(MakeEpilogueGroup(s));
    } else {
      groups.push_back(g);
    }
  }
  if (!found) Fail(ErrorCode::kInternal, "no chain group '" + group_id + "' to demote");
  return Assemble(graph, std::move(groups));
}

Partition UnfusedPartition(const Graph& graph) {
  std::vector<Group> groups;
  for (const auto& n : graph.nodes) {
    if (IsAnchorKind(n.kind)) groups.push_back(MakeEpilogueGroup(EpiloguePattern{n.id, {}}));
  }
  return Assemble(graph, std::move(groups));
}

void CheckCoverage(const Partition& partition, const Graph& graph) {
  std::map<std::string, int> seen;
  for (const auto& g : partition.groups) {
    for (const auto& n : g.Nodes()) ++seen[n];
  }
  for (const auto& n : partition.fallback) ++seen[n];
  for (const auto& node : graph.nodes) {
    auto it = seen.find(node.id);
    if (it == seen.end() || it->second != 1) {
      Fail(ErrorCode::kInternal, "partition does not cover node '" + node.id + "' exactly once");
    }
  }
  if (seen.size() != graph.nodes.size()) Fail(ErrorCode::kInternal, "partition references unknown nodes");
}

}  // namespace bolt
