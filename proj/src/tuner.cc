// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/tuner.h"

#include <algorithm>
#include <bit>
#include <map>
#include <tuple>

#include "bolt/error.h"

namespace bolt {

namespace {

constexpr int64_t kTbExtents[] = {32, 64, 128, 256};
constexpr int64_t kTbK[] = {32, 64};
constexpr int kStages[] = {2, 3, 4};
constexpr int64_t kWarpM[] = {16, 32, 64, 128};
constexpr int64_t kWarpN[] = {8, 16, 32, 64, 128};
constexpr Swizzle kSwizzles[] = {Swizzle::kIdentity, Swizzle::k2, Swizzle::k4, Swizzle::k8};

int64_t CeilDiv(int64_t a, int64_t b) { return (a + b - 1) / b; }

// Threadblock extents beyond the next power of two of the problem only add
// predicated lanes.
int64_t ExtentCap(int64_t extent) {
  return std::max<int64_t>(32, static_cast<int64_t>(std::bit_ceil(static_cast<uint64_t>(extent))));
}

int64_t Tiles(const KernelConfig& c, const GemmProblem& p) {
  return CeilDiv(p.m, c.threadblock.m) * CeilDiv(p.n, c.threadblock.n);
}

int64_t WarpArea(const KernelConfig& c) { return c.warp.m * c.warp.n; }

bool PreferredWarps(int64_t warps) { return warps == 4 || warps == 8; }

std::string Join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

// Keeps the configs whose launched threadblocks cover the SMs, or the most
// any candidate achieves when the problem is too small.
template <typename T, typename TilesFn>
void KeepCoveringSms(std::vector<T>& cands, int sm_count, TilesFn tiles) {
  int64_t best = 0;
  for (const auto& c : cands) best = std::max(best, tiles(c));
  const int64_t need = std::min<int64_t>(sm_count, best);
  std::erase_if(cands, [&](const T& c) { return tiles(c) < need; });
}

template <typename T, typename WarpsFn>
void PreferFourOrEightWarps(std::vector<T>& cands, WarpsFn warps) {
  if (std::any_of(cands.begin(), cands.end(), [&](const T& c) { return PreferredWarps(warps(c)); })) {
    std::erase_if(cands, [&](const T& c) { return !PreferredWarps(warps(c)); });
  }
}

int64_t AlignmentExtentIc(const StageShape& s) { return s.conv ? s.conv->ic : 0; }

}  // namespace

CostEstimate EstimateCost(const KernelConfig& c, const GemmProblem& p, const ArchSpec& arch) {
  CostEstimate e;
  const int64_t tiles = Tiles(c, p);
  const int64_t ksteps = CeilDiv(p.k, c.threadblock.k);
  e.global_bytes = tiles * (c.threadblock.m * c.threadblock.k + c.threadblock.k * c.threadblock.n) * ksteps *
                       Bytes(p.dtype_in) +
                   p.m * p.n * Bytes(p.dtype_out);
  e.math_ops = 2 * p.m * p.n * p.k;
  e.occupancy = static_cast<double>(tiles) / arch.sm_count;
  e.score = std::max(static_cast<double>(e.global_bytes) / (arch.peak_bandwidth_gbps * 1e9),
                     static_cast<double>(e.math_ops) / (arch.peak_tflops * 1e12));
  return e;
}

int64_t L2ReuseProxy(const KernelConfig& c, const GemmProblem& p, const ArchSpec& arch) {
  const int64_t tiles_m = CeilDiv(p.m, c.threadblock.m), tiles_n = CeilDiv(p.n, c.threadblock.n);
  const int64_t s = static_cast<int64_t>(c.swizzle);
  const int64_t wave = std::max(1, arch.sm_count);
  std::vector<int64_t> row_wave(tiles_m, -1), col_wave(tiles_n, -1);
  int64_t rows = 0, cols = 0;
  for (int64_t i = 0; i < tiles_m * tiles_n; ++i) {
    // Strips of `s` tile rows are walked column by column.
    const int64_t strip = i / (s * tiles_n);
    const int64_t base = strip * s;
    const int64_t h = std::min(s, tiles_m - base);
    const int64_t within = i - strip * s * tiles_n;
    const int64_t tm = base + within % h, tn = within / h;
    const int64_t w = i / wave;
    if (row_wave[tm] != w) row_wave[tm] = w, ++rows;
    if (col_wave[tn] != w) col_wave[tn] = w, ++cols;
  }
  return (rows * c.threadblock.m + cols * c.threadblock.n) * p.k;
}

std::vector<KernelConfig> EnumerateCandidates(const GemmProblem& p, const ArchSpec& arch, int64_t conv_ic,
                                              size_t cap) {
  if (p.m < 1 || p.n < 1 || p.k < 1) {
    Fail(ErrorCode::kNoValidConfig, "degenerate problem " + std::to_string(p.m) + "x" + std::to_string(p.n) +
                                        "x" + std::to_string(p.k));
  }
  const auto& instructions = arch.InstructionShapes(p.dtype_in);
  if (instructions.empty()) {
    Fail(ErrorCode::kNoValidConfig, arch.name + " has no instruction for " + std::string(DTypeName(p.dtype_in)));
  }
  const Alignment align_a = OperandAlignmentA(p, conv_ic), align_b = OperandAlignmentB(p, conv_ic);

  std::vector<KernelConfig> cands;
  for (int64_t tbm : kTbExtents) {
    if (tbm > ExtentCap(p.m)) continue;
    for (int64_t tbn : kTbExtents) {
      if (tbn > ExtentCap(p.n)) continue;
      for (int64_t tbk : kTbK) {
        if (tbk > ExtentCap(p.k)) continue;
        for (const TileShape& inst : instructions) {
          for (int64_t wm : kWarpM) {
            if (tbm % wm) continue;
            for (int64_t wn : kWarpN) {
              if (tbn % wn) continue;
              for (int st : kStages) {
                KernelConfig c;
                c.threadblock = {tbm, tbn, tbk};
                c.warp = {wm, wn, tbk};
                c.instruction = inst;
                c.stages = st;
                c.alignment_a = align_a;
                c.alignment_b = align_b;
                if (ConfigViolations(c, p, arch).empty()) cands.push_back(c);
              }
            }
          }
        }
      }
    }
  }
  if (cands.empty()) Fail(ErrorCode::kNoValidConfig, "no config on the lattice satisfies the invariants");

  PreferFourOrEightWarps(cands, [](const KernelConfig& c) { return c.WarpCount(); });
  KeepCoveringSms(cands, arch.sm_count, [&](const KernelConfig& c) { return Tiles(c, p); });

  // Swizzle only changes launch order; keep the one with the best reuse.
  std::map<std::pair<int64_t, int64_t>, std::pair<Swizzle, int64_t>> swizzle_of;
  for (auto& c : cands) {
    const auto key = std::make_pair(c.threadblock.m, c.threadblock.n);
    auto it = swizzle_of.find(key);
    if (it == swizzle_of.end()) {
      std::pair<Swizzle, int64_t> best{Swizzle::kIdentity, -1};
      for (Swizzle s : kSwizzles) {
        KernelConfig t = c;
        t.swizzle = s;
        const int64_t proxy = L2ReuseProxy(t, p, arch);
        if (best.second < 0 || proxy < best.second) best = {s, proxy};
      }
      it = swizzle_of.emplace(key, best).first;
    }
    c.swizzle = it->second.first;
  }

  struct Ranked {
    double score;
    int64_t neg_area;
    int64_t l2;
    KernelConfig config;
    auto operator<=>(const Ranked&) const = default;
  };
  std::vector<Ranked> ranked;
  for (const auto& c : cands) {
    ranked.push_back({EstimateCost(c, p, arch).score, -WarpArea(c),
                      swizzle_of.at({c.threadblock.m, c.threadblock.n}).second, c});
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<KernelConfig> out;
  for (size_t i = 0; i < ranked.size() && i < cap; ++i) out.push_back(ranked[i].config);
  return out;
}

namespace {

// Per-stage options for a shared TB_M and stage count, bucketed by warp count.
std::map<int64_t, std::vector<KernelConfig>> StageOptions(const StageShape& s, int64_t tbm, int stages,
                                                          const ArchSpec& arch) {
  std::map<int64_t, std::vector<KernelConfig>> by_warps;
  const GemmProblem& p = s.gemm;
  const int64_t tbn = p.n;
  std::vector<int64_t> warp_n;
  for (int64_t wn = tbn; wn >= 1; wn /= 2) {
    if (tbn % wn == 0 && (wn == tbn || wn >= 8)) warp_n.push_back(wn);
    if (wn % 2) break;
  }
  const int64_t ic = AlignmentExtentIc(s);
  for (int64_t tbk : kTbK) {
    if (tbk > ExtentCap(p.k)) continue;
    for (const TileShape& inst : arch.InstructionShapes(p.dtype_in)) {
      for (int64_t wm : kWarpM) {
        if (tbm % wm) continue;
        for (int64_t wn : warp_n) {
          KernelConfig c;
          c.threadblock = {tbm, tbn, tbk};
          c.warp = {wm, wn, tbk};
          c.instruction = inst;
          c.stages = stages;
          c.alignment_a = OperandAlignmentA(p, ic);
          c.alignment_b = OperandAlignmentB(p, ic);
          if (ConfigViolations(c, p, arch).empty()) by_warps[c.WarpCount()].push_back(c);
        }
      }
    }
  }
  return by_warps;
}

int64_t ChainBytes(const ChainShape& chain, const std::vector<KernelConfig>& configs) {
  int64_t bytes = 0;
  const int64_t tiles = CeilDiv(chain.front().gemm.m, configs.front().threadblock.m);
  for (size_t s = 0; s < chain.size(); ++s) {
    const TileShape& tb = configs[s].threadblock;
    const int64_t per_step = tb.k * tb.n + (s == 0 ? tb.m * tb.k : 0);
    bytes += tiles * CeilDiv(chain[s].gemm.k, tb.k) * per_step * Bytes(chain[s].gemm.dtype_in);
  }
  const GemmProblem& last = chain.back().gemm;
  return bytes + last.m * (chain.back().reduces ? 1 : last.n) * Bytes(chain.back().out_dtype);
}

}  // namespace

std::vector<GroupSchedule> EnumerateChainCandidates(const ChainShape& chain, const ArchSpec& arch, size_t cap) {
  const ChainLegality feasible = CheckChainFeasible(chain);
  if (!feasible.legal) Fail(ErrorCode::kNoLegalFusedConfig, "chain infeasible: " + Join(feasible.reasons));
  const int64_t M = chain.front().gemm.m;
  if (M < 1) Fail(ErrorCode::kNoLegalFusedConfig, "chain has no rows");

  std::vector<GroupSchedule> cands;
  std::vector<std::string> rejected;
  for (int64_t tbm : kTbExtents) {
    if (tbm > ExtentCap(M)) continue;
    for (int st : kStages) {
      std::vector<std::map<int64_t, std::vector<KernelConfig>>> options;
      for (const auto& s : chain) options.push_back(StageOptions(s, tbm, st, arch));
      for (const auto& [warps, first] : options.front()) {
        bool all = true;
        for (const auto& o : options) all = all && o.count(warps);
        if (!all) continue;
        std::vector<KernelConfig> combo(chain.size());
        auto recurse = [&](auto&& self, size_t s) -> void {
          if (s == chain.size()) {
            const FusionKind kind = SelectFusionKind(chain, combo, arch);
            if (kind == FusionKind::kNone) {
              rejected.push_back(kSmemOverBudget);
              return;
            }
            cands.push_back(GroupSchedule{combo, kind});
            return;
          }
          for (const auto& c : options[s].at(warps)) {
            combo[s] = c;
            self(self, s + 1);
          }
        };
        recurse(recurse, 0);
      }
    }
  }
  if (cands.empty()) {
    Fail(ErrorCode::kNoLegalFusedConfig,
         "no joint config fits: " + (rejected.empty() ? std::string("no per-stage config") : rejected.front()));
  }

  PreferFourOrEightWarps(cands, [](const GroupSchedule& g) { return g.configs.front().WarpCount(); });
  KeepCoveringSms(cands, arch.sm_count,
                  [&](const GroupSchedule& g) { return CeilDiv(M, g.configs.front().threadblock.m); });

  int64_t ops = 0;
  for (const auto& s : chain) ops += 2 * s.gemm.m * s.gemm.n * s.gemm.k;
  struct Ranked {
    double score;
    int64_t neg_area;
    int kind;
    std::vector<KernelConfig> configs;
    auto operator<=>(const Ranked&) const = default;
  };
  std::vector<Ranked> ranked;
  for (const auto& g : cands) {
    const double score = std::max(static_cast<double>(ChainBytes(chain, g.configs)) / (arch.peak_bandwidth_gbps * 1e9),
                                  static_cast<double>(ops) / (arch.peak_tflops * 1e12));
    int64_t area = 0;
    for (const auto& c : g.configs) area += WarpArea(c);
    ranked.push_back({score, -area, static_cast<int>(g.kind), g.configs});
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<GroupSchedule> out;
  for (size_t i = 0; i < ranked.size() && i < cap; ++i) {
    out.push_back(GroupSchedule{ranked[i].configs, static_cast<FusionKind>(ranked[i].kind)});
  }
  return out;
}

int64_t MeasuredCost(const ExecCounters& c, int64_t launch_weight) {
  return c.GlobalBytes() + c.kernel_launches * launch_weight;
}

namespace {

// Rule tag of the first reason `cand` cannot run for `group`, or empty.
std::string CandidateIssue(const Graph& graph, const Group& group, const GroupSchedule& cand,
                           const ArchSpec& arch) {
  const auto stages = group.Stages();
  if (cand.configs.size() != stages.size()) return kConfigCount;
  for (size_t s = 0; s < stages.size(); ++s) {
    const auto v = ConfigViolations(cand.configs[s], AnchorGemm(graph, *graph.FindNode(stages[s].anchor)), arch);
    if (!v.empty()) return v.front();
  }
  if (group.kind != GroupKind::kChain) return {};
  const ChainShape shape = ChainShapeOf(group.chain, graph);
  const ChainLegality verdict = CheckChain(shape, cand.configs, arch);
  if (!verdict.legal) return verdict.reasons.front();
  if (cand.kind == FusionKind::kNone) return kSmemOverBudget;
  if (cand.kind == FusionKind::kRFResident && verdict.kind != FusionKind::kRFResident) return "RF_NOT_ELIGIBLE";
  return {};
}

}  // namespace

ProfileReport Profile(const Graph& graph, const Group& group, const std::vector<GroupSchedule>& candidates,
                      const ArchSpec& arch, const TunerOptions& options) {
  const TensorMap values = ShapeOnlyValues(graph);
  ExecOptions exec;
  exec.measure_only = true;
  ProfileReport report;
  const CandidateReport* best = nullptr;
  for (const auto& cand : candidates) {
    CandidateReport r;
    r.schedule = cand;
    r.skipped = CandidateIssue(graph, group, cand, arch);
    if (r.skipped.empty()) {
      r.counters = RunGroup(graph, group, cand, values, exec).counters;
      r.cost = MeasuredCost(r.counters, options.launch_weight);
    }
    report.candidates.push_back(std::move(r));
  }
  for (const auto& r : report.candidates) {
    if (!r.skipped.empty()) continue;
    if (!best || std::tie(r.cost, r.counters.smem_bytes_moved, r.counters.smem_bank_conflicts, r.schedule.configs) <
                     std::tie(best->cost, best->counters.smem_bytes_moved, best->counters.smem_bank_conflicts,
                              best->schedule.configs)) {
      best = &r;
    }
  }
  if (!best) {
    const std::string why = candidates.empty() ? "no candidates" : report.candidates.front().skipped;
    Fail(group.kind == GroupKind::kChain ? ErrorCode::kNoLegalFusedConfig : ErrorCode::kNoValidConfig,
         "group '" + group.id + "': " + why);
  }
  report.best = best->schedule;
  return report;
}

GroupTuning TuneGroup(const Graph& graph, const Group& group, const ArchSpec& arch, const TunerOptions& options) {
  std::vector<GroupSchedule> cands;
  if (group.kind == GroupKind::kChain) {
    cands = EnumerateChainCandidates(ChainShapeOf(group.chain, graph), arch, options.max_candidates);
  } else {
    const OpNode* anchor = graph.FindNode(group.pattern.anchor);
    const int64_t ic = anchor->kind == OpKind::kConv2d ? Conv2dProblemOf(graph, *anchor).ic : 0;
    for (const auto& c : EnumerateCandidates(AnchorGemm(graph, *anchor), arch, ic, options.max_candidates)) {
      cands.push_back(GroupSchedule{{c}, FusionKind::kNone});
    }
  }
  GroupTuning t;
  t.enumerated = cands.size();
  t.report = Profile(graph, group, cands, arch, options);
  return t;
}

TuneResult TunePartition(const Graph& graph, const Partition& partition, const ArchSpec& arch,
                         const TunerOptions& options) {
  TuneResult result;
  result.partition = partition;
  for (;;) {
    const Group* next = nullptr;
    for (const auto& g : result.partition.groups) {
      if (!result.schedule.count(g.id)) {
        next = &g;
        break;
      }
    }
    if (!next) break;
    try {
      GroupTuning t = TuneGroup(graph, *next, arch, options);
      result.schedule[next->id] = t.report.best;
      result.groups[next->id] = std::move(t);
    } catch (const Error& e) {
      if (next->kind != GroupKind::kChain || e.code() != ErrorCode::kNoLegalFusedConfig) throw;
      const std::string id = next->id;
      result.demoted.push_back({id, e.what()});
      result.partition = DemoteChain(result.partition, id, graph);
    }
  }
  return result;
}

}  // namespace bolt
