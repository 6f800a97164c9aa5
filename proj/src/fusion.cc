// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/fusion.h"

#include <algorithm>

#include "bolt/error.h"

namespace bolt {

std::string_view FusionKindName(FusionKind k) {
  switch (k) {
    case FusionKind::kRFResident: return "rf_resident";
    case FusionKind::kSmemResident: return "smem_resident";
    case FusionKind::kNone: return "none";
  }
  return "none";
}

FusionKind ParseFusionKind(std::string_view s) {
  if (s == "rf_resident") return FusionKind::kRFResident;
  if (s == "smem_resident") return FusionKind::kSmemResident;
  if (s == "none") return FusionKind::kNone;
  Fail(ErrorCode::kParseError, "unknown fusion kind '" + std::string(s) + "'");
}

ChainShape ChainShapeOf(const PersistentChain& chain, const Graph& graph) {
  ChainShape shape;
  for (size_t i = 0; i < chain.stages.size(); ++i) {
    const OpNode* anchor = graph.FindNode(chain.stages[i].anchor);
    StageShape s;
    s.anchor = anchor->kind;
    s.gemm = AnchorGemm(graph, *anchor);
    if (anchor->kind == OpKind::kConv2d) s.conv = Conv2dProblemOf(graph, *anchor);
    s.activation_linked = i == 0 || anchor->inputs[0] == chain.stages[i - 1].Output();
    const OpNode* out = graph.FindNode(chain.stages[i].Output());
    s.out_dtype = out->type->dtype;
    s.reduces = out->kind == OpKind::kReduceColumns;
    shape.push_back(std::move(s));
  }
  return shape;
}

namespace {

void CheckCommon(const ChainShape& chain, OpKind kind, ChainLegality& out) {
  if (chain.size() < 2) out.Reject(kChainTooShort);
  for (const auto& s : chain) {
    if (s.anchor != kind) {
      out.Reject(kMixedAnchors);
      return;
    }
  }
}

}  // namespace

ChainLegality CheckB2bGemm(const ChainShape& chain) {
  ChainLegality out;
  CheckCommon(chain, OpKind::kGemm, out);
  if (!out.legal) return out;
  bool m_bad = false, act_bad = false;
  for (size_t i = 1; i < chain.size(); ++i) {
    const GemmProblem& prev = chain[i - 1].gemm;
    const GemmProblem& cur = chain[i].gemm;
    if (cur.m != prev.m) m_bad = true;
    // D(i-1) is M x N(i-1) and must be the A operand of stage i.
    if (!chain[i].activation_linked || chain[i - 1].reduces || cur.k != prev.n ||
        cur.dtype_in != chain[i - 1].out_dtype) {
      act_bad = true;
    }
  }
  if (m_bad) out.Reject(kMMismatch);
  if (act_bad) out.Reject(kActivationShape);
  return out;
}

ChainLegality CheckB2bConv(const ChainShape& chain) {
  ChainLegality out;
  CheckCommon(chain, OpKind::kConv2d, out);
  if (!out.legal) return out;
  bool filter = false, pad = false, stride = false, channels = false, act = false;
  for (size_t i = 1; i < chain.size(); ++i) {
    const Conv2dProblem& prev = *chain[i - 1].conv;
    const Conv2dProblem& cur = *chain[i].conv;
    if (cur.kernel != Pair{1, 1}) filter = true;
    if (cur.padding != Pair{0, 0}) pad = true;
    if (cur.stride != Pair{1, 1}) stride = true;
    if (cur.ic != prev.oc) channels = true;
    if (!chain[i].activation_linked || chain[i - 1].reduces || cur.dtype_in != chain[i - 1].out_dtype) {
      act = true;
    }
  }
  if (filter) out.Reject(kFilterNot1x1);
  if (pad) out.Reject(kPaddingNot0);
  if (stride) out.Reject(kStrideNot1);
  if (channels) out.Reject(kChannelMismatch);
  if (act) out.Reject(kActivationShape);
  return out;
}

ChainLegality CheckStructure(const ChainShape& chain) {
  if (chain.empty()) {
    ChainLegality out;
    out.Reject(kChainTooShort);
    return out;
  }
  return chain.front().anchor == OpKind::kConv2d ? CheckB2bConv(chain) : CheckB2bGemm(chain);
}

ChainLegality CheckThreadblockResidence(const ChainShape& chain, const std::vector<KernelConfig>& configs) {
  ChainLegality out;
  if (configs.size() != chain.size()) {
    out.Reject(kConfigCount);
    return out;
  }
  bool n_bad = false, m_bad = false;
  for (size_t i = 0; i < chain.size(); ++i) {
    if (configs[i].threadblock.n != chain[i].gemm.n) n_bad = true;
    if (configs[i].threadblock.m != configs[0].threadblock.m) m_bad = true;
  }
  if (n_bad) out.Reject(kTbNNeqGemmN);
  if (m_bad) out.Reject(kTbMMismatch);
  return out;
}

int64_t StagingStride(int64_t n) {
  if (n <= 8) return 8;
  return ((n + 7) / 16) * 16 + 8;
}

int64_t StagingBytes(const ChainShape& chain, const std::vector<KernelConfig>& configs) {
  int64_t widest = 0;
  for (size_t i = 0; i + 1 < chain.size(); ++i) widest = std::max(widest, chain[i].gemm.n);
  if (widest == 0) return 0;
  return configs.front().threadblock.m * StagingStride(widest) * Bytes(DType::kFP32);
}

int64_t ChainSmemBytes(const ChainShape& chain, const std::vector<KernelConfig>& configs) {
  int64_t operands = 0;
  for (size_t i = 0; i < chain.size(); ++i) {
    operands = std::max(operands, configs[i].OperandSmemBytes(chain[i].gemm.dtype_in));
  }
  return operands + StagingBytes(chain, configs);
}

int64_t ChainAccumulatorRegisters(const std::vector<KernelConfig>& configs, int warp_size) {
  int64_t regs = 0;
  for (const auto& c : configs) regs += c.AccumulatorRegisters(warp_size);
  return regs;
}

FusionKind SelectFusionKind(const ChainShape& chain, const std::vector<KernelConfig>& configs,
                            const ArchSpec& arch) {
  if (!CheckThreadblockResidence(chain, configs).legal) return FusionKind::kNone;
  if (ChainSmemBytes(chain, configs) > arch.smem_bytes_per_threadblock) return FusionKind::kNone;
  bool warp_spans_n = true;
  for (size_t i = 0; i < chain.size(); ++i) {
    const KernelConfig& c = configs[i];
    if (c.warp.n != c.threadblock.n || c.threadblock.n != chain[i].gemm.n) warp_spans_n = false;
  }
  if (warp_spans_n && ChainAccumulatorRegisters(configs, arch.warp_size) <= arch.registers_per_thread) {
    return FusionKind::kRFResident;
  }
  return FusionKind::kSmemResident;
}

ChainLegality CheckChainFeasible(const ChainShape& chain) {
  ChainLegality out = CheckStructure(chain);
  if (!out.legal) return out;
  for (const auto& s : chain) {
    if (s.gemm.n > kMaxThreadblockN) {
      out.Reject(kTbNExceedsMax);
      break;
    }
  }
  return out;
}

std::vector<PersistentChain> SplitFeasible(const PersistentChain& chain, const Graph& graph) {
  const ChainShape shape = ChainShapeOf(chain, graph);
  auto feasible = [&](size_t b, size_t e) {
    return CheckChainFeasible(ChainShape(shape.begin() + b, shape.begin() + e)).legal;
  };
  std::vector<PersistentChain> out;
  size_t i = 0;
  while (i + 1 < shape.size()) {
    size_t end = i + 1;
    while (end < shape.size() && feasible(i, end + 1)) ++end;
    if (end - i >= 2) {
      PersistentChain seg;
      seg.stages.assign(chain.stages.begin() + i, chain.stages.begin() + end);
      out.push_back(std::move(seg));
      i = end;
    } else {
      ++i;
    }
  }
  return out;
}

ChainLegality CheckChain(const ChainShape& chain, const std::vector<KernelConfig>& configs,
                         const ArchSpec& arch) {
  ChainLegality out = CheckStructure(chain);
  if (!out.legal) return out;
  out = CheckThreadblockResidence(chain, configs);
  if (!out.legal) return out;
  out.kind = SelectFusionKind(chain, configs, arch);
  if (out.kind == FusionKind::kNone) out.Reject(kSmemOverBudget);
  return out;
}

}  // namespace bolt
