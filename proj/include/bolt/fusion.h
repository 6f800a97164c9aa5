// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// Legality of persistent-kernel fusion for back-to-back GEMM/Conv chains and
// selection between register-file and shared-memory resident designs.

#ifndef BOLT_FUSION_H_
#define BOLT_FUSION_H_

#include <optional>
#include <string>
#include <vector>

#include "bolt/graph.h"
#include "bolt/kernel_config.h"
#include "bolt/partition.h"

namespace bolt {

enum class FusionKind { kRFResident, kSmemResident, kNone };

std::string_view FusionKindName(FusionKind k);
FusionKind ParseFusionKind(std::string_view s);

struct ChainLegality {
  bool legal = true;
  FusionKind kind = FusionKind::kNone;
  std::vector<std::string> reasons;  // non-empty iff !legal

  void Reject(std::string reason) {
    legal = false;
    reasons.push_back(std::move(reason));
  }
};

/// Rule tags.
inline constexpr const char* kMMismatch = "M_MISMATCH";
inline constexpr const char* kActivationShape = "ACTIVATION_SHAPE";
inline constexpr const char* kFilterNot1x1 = "FILTER_NOT_1x1";
inline constexpr const char* kPaddingNot0 = "PADDING_NOT_0";
inline constexpr const char* kStrideNot1 = "STRIDE_NOT_1";
inline constexpr const char* kChannelMismatch = "CHANNEL_MISMATCH";
inline constexpr const char* kMixedAnchors = "MIXED_ANCHORS";
inline constexpr const char* kChainTooShort = "CHAIN_TOO_SHORT";
inline constexpr const char* kTbNNeqGemmN = "TB_N_NEQ_GEMM_N";
inline constexpr const char* kTbMMismatch = "TB_M_MISMATCH";
inline constexpr const char* kTbNExceedsMax = "TB_N_EXCEEDS_MAX";
inline constexpr const char* kConfigCount = "CONFIG_COUNT";
inline constexpr const char* kSmemOverBudget = "SMEM_OVER_BUDGET";

/// Widest threadblock N the templates instantiate.
inline constexpr int64_t kMaxThreadblockN = 256;

/// One stage of a chain in problem coordinates.
struct StageShape {
  OpKind anchor = OpKind::kGemm;
  GemmProblem gemm;                  // implicit GEMM for convolutions
  std::optional<Conv2dProblem> conv;
  bool activation_linked = true;     // previous stage output is this stage's operand A
  DType out_dtype = DType::kFP16;    // dtype of the stage's final epilogue result
  bool reduces = false;              // epilogue ends in ReduceColumns
};

using ChainShape = std::vector<StageShape>;

ChainShape ChainShapeOf(const PersistentChain& chain, const Graph& graph);

ChainLegality CheckB2bGemm(const ChainShape& chain);
ChainLegality CheckB2bConv(const ChainShape& chain);
/// Dispatches on anchor kind.
ChainLegality CheckStructure(const ChainShape& chain);

/// Every stage keeps its whole output row band resident: TB_N == GEMM_N
/// (OC for convolutions) and all stages share TB_M.
ChainLegality CheckThreadblockResidence(const ChainShape& chain, const std::vector<KernelConfig>& configs);

/// Smallest odd multiple of 8 that is >= n; row stride (elements) of the
/// shared-memory staging tile.
int64_t StagingStride(int64_t n);
/// Bytes of the FP32 staging tile shared by all junctions of the chain.
int64_t StagingBytes(const ChainShape& chain, const std::vector<KernelConfig>& configs);
/// Largest per-stage operand footprint plus the staging tile.
int64_t ChainSmemBytes(const ChainShape& chain, const std::vector<KernelConfig>& configs);
/// Per-thread accumulator registers summed over all stages.
int64_t ChainAccumulatorRegisters(const std::vector<KernelConfig>& configs, int warp_size = 32);

/// Requires residence. RFResident when every stage has
/// Warp_N == TB_N == GEMM_N, the summed accumulators fit the register budget
/// and the smem footprint fits; SmemResident when only the footprint fits;
/// otherwise None.
FusionKind SelectFusionKind(const ChainShape& chain, const std::vector<KernelConfig>& configs,
                            const ArchSpec& arch);

/// Structure plus residence feasibility before tuning (every GEMM_N fits in
/// one threadblock column).
ChainLegality CheckChainFeasible(const ChainShape& chain);

/// Maximal feasible sub-chains (two or more stages), taken greedily from the
/// front. Stages outside every segment run as their own epilogue groups.
std::vector<PersistentChain> SplitFeasible(const PersistentChain& chain, const Graph& graph);

/// Structure, residence and fusion kind for concrete configs. `kind` is set
/// on legal verdicts.
ChainLegality CheckChain(const ChainShape& chain, const std::vector<KernelConfig>& configs,
                         const ArchSpec& arch);

}  // namespace bolt

#endif  // BOLT_FUSION_H_
