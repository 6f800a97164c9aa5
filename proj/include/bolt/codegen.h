// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic emission of CUTLASS-convention template instantiations and of
// the runtime manifest binding partition groups to kernel plans. The emitted
// text is a contract checked by snapshots; nothing here compiles it.

#ifndef BOLT_CODEGEN_H_
#define BOLT_CODEGEN_H_

#include <optional>
#include <string>
#include <vector>

#include "bolt/executor.h"
#include "bolt/fusion.h"
#include "bolt/graph.h"
#include "bolt/kernel_config.h"
#include "bolt/layout_pad.h"
#include "bolt/partition.h"
#include "json.hpp"

namespace bolt {

inline constexpr std::string_view kManifestSchema = "bolt-manifest/1";

enum class PatternKind { kBare, kEpilogue, kChain };

std::string_view PatternKindName(PatternKind k);
/// Throws UnsupportedPattern.
PatternKind ParsePatternKind(std::string_view s);

struct StagePlan {
  OpKind anchor = OpKind::kGemm;
  GemmProblem gemm;
  std::optional<Conv2dProblem> conv;
  KernelConfig config;
  std::vector<OpKind> epilogue;  // fused element-wise tail
  DType out_dtype = DType::kFP16;

  bool operator==(const StagePlan&) const = default;
};

struct KernelPlan {
  std::string group;
  PatternKind pattern = PatternKind::kBare;
  FusionKind fusion = FusionKind::kNone;
  std::vector<StagePlan> stages;
  std::string arch_tag;       // e.g. "Sm75"
  bool nchw_input = false;    // first kernel gathers an NCHW model input
  bool nchw_output = false;   // last kernel scatters an NCHW model output
  int64_t padded_from = 0;    // original input channels when padded, else 0
  std::string symbol;

  bool operator==(const KernelPlan&) const = default;
};

nlohmann::json KernelPlanToJson(const KernelPlan& plan);
KernelPlan KernelPlanFromJson(const nlohmann::json& j);

/// bolt_<pattern>_<M>x<N>x<K>_<tbM>x<tbN>x<tbK>_<hash8>, hashed over every
/// plan field except the symbol itself.
std::string PlanSymbol(const KernelPlan& plan);

/// One plan per group, in partition order. Throws MissingPlan when a group
/// has no schedule.
std::vector<KernelPlan> MakePlans(const Graph& graph, const Partition& partition, const Schedule& schedule,
                                  const std::vector<PadPlan>& pads, const ArchSpec& arch);

/// Schedule recovered from plans (group id -> configs and fusion kind).
Schedule ScheduleFromPlans(const std::vector<KernelPlan>& plans);

/// Throws UnsupportedPattern.
std::string EmitKernelSource(const KernelPlan& plan);
/// File name of a plan's emitted source.
std::string SourceFileName(const KernelPlan& plan);

struct RuntimeManifest {
  std::string arch;
  std::string graph_checksum;
  std::vector<KernelPlan> plans;
  std::vector<ValueInfo> params;
  std::vector<std::string> fallback;
  std::vector<PadPlan> pads;

  bool operator==(const RuntimeManifest&) const = default;
};

/// Throws MissingPlan unless every group has exactly one plan.
RuntimeManifest BuildManifest(const Graph& graph, const Partition& partition, const std::vector<KernelPlan>& plans,
                              const std::vector<PadPlan>& pads, const ArchSpec& arch);
nlohmann::json ManifestToJson(const RuntimeManifest& m);
/// Throws ParseError (schema, structure) or UnsupportedPattern.
RuntimeManifest ManifestFromJson(const nlohmann::json& j);
/// Two-space indented JSON with sorted keys and a trailing newline.
std::string EmitManifest(const RuntimeManifest& m);

}  // namespace bolt

#endif  // BOLT_CODEGEN_H_
