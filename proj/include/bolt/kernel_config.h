// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// Architecture descriptors and template parameters of a tiled kernel.

#ifndef BOLT_KERNEL_CONFIG_H_
#define BOLT_KERNEL_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bolt/dtype.h"
#include "bolt/graph.h"
#include "json.hpp"

namespace bolt {

struct TileShape {
  int64_t m = 0, n = 0, k = 0;

  auto operator<=>(const TileShape&) const = default;
};

std::string ToString(const TileShape& s);

struct ArchSpec {
  std::string name;
  int sm_count = 0;
  int64_t smem_bytes_per_threadblock = 0;
  int registers_per_thread = 255;
  int64_t registers_per_threadblock = 0;
  int warp_size = 32;
  int max_threads_per_threadblock = 0;
  /// Tensor-core (or SIMT, 1x1x1) instruction shapes per input dtype.
  std::map<DType, std::vector<TileShape>> instruction_shapes;
  bool tensor_cores = true;
  double peak_bandwidth_gbps = 0;
  double peak_tflops = 0;
  std::string sm_tag;  // e.g. "Sm75", used in emitted source

  const std::vector<TileShape>& InstructionShapes(DType t) const;
};

/// Throws ParseError when a field is missing or a capacity is non-positive.
ArchSpec ArchSpecFromJson(const nlohmann::json& j);
nlohmann::json ArchSpecToJson(const ArchSpec& a);
ArchSpec LoadArchSpec(const std::string& path);

/// Bundled descriptors: "sm75-t4-like" and "sm80-a100-like".
ArchSpec BundledArch(const std::string& name);

enum class Swizzle { kIdentity = 1, k2 = 2, k4 = 4, k8 = 8 };

/// Elements per vectorized access.
using Alignment = int;

/// Largest a in {8,4,2,1} dividing `extent` with a * bits(dtype) <= 128.
Alignment ComputeAlignment(int64_t extent, DType dtype);

struct KernelConfig {
  TileShape threadblock;
  TileShape warp;
  TileShape instruction;
  int stages = 2;
  Swizzle swizzle = Swizzle::kIdentity;
  Alignment alignment_a = 1;
  Alignment alignment_b = 1;

  int64_t WarpCount() const;
  /// stages * (TB_M*TB_K + TB_K*TB_N) * bytes(dtype)
  int64_t OperandSmemBytes(DType dtype) const;
  /// 32-bit accumulators per thread for one warp tile.
  int64_t AccumulatorRegisters(int warp_size = 32) const;

  auto operator<=>(const KernelConfig&) const = default;
};

std::string ToString(const KernelConfig& c);
nlohmann::json KernelConfigToJson(const KernelConfig& c);
KernelConfig KernelConfigFromJson(const nlohmann::json& j);

/// Rule tags of every violated KernelConfig invariant (empty when valid).
/// `problem` supplies the alignment extents (contiguous dims of A and B).
std::vector<std::string> ConfigViolations(const KernelConfig& c, const GemmProblem& problem,
                                          const ArchSpec& arch);

/// Alignment of the A and B operands for a problem. For convolutions the
/// contiguous extent of both operands is IC.
Alignment OperandAlignmentA(const GemmProblem& p, int64_t conv_ic = 0);
Alignment OperandAlignmentB(const GemmProblem& p, int64_t conv_ic = 0);

}  // namespace bolt

#endif  // BOLT_KERNEL_CONFIG_H_
