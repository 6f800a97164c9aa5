// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// CPU tiled-execution oracle. Kernels walk the global -> shared memory
// (threadblock tile) -> register (warp tile) hierarchy of a KernelConfig,
// produce bit-exact results against naive references, and count global and
// shared-memory traffic, bank conflicts and kernel launches.
//
// Accumulation contract: every output element accumulates its products in
// FP32 in ascending k order, in both the tiled and the reference paths.

#ifndef BOLT_EXECUTOR_H_
#define BOLT_EXECUTOR_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bolt/fusion.h"
#include "bolt/graph.h"
#include "bolt/kernel_config.h"
#include "bolt/partition.h"
#include "json.hpp"

namespace bolt {

struct Tensor {
  TensorType type;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(TensorType t) : type(std::move(t)), data(static_cast<size_t>(type.NumElements()), 0.f) {}
};

using TensorMap = std::map<std::string, Tensor>;

struct ExecCounters {
  int64_t global_bytes_read = 0;
  int64_t global_bytes_written = 0;
  int64_t smem_bytes_moved = 0;
  int64_t smem_bank_conflicts = 0;
  int64_t kernel_launches = 0;
  int64_t mac_ops = 0;
  int64_t pad_fill_bytes = 0;  // zero-fill writes of padded channels (subset of written)

  int64_t GlobalBytes() const { return global_bytes_read + global_bytes_written; }
  ExecCounters& operator+=(const ExecCounters& o);
  bool operator==(const ExecCounters&) const = default;
};

nlohmann::json CountersToJson(const ExecCounters& c);

struct EpilogueOp {
  OpKind kind = OpKind::kReLU;
  DType out_dtype = DType::kFP16;
  const Tensor* vector = nullptr;  // BiasAdd / BroadcastColumns operand
};

/// out = ops(round(alpha * acc + beta * C)); each op rounds to its own dtype.
/// A trailing ReduceColumns sums each output row into an FP32 vector.
struct Epilogue {
  float alpha = 1.0f;
  float beta = 0.0f;
  const Tensor* source = nullptr;  // C, M x N
  DType anchor_dtype = DType::kFP16;
  std::vector<EpilogueOp> ops;

  bool Reduces() const { return !ops.empty() && ops.back().kind == OpKind::kReduceColumns; }
  DType OutputDType() const { return ops.empty() ? anchor_dtype : ops.back().out_dtype; }
};

/// Scalar element-wise semantics shared by kernels and references.
float ApplyElementwise(OpKind kind, float x, float operand);

struct ExecOptions {
  bool measure_only = false;   // walk and count without arithmetic
  bool padded_staging = true;  // bank-conflict-free staging stride
};

struct KernelResult {
  Tensor output;  // empty in measure-only mode
  ExecCounters counters;
};

/// Naive triple loop. Throws ShapeMismatch.
Tensor ReferenceGemm(const GemmProblem& problem, const Tensor& a, const Tensor& b, const Epilogue& epilogue);

/// Direct convolution. `x` is NHWC, or NCHW when `input_nchw`; filters are
/// [OC, R, S, IC]. Output NHWC.
Tensor ReferenceConv2d(const Conv2dProblem& problem, const Tensor& x, const Tensor& w, const Epilogue& epilogue,
                       bool input_nchw = false);

/// Tile-structure checks the executor needs (ConfigInvalid otherwise).
void CheckTiling(const KernelConfig& config);

KernelResult RunGemm(const GemmProblem& problem, const KernelConfig& config, const Tensor& a, const Tensor& b,
                     const Epilogue& epilogue, const ExecOptions& options = {});

KernelResult RunConv2d(const Conv2dProblem& problem, const KernelConfig& config, const Tensor& x,
                       const Tensor& w, const Epilogue& epilogue, bool input_nchw = false,
                       const ExecOptions& options = {});

struct ChainOperands {
  const Tensor* activation = nullptr;  // stage-0 operand A (or conv input)
  bool activation_nchw = false;
  std::vector<const Tensor*> weights;  // per stage
  std::vector<Epilogue> epilogues;     // per stage
};

/// One persistent kernel: inter-stage activations stay on chip. Throws
/// IllegalFusion when (chain, configs, kind) violates structure or residence.
KernelResult RunChainFused(const ChainShape& chain, const std::vector<KernelConfig>& configs, FusionKind kind,
                           const ChainOperands& operands, const ExecOptions& options = {});

/// The same stages as separate kernels through global memory.
KernelResult RunChainUnfused(const ChainShape& chain, const std::vector<KernelConfig>& configs,
                             const ChainOperands& operands, const ExecOptions& options = {});

/// Bank conflicts of storing then loading one FP32 staging tile, with rows of
/// `stride` words; each half-warp access vector covers 4 rows x 8 words.
int64_t StagingBankConflicts(int64_t tb_m, int64_t tb_n, int64_t stride);

// ---------------------------------------------------------------------------
// Whole-graph execution.

struct GroupSchedule {
  std::vector<KernelConfig> configs;  // one per stage
  FusionKind kind = FusionKind::kNone;

  bool operator==(const GroupSchedule&) const = default;
};

using Schedule = std::map<std::string, GroupSchedule>;

/// Seeded values for graph inputs and weight parameters; uniform in [-1, 1]
/// (integers in [-4, 4] for INT8), quantized to each dtype.
TensorMap MakeRandomValues(const Graph& graph, uint64_t seed);

/// Adds zero-padded copies for kPaddedWeight parameters.
void MaterializeDerivedParams(const Graph& graph, TensorMap& values);

/// Builds the executable epilogue of a pattern from graph values.
Epilogue BuildEpilogue(const Graph& graph, const EpiloguePattern& pattern, const TensorMap& values);

/// Evaluates one node naively; honours NCHW-gather flags on inputs.
Tensor EvalNodeNaive(const Graph& graph, const OpNode& node, const TensorMap& values);

/// Node-by-node naive evaluation of a typed graph. Results are keyed by
/// output id in the graph's declared output layout.
TensorMap ReferenceGraph(const Graph& graph, const TensorMap& values);

struct GraphRun {
  TensorMap outputs;
  ExecCounters total;
  std::map<std::string, ExecCounters> per_unit;  // group id or fallback node id
};

/// Executes groups as tiled kernels and fallback nodes as one host kernel
/// each, in dependency order. Missing schedules throw MissingPlan.
GraphRun RunGraph(const Graph& graph, const Partition& partition, const Schedule& schedule,
                  const TensorMap& values, const ExecOptions& options = {});

/// Runs one partition group as a single tiled kernel (fused for chains).
KernelResult RunGroup(const Graph& graph, const Group& group, const GroupSchedule& schedule,
                      const TensorMap& values, const ExecOptions& options = {});

/// Typed, data-less tensors for every input, parameter and node result;
/// enough for measure-only runs.
TensorMap ShapeOnlyValues(const Graph& graph);

/// Execution order of groups and fallback nodes (unit ids).
std::vector<std::string> UnitOrder(const Graph& graph, const Partition& partition);

struct Mismatch {
  bool equal = true;
  std::string output;
  int64_t index = -1;
  std::vector<int64_t> coords;
  float expected = 0, actual = 0;
};

/// First bitwise difference between two output maps.
Mismatch CompareOutputs(const TensorMap& expected, const TensorMap& actual);

}  // namespace bolt

#endif  // BOLT_EXECUTOR_H_
