// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// Computational-graph IR: tensor types, operator nodes, type inference, and
// the convolution to implicit-GEMM problem mapping.

#ifndef BOLT_GRAPH_H_
#define BOLT_GRAPH_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bolt/dtype.h"

namespace bolt {

using Shape = std::vector<int64_t>;

struct TensorType {
  Shape shape;
  DType dtype = DType::kFP16;
  Layout layout = Layout::kRowMajor;

  int64_t NumElements() const;
  int64_t NumBytes() const { return NumElements() * Bytes(dtype); }
  int rank() const { return static_cast<int>(shape.size()); }
  /// Index of the channel ("column") axis: last axis except for NCHW.
  int ChannelAxis() const;
  int64_t Channels() const { return shape[ChannelAxis()]; }

  bool operator==(const TensorType&) const = default;
};

std::string ToString(const TensorType& t);

enum class OpKind {
  kGemm,
  kConv2d,
  kBiasAdd,
  kReLU,
  kGELU,
  kHardswish,
  kSoftplus,
  kDTypeConvert,
  kBroadcastColumns,
  kReduceColumns,
  kLayoutTransform,
  kPad,
  kSoftmax,
};

std::string_view OpKindName(OpKind k);
OpKind ParseOpKind(std::string_view s);

/// True for the kinds that may be folded into a GEMM/Conv epilogue.
bool IsEpilogueKind(OpKind k);
bool IsAnchorKind(OpKind k);

using Pair = std::array<int64_t, 2>;

struct OpAttrs {
  // Conv2d
  Pair kernel{1, 1};
  Pair stride{1, 1};
  Pair padding{0, 0};
  Pair dilation{1, 1};
  // Gemm: D = alpha * A.B + beta * C
  float alpha = 1.0f;
  float beta = 0.0f;
  // DTypeConvert
  DType to_dtype = DType::kFP32;
  // LayoutTransform
  Layout to_layout = Layout::kNHWC;
  // Pad: new channel extent
  int64_t pad_to = 0;
  // Set by the layout pass: which inputs are graph inputs stored NCHW that the
  // kernel reads through an NCHW->NHWC gather, and whether the node's result
  // is written back NCHW.
  std::vector<int> nchw_inputs;
  bool nchw_output = false;

  bool operator==(const OpAttrs&) const = default;
};

struct OpNode {
  std::string id;
  OpKind kind = OpKind::kReLU;
  OpAttrs attrs;
  std::vector<std::string> inputs;
  std::optional<TensorType> type;  // filled by InferTypes

  bool operator==(const OpNode&) const = default;
};

enum class ParamKind {
  kWeight,         // model parameter with given values
  kPaddedWeight,   // zero-padded copy of another weight along its channel axis
  kPaddedBuffer,   // pre-allocated activation buffer written by a Pad node
};

struct ValueInfo {
  std::string name;
  TensorType type;
  ParamKind param_kind = ParamKind::kWeight;
  std::string derived_from;  // source weight for kPaddedWeight

  bool operator==(const ValueInfo&) const = default;
};

struct Graph {
  std::vector<ValueInfo> inputs;
  std::vector<ValueInfo> params;
  std::vector<OpNode> nodes;
  std::vector<std::string> outputs;

  const OpNode* FindNode(std::string_view id) const;
  OpNode* FindNode(std::string_view id);
  const ValueInfo* FindInput(std::string_view name) const;
  const ValueInfo* FindParam(std::string_view name) const;
  bool IsParam(std::string_view name) const { return FindParam(name) != nullptr; }
  bool IsGraphOutput(std::string_view id) const;

  /// Type of a node result, graph input or parameter. Nodes must be typed.
  const TensorType& TypeOf(std::string_view name) const;

  /// Node ids consuming `name`, one entry per consuming node, sorted by id.
  std::vector<std::string> Consumers(std::string_view name) const;
  /// Consumer count plus one if `name` is a graph output.
  int Uses(std::string_view name) const;

  bool operator==(const Graph&) const = default;
};

struct GemmProblem {
  int64_t m = 0, n = 0, k = 0;
  DType dtype_in = DType::kFP16;
  DType dtype_acc = DType::kFP32;
  DType dtype_out = DType::kFP16;
  Layout layout_a = Layout::kRowMajor;
  Layout layout_b = Layout::kRowMajor;
  Layout layout_c = Layout::kRowMajor;

  int64_t Macs() const { return m * n * k; }
  bool operator==(const GemmProblem&) const = default;
};

struct Conv2dProblem {
  int64_t n = 0, h = 0, w = 0, ic = 0, oc = 0;
  Pair kernel{1, 1};
  Pair stride{1, 1};
  Pair padding{0, 0};
  DType dtype_in = DType::kFP16;
  DType dtype_acc = DType::kFP32;
  DType dtype_out = DType::kFP16;
  Layout layout = Layout::kNHWC;

  int64_t OutH() const;
  int64_t OutW() const;
  bool operator==(const Conv2dProblem&) const = default;
};

/// Output extent of a strided window: floor((in + 2*pad - k) / stride) + 1.
/// Throws ShapeMismatch when the window does not fit.
int64_t ConvOutExtent(int64_t in, int64_t k, int64_t stride, int64_t pad);

/// M = N*P*Q, N = OC, K = R*S*IC.
GemmProblem Conv2dAsImplicitGemm(const Conv2dProblem& p);

/// Deterministic topological order, ties broken by node id.
std::vector<std::string> TopoOrder(const Graph& graph);

/// Annotates every node with its result type. Idempotent.
Graph InferTypes(Graph graph);

/// Problem descriptors for typed anchor nodes.
GemmProblem GemmProblemOf(const Graph& graph, const OpNode& node);
Conv2dProblem Conv2dProblemOf(const Graph& graph, const OpNode& node);
/// GEMM coordinates of any anchor (implicit GEMM for convolutions).
GemmProblem AnchorGemm(const Graph& graph, const OpNode& node);

}  // namespace bolt

#endif  // BOLT_GRAPH_H_
