// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/graph.h"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "bolt/error.h"

namespace bolt {

int64_t TensorType::NumElements() const {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

int TensorType::ChannelAxis() const {
  if (rank() == 4 && layout == Layout::kNCHW) return 1;
  return rank() - 1;
}

std::string ToString(const TensorType& t) {
  std::ostringstream os;
  os << DTypeName(t.dtype) << "[";
  for (size_t i = 0; i < t.shape.size(); ++i) os << (i ? "," : "") << t.shape[i];
  os << "]" << LayoutName(t.layout);
  return os.str();
}

namespace {

struct KindEntry {
  OpKind kind;
  std::string_view name;
};

constexpr KindEntry kKinds[] = {
    {OpKind::kGemm, "Gemm"},
    {OpKind::kConv2d, "Conv2d"},
    {OpKind::kBiasAdd, "BiasAdd"},
    {OpKind::kReLU, "ReLU"},
    {OpKind::kGELU, "GELU"},
    {OpKind::kHardswish, "Hardswish"},
    {OpKind::kSoftplus, "Softplus"},
    {OpKind::kDTypeConvert, "DTypeConvert"},
    {OpKind::kBroadcastColumns, "BroadcastColumns"},
    {OpKind::kReduceColumns, "ReduceColumns"},
    {OpKind::kLayoutTransform, "LayoutTransform"},
    {OpKind::kPad, "Pad"},
    {OpKind::kSoftmax, "Softmax"},
};

}  // namespace

std::string_view OpKindName(OpKind k) {
  for (const auto& e : kKinds) {
    if (e.kind == k) return e.name;
  }
  return "?";
}

OpKind ParseOpKind(std::string_view s) {
  for (const auto& e : kKinds) {
    if (e.name == s) return e.kind;
  }
  Fail(ErrorCode::kUnsupportedOp, "unsupported operator kind '" + std::string(s) + "'");
}

bool IsEpilogueKind(OpKind k) {
  switch (k) {
    case OpKind::kBiasAdd:
    case OpKind::kReLU:
    case OpKind::kGELU:
    case OpKind::kHardswish:
    case OpKind::kSoftplus:
    case OpKind::kDTypeConvert:
    case OpKind::kBroadcastColumns:
    case OpKind::kReduceColumns:
      return true;
    default:
      return false;
  }
}

bool IsAnchorKind(OpKind k) { return k == OpKind::kGemm || k == OpKind::kConv2d; }

const OpNode* Graph::FindNode(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

OpNode* Graph::FindNode(std::string_view id) {
  for (auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const ValueInfo* Graph::FindInput(std::string_view name) const {
  for (const auto& v : inputs) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

const ValueInfo* Graph::FindParam(std::string_view name) const {
  for (const auto& v : params) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

bool Graph::IsGraphOutput(std::string_view id) const {
  return std::find(outputs.begin(), outputs.end(), id) != outputs.end();
}

const TensorType& Graph::TypeOf(std::string_view name) const {
  if (const OpNode* n = FindNode(name)) {
    if (!n->type) Fail(ErrorCode::kInternal, "node '" + n->id + "' is untyped");
    return *n->type;
  }
  if (const ValueInfo* v = FindInput(name)) return v->type;
  if (const ValueInfo* v = FindParam(name)) return v->type;
  Fail(ErrorCode::kUnknownReference, "unknown value '" + std::string(name) + "'");
}

std::vector<std::string> Graph::Consumers(std::string_view name) const {
  std::vector<std::string> out;
  for (const auto& n : nodes) {
    if (std::find(n.inputs.begin(), n.inputs.end(), name) != n.inputs.end()) {
      out.push_back(n.id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int Graph::Uses(std::string_view name) const {
  return static_cast<int>(Consumers(name).size()) + (IsGraphOutput(name) ? 1 : 0);
}

int64_t ConvOutExtent(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  const int64_t span = in + 2 * pad - k;
  if (span < 0 || stride < 1) {
    Fail(ErrorCode::kShapeMismatch, "convolution window does not fit the input");
  }
  return span / stride + 1;
}

int64_t Conv2dProblem::OutH() const { return ConvOutExtent(h, kernel[0], stride[0], padding[0]); }
int64_t Conv2dProblem::OutW() const { return ConvOutExtent(w, kernel[1], stride[1], padding[1]); }

GemmProblem Conv2dAsImplicitGemm(const Conv2dProblem& p) {
  GemmProblem g;
  g.m = p.n * p.OutH() * p.OutW();
  g.n = p.oc;
  g.k = p.kernel[0] * p.kernel[1] * p.ic;
  g.dtype_in = p.dtype_in;
  g.dtype_acc = p.dtype_acc;
  g.dtype_out = p.dtype_out;
  return g;
}

std::vector<std::string> TopoOrder(const Graph& graph) {
  std::unordered_map<std::string, int> indegree;
  std::unordered_map<std::string, std::vector<std::string>> users;
  for (const auto& n : graph.nodes) indegree[n.id];
  for (const auto& n : graph.nodes) {
    // Count each producing node once even if referenced twice.
    std::set<std::string> deps;
    for (const auto& in : n.inputs) {
      if (indegree.count(in)) deps.insert(in);
    }
    for (const auto& d : deps) {
      ++indegree[n.id];
      users[d].push_back(n.id);
    }
  }
  std::set<std::string> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.insert(id);
  }
  std::vector<std::string> order;
  order.reserve(graph.nodes.size());
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    for (const auto& u : users[id]) {
      if (--indegree[u] == 0) ready.insert(u);
    }
    order.push_back(std::move(id));
  }
  if (order.size() != graph.nodes.size()) {
    Fail(ErrorCode::kCycleDetected, "graph contains a cycle");
  }
  return order;
}

namespace {

TensorType PermuteNchwToNhwc(TensorType t) {
  t.shape = {t.shape[0], t.shape[2], t.shape[3], t.shape[1]};
  t.layout = Layout::kNHWC;
  return t;
}

TensorType InputTypeOf(const Graph& g, const OpNode& node, size_t i) {
  TensorType t = g.TypeOf(node.inputs[i]);
  const auto& flagged = node.attrs.nchw_inputs;
  if (std::find(flagged.begin(), flagged.end(), static_cast<int>(i)) != flagged.end()) {
    if (t.rank() != 4 || t.layout != Layout::kNCHW) {
      Fail(ErrorCode::kUnsupportedLayout, "node '" + node.id + "' gathers a non-NCHW input as NCHW");
    }
    t = PermuteNchwToNhwc(std::move(t));
  }
  return t;
}

void CheckArity(const OpNode& node, size_t lo, size_t hi) {
  if (node.inputs.size() < lo || node.inputs.size() > hi) {
    Fail(ErrorCode::kShapeMismatch, "node '" + node.id + "' (" + std::string(OpKindName(node.kind)) +
                                        ") has wrong number of inputs");
  }
}

[[noreturn]] void Mismatch(const OpNode& node, const std::string& what) {
  Fail(ErrorCode::kShapeMismatch, "node '" + node.id + "': " + what);
}

void CheckActivation(const OpNode& node, const TensorType& t) {
  if (t.rank() != 2 && t.rank() != 4) Mismatch(node, "activation rank must be 2 or 4");
  for (int64_t e : t.shape) {
    if (e < 1) Mismatch(node, "non-positive extent");
  }
}

TensorType InferNode(const Graph& g, const OpNode& node) {
  switch (node.kind) {
    case OpKind::kGemm: {
      CheckArity(node, 2, 3);
      const TensorType a = InputTypeOf(g, node, 0);
      const TensorType b = InputTypeOf(g, node, 1);
      if (a.rank() != 2 || b.rank() != 2) Mismatch(node, "Gemm operands must be rank 2");
      if (a.shape[1] != b.shape[0]) Mismatch(node, "Gemm K mismatch " + ToString(a) + " x " + ToString(b));
      if (a.dtype != b.dtype) Mismatch(node, "Gemm operand dtypes differ");
      CheckActivation(node, a);
      CheckActivation(node, b);
      TensorType out{{a.shape[0], b.shape[1]}, a.dtype, Layout::kRowMajor};
      if (node.inputs.size() == 3) {
        const TensorType c = InputTypeOf(g, node, 2);
        if (c.shape != out.shape) Mismatch(node, "Gemm C shape must be M x N");
        if (c.dtype != out.dtype) Mismatch(node, "Gemm C dtype must match output");
      }
      return out;
    }
    case OpKind::kConv2d: {
      CheckArity(node, 2, 2);
      const TensorType x = InputTypeOf(g, node, 0);
      const TensorType w = InputTypeOf(g, node, 1);
      if (x.rank() != 4 || w.rank() != 4) Mismatch(node, "Conv2d operands must be rank 4");
      CheckActivation(node, x);
      if (node.attrs.dilation != Pair{1, 1}) {
        Fail(ErrorCode::kUnsupportedOp, "node '" + node.id + "': only dilation (1,1) is supported");
      }
      if (x.dtype != w.dtype) Mismatch(node, "Conv2d operand dtypes differ");
      const bool nchw = x.layout == Layout::kNCHW;
      if (!nchw && x.layout != Layout::kNHWC) {
        Fail(ErrorCode::kUnsupportedLayout, "node '" + node.id + "': Conv2d input must be NCHW or NHWC");
      }
      const int64_t n = x.shape[0];
      const int64_t c = nchw ? x.shape[1] : x.shape[3];
      const int64_t h = nchw ? x.shape[2] : x.shape[1];
      const int64_t wd = nchw ? x.shape[3] : x.shape[2];
      // Filters are always [OC, R, S, IC].
      if (w.shape[1] != node.attrs.kernel[0] || w.shape[2] != node.attrs.kernel[1]) {
        Mismatch(node, "filter extent disagrees with kernel attribute");
      }
      if (w.shape[3] != c) Mismatch(node, "filter IC disagrees with input channels");
      const int64_t p = ConvOutExtent(h, node.attrs.kernel[0], node.attrs.stride[0], node.attrs.padding[0]);
      const int64_t q = ConvOutExtent(wd, node.attrs.kernel[1], node.attrs.stride[1], node.attrs.padding[1]);
      const int64_t oc = w.shape[0];
      if (nchw) return TensorType{{n, oc, p, q}, x.dtype, Layout::kNCHW};
      return TensorType{{n, p, q, oc}, x.dtype, Layout::kNHWC};
    }
    case OpKind::kBiasAdd:
    case OpKind::kBroadcastColumns: {
      CheckArity(node, 2, 2);
      const TensorType x = InputTypeOf(g, node, 0);
      const TensorType v = InputTypeOf(g, node, 1);
      CheckActivation(node, x);
      if (v.rank() != 1 || v.shape[0] != x.Channels()) {
        Mismatch(node, "vector " + ToString(v) + " does not match channels of " + ToString(x));
      }
      if (v.dtype != x.dtype) Mismatch(node, "vector dtype differs from activation");
      return x;
    }
    case OpKind::kReLU:
    case OpKind::kGELU:
    case OpKind::kHardswish:
    case OpKind::kSoftplus:
    case OpKind::kSoftmax: {
      CheckArity(node, 1, 1);
      TensorType x = InputTypeOf(g, node, 0);
      CheckActivation(node, x);
      return x;
    }
    case OpKind::kDTypeConvert: {
      CheckArity(node, 1, 1);
      TensorType x = InputTypeOf(g, node, 0);
      CheckActivation(node, x);
      x.dtype = node.attrs.to_dtype;
      return x;
    }
    case OpKind::kReduceColumns: {
      CheckArity(node, 1, 1);
      TensorType x = InputTypeOf(g, node, 0);
      CheckActivation(node, x);
      x.shape[x.ChannelAxis()] = 1;
      x.dtype = DType::kFP32;
      return x;
    }
    case OpKind::kLayoutTransform: {
      CheckArity(node, 1, 1);
      TensorType x = InputTypeOf(g, node, 0);
      CheckActivation(node, x);
      if (x.rank() != 4) Fail(ErrorCode::kUnsupportedLayout, "LayoutTransform needs a 4-D tensor");
      const Layout to = node.attrs.to_layout;
      if (to != Layout::kNCHW && to != Layout::kNHWC) {
        Fail(ErrorCode::kUnsupportedLayout, "LayoutTransform target must be NCHW or NHWC");
      }
      if (x.layout == to) return x;
      if (to == Layout::kNHWC) return PermuteNchwToNhwc(x);
      x.shape = {x.shape[0], x.shape[3], x.shape[1], x.shape[2]};
      x.layout = Layout::kNCHW;
      return x;
    }
    case OpKind::kPad: {
      CheckArity(node, 1, 1);
      TensorType x = InputTypeOf(g, node, 0);
      CheckActivation(node, x);
      if (node.attrs.pad_to < x.Channels()) Mismatch(node, "Pad target smaller than channel extent");
      x.shape[x.ChannelAxis()] = node.attrs.pad_to;
      return x;
    }
  }
  Fail(ErrorCode::kUnsupportedOp, "node '" + node.id + "' has an unsupported kind");
}

}  // namespace

Graph InferTypes(Graph graph) {
  std::unordered_set<std::string> names;
  auto claim = [&](const std::string& name) {
    if (name.empty() || !names.insert(name).second) {
      Fail(ErrorCode::kParseError, "duplicate or empty value name '" + name + "'");
    }
  };
  for (const auto& v : graph.inputs) claim(v.name);
  for (const auto& v : graph.params) claim(v.name);
  for (const auto& n : graph.nodes) claim(n.id);
  for (const auto& n : graph.nodes) {
    for (const auto& in : n.inputs) {
      if (!names.count(in)) {
        Fail(ErrorCode::kUnknownReference, "node '" + n.id + "' references unknown value '" + in + "'");
      }
    }
  }
  for (const auto& o : graph.outputs) {
    if (!graph.FindNode(o)) Fail(ErrorCode::kUnknownReference, "unknown graph output '" + o + "'");
  }
  for (auto& n : graph.nodes) n.type.reset();
  for (const auto& id : TopoOrder(graph)) {
    OpNode* node = graph.FindNode(id);
    node->type = InferNode(graph, *node);
  }
  return graph;
}

GemmProblem GemmProblemOf(const Graph& graph, const OpNode& node) {
  if (node.kind != OpKind::kGemm) Fail(ErrorCode::kInternal, "not a Gemm: " + node.id);
  const TensorType& a = graph.TypeOf(node.inputs[0]);
  const TensorType& b = graph.TypeOf(node.inputs[1]);
  GemmProblem p;
  p.m = a.shape[0];
  p.k = a.shape[1];
  p.n = b.shape[1];
  p.dtype_in = a.dtype;
  p.dtype_out = node.type->dtype;
  p.layout_a = a.layout;
  p.layout_b = b.layout;
  if (node.inputs.size() == 3) p.layout_c = graph.TypeOf(node.inputs[2]).layout;
  return p;
}

Conv2dProblem Conv2dProblemOf(const Graph& graph, const OpNode& node) {
  if (node.kind != OpKind::kConv2d) Fail(ErrorCode::kInternal, "not a Conv2d: " + node.id);
  const TensorType x = InputTypeOf(graph, node, 0);
  const TensorType& w = graph.TypeOf(node.inputs[1]);
  Conv2dProblem p;
  const bool nchw = x.layout == Layout::kNCHW;
  p.n = x.shape[0];
  p.ic = nchw ? x.shape[1] : x.shape[3];
  p.h = nchw ? x.shape[2] : x.shape[1];
  p.w = nchw ? x.shape[3] : x.shape[2];
  p.oc = w.shape[0];
  p.kernel = node.attrs.kernel;
  p.stride = node.attrs.stride;
  p.padding = node.attrs.padding;
  p.dtype_in = x.dtype;
  p.dtype_out = node.type->dtype;
  p.layout = x.layout;
  return p;
}

GemmProblem AnchorGemm(const Graph& graph, const OpNode& node) {
  if (node.kind == OpKind::kConv2d) return Conv2dAsImplicitGemm(Conv2dProblemOf(graph, node));
  return GemmProblemOf(graph, node);
}

}  // namespace bolt
