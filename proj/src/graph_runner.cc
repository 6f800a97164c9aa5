// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// Whole-graph execution on the tiled oracle and node-by-node reference
// evaluation.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <unordered_map>

#include "bolt/error.h"
#include "bolt/executor.h"
#include "bolt/graph_io.h"

namespace bolt {

namespace {

Tensor NchwToNhwc(const Tensor& t) {
  const int64_t N = t.type.shape[0], C = t.type.shape[1], H = t.type.shape[2], W = t.type.shape[3];
  Tensor out(TensorType{{N, H, W, C}, t.type.dtype, Layout::kNHWC});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w)
          out.data[((n * H + h) * W + w) * C + c] = t.data[((n * C + c) * H + h) * W + w];
  return out;
}

Tensor NhwcToNchw(const Tensor& t) {
  const int64_t N = t.type.shape[0], H = t.type.shape[1], W = t.type.shape[2], C = t.type.shape[3];
  Tensor out(TensorType{{N, C, H, W}, t.type.dtype, Layout::kNCHW});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w)
          out.data[((n * C + c) * H + h) * W + w] = t.data[((n * H + h) * W + w) * C + c];
  return out;
}

bool IsFlagged(const OpNode& node, size_t i) {
  const auto& f = node.attrs.nchw_inputs;
  return std::find(f.begin(), f.end(), static_cast<int>(i)) != f.end();
}

const Tensor& ValueAt(const TensorMap& values, const std::string& name) {
  auto it = values.find(name);
  if (it == values.end()) Fail(ErrorCode::kUnknownReference, "no value for '" + name + "'");
  return it->second;
}

// Product of extents after the channel axis.
int64_t ChannelInner(const TensorType& t) {
  int64_t inner = 1;
  for (int i = t.ChannelAxis() + 1; i < t.rank(); ++i) inner *= t.shape[i];
  return inner;
}

}  // namespace

TensorMap MakeRandomValues(const Graph& graph, uint64_t seed) {
  TensorMap values;
  auto fill = [&](const ValueInfo& v) {
    std::mt19937_64 rng(seed ^ Fnv1a64(v.name));
    Tensor t(v.type);
    if (v.type.dtype == DType::kINT8) {
      std::uniform_int_distribution<int> dist(-4, 4);
      for (auto& x : t.data) x = static_cast<float>(dist(rng));
    } else {
      std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
      for (auto& x : t.data) x = RoundTo(v.type.dtype, dist(rng));
    }
    values[v.name] = std::move(t);
  };
  for (const auto& v : graph.inputs) fill(v);
  for (const auto& v : graph.params) {
    if (v.param_kind == ParamKind::kWeight) fill(v);
  }
  return values;
}

void MaterializeDerivedParams(const Graph& graph, TensorMap& values) {
  for (const auto& v : graph.params) {
    if (v.param_kind != ParamKind::kPaddedWeight) continue;
    const Tensor& src = ValueAt(values, v.derived_from);
    const int64_t ic = src.type.shape.back(), icp = v.type.shape.back();
    Tensor dst(v.type);
    const int64_t rows = src.type.NumElements() / ic;
    for (int64_t r = 0; r < rows; ++r) {
      std::copy_n(&src.data[r * ic], ic, &dst.data[r * icp]);
    }
    values[v.name] = std::move(dst);
  }
}

Epilogue BuildEpilogue(const Graph& graph, const EpiloguePattern& pattern, const TensorMap& values) {
  const OpNode* anchor = graph.FindNode(pattern.anchor);
  Epilogue epi;
  epi.anchor_dtype = anchor->type->dtype;
  if (anchor->kind == OpKind::kGemm) {
    epi.alpha = anchor->attrs.alpha;
    epi.beta = anchor->attrs.beta;
    if (anchor->inputs.size() == 3) epi.source = &ValueAt(values, anchor->inputs[2]);
  }
  for (const auto& id : pattern.epilogue) {
    const OpNode* n = graph.FindNode(id);
    EpilogueOp op;
    op.kind = n->kind;
    op.out_dtype = n->type->dtype;
    if (n->inputs.size() > 1) op.vector = &ValueAt(values, n->inputs[1]);
    epi.ops.push_back(op);
  }
  return epi;
}

Tensor EvalNodeNaive(const Graph& graph, const OpNode& node, const TensorMap& values) {
  std::vector<Tensor> permuted(node.inputs.size());
  std::vector<const Tensor*> in(node.inputs.size());
  for (size_t i = 0; i < node.inputs.size(); ++i) {
    in[i] = &ValueAt(values, node.inputs[i]);
    if (IsFlagged(node, i)) {
      permuted[i] = NchwToNhwc(*in[i]);
      in[i] = &permuted[i];
    }
  }
  const TensorType& type = *node.type;
  switch (node.kind) {
    case OpKind::kGemm: {
      Epilogue epi;
      epi.alpha = node.attrs.alpha;
      epi.beta = node.attrs.beta;
      epi.source = in.size() == 3 ? in[2] : nullptr;
      epi.anchor_dtype = type.dtype;
      return ReferenceGemm(GemmProblemOf(graph, node), *in[0], *in[1], epi);
    }
    case OpKind::kConv2d: {
      const Conv2dProblem p = Conv2dProblemOf(graph, node);
      Epilogue epi;
      epi.anchor_dtype = type.dtype;
      const bool nchw = p.layout == Layout::kNCHW;
      Tensor out = ReferenceConv2d(p, *in[0], *in[1], epi, nchw);
      return nchw ? NhwcToNchw(out) : out;
    }
    case OpKind::kBiasAdd:
    case OpKind::kBroadcastColumns:
    case OpKind::kReLU:
    case OpKind::kGELU:
    case OpKind::kHardswish:
    case OpKind::kSoftplus:
    case OpKind::kDTypeConvert: {
      const Tensor& x = *in[0];
      Tensor out(type);
      const int64_t inner = ChannelInner(x.type), C = x.type.Channels();
      const float* vec = in.size() > 1 ? in[1]->data.data() : nullptr;
      for (size_t i = 0; i < x.data.size(); ++i) {
        const float operand = vec ? vec[(static_cast<int64_t>(i) / inner) % C] : 0.0f;
        out.data[i] = RoundTo(type.dtype, ApplyElementwise(node.kind, x.data[i], operand));
      }
      return out;
    }
    case OpKind::kReduceColumns: {
      const Tensor& x = *in[0];
      Tensor out(type);
      const int64_t inner = ChannelInner(x.type), C = x.type.Channels();
      const int64_t outer = x.type.NumElements() / (inner * C);
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t j = 0; j < inner; ++j) {
          float run = 0.0f;
          for (int64_t c = 0; c < C; ++c) run += x.data[(o * C + c) * inner + j];
          out.data[o * inner + j] = run;
        }
      }
      return out;
    }
    case OpKind::kSoftmax: {
      const Tensor& x = *in[0];
      Tensor out(type);
      const int64_t inner = ChannelInner(x.type), C = x.type.Channels();
      const int64_t outer = x.type.NumElements() / (inner * C);
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t j = 0; j < inner; ++j) {
          auto at = [&](int64_t c) { return (o * C + c) * inner + j; };
          float mx = x.data[at(0)];
          for (int64_t c = 1; c < C; ++c) mx = std::max(mx, x.data[at(c)]);
          float sum = 0.0f;
          for (int64_t c = 0; c < C; ++c) sum += std::exp(x.data[at(c)] - mx);
          for (int64_t c = 0; c < C; ++c) out.data[at(c)] = RoundTo(type.dtype, std::exp(x.data[at(c)] - mx) / sum);
        }
      }
      return out;
    }
    case OpKind::kLayoutTransform: {
      const Tensor& x = *in[0];
      if (x.type.layout == type.layout) return x;
      return type.layout == Layout::kNHWC ? NchwToNhwc(x) : NhwcToNchw(x);
    }
    case OpKind::kPad: {
      const Tensor& x = *in[0];
      Tensor out(type);
      const int64_t inner = ChannelInner(x.type), C = x.type.Channels(), Cp = type.Channels();
      const int64_t outer = x.type.NumElements() / (inner * C);
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t c = 0; c < C; ++c) {
          std::copy_n(&x.data[(o * C + c) * inner], inner, &out.data[(o * Cp + c) * inner]);
        }
      }
      return out;
    }
  }
  Fail(ErrorCode::kUnsupportedOp, "cannot evaluate node '" + node.id + "'");
}

TensorMap ReferenceGraph(const Graph& graph, const TensorMap& values) {
  TensorMap vals = values;
  for (const auto& id : TopoOrder(graph)) {
    const OpNode* node = graph.FindNode(id);
    vals[id] = EvalNodeNaive(graph, *node, vals);
  }
  TensorMap outputs;
  for (const auto& o : graph.outputs) {
    const OpNode* node = graph.FindNode(o);
    outputs[o] = node->attrs.nchw_output ? NhwcToNchw(vals.at(o)) : vals.at(o);
  }
  return outputs;
}

std::vector<std::string> UnitOrder(const Graph& graph, const Partition& partition) {
  std::unordered_map<std::string, size_t> pos;
  const auto order = TopoOrder(graph);
  for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  std::vector<std::pair<size_t, std::string>> units;
  for (const auto& g : partition.groups) units.emplace_back(pos.at(g.Nodes().front()), g.id);
  for (const auto& f : partition.fallback) units.emplace_back(pos.at(f), f);
  std::sort(units.begin(), units.end());
  std::vector<std::string> out;
  for (auto& u : units) out.push_back(std::move(u.second));
  return out;
}

KernelResult RunGroup(const Graph& graph, const Group& group, const GroupSchedule& sched, const TensorMap& vals,
                      const ExecOptions& options) {
  const auto stages = group.Stages();
  if (sched.configs.size() != stages.size()) {
    Fail(ErrorCode::kMissingPlan, "group '" + group.id + "' has " + std::to_string(sched.configs.size()) +
                                      " configs for " + std::to_string(stages.size()) + " stages");
  }
  const OpNode* anchor = graph.FindNode(stages.front().anchor);
  const bool nchw = IsFlagged(*anchor, 0);
  if (group.kind == GroupKind::kChain) {
    ChainOperands ops;
    ops.activation = &ValueAt(vals, anchor->inputs[0]);
    ops.activation_nchw = nchw;
    for (const auto& s : stages) {
      ops.weights.push_back(&ValueAt(vals, graph.FindNode(s.anchor)->inputs[1]));
      ops.epilogues.push_back(BuildEpilogue(graph, s, vals));
    }
    return RunChainFused(ChainShapeOf(group.chain, graph), sched.configs, sched.kind, ops, options);
  }
  const Epilogue epi = BuildEpilogue(graph, stages.front(), vals);
  const Tensor& a = ValueAt(vals, anchor->inputs[0]);
  const Tensor& b = ValueAt(vals, anchor->inputs[1]);
  if (anchor->kind == OpKind::kConv2d) {
    return RunConv2d(Conv2dProblemOf(graph, *anchor), sched.configs[0], a, b, epi, nchw, options);
  }
  return RunGemm(GemmProblemOf(graph, *anchor), sched.configs[0], a, b, epi, options);
}

TensorMap ShapeOnlyValues(const Graph& graph) {
  TensorMap values;
  auto add = [&](const std::string& name, const TensorType& t) { values[name].type = t; };
  for (const auto& v : graph.inputs) add(v.name, v.type);
  for (const auto& v : graph.params) add(v.name, v.type);
  for (const auto& n : graph.nodes) add(n.id, *n.type);
  return values;
}

namespace {

ExecCounters FallbackCounters(const Graph& graph, const OpNode& node) {
  ExecCounters c;
  for (const auto& in : node.inputs) c.global_bytes_read += graph.TypeOf(in).NumBytes();
  c.global_bytes_written = node.type->NumBytes();
  if (node.kind == OpKind::kPad) {
    c.pad_fill_bytes = node.type->NumBytes() - graph.TypeOf(node.inputs[0]).NumBytes();
  }
  c.kernel_launches = 1;
  return c;
}

}  // namespace

GraphRun RunGraph(const Graph& graph, const Partition& partition, const Schedule& schedule,
                  const TensorMap& values, const ExecOptions& options) {
  CheckCoverage(partition, graph);
  GraphRun run;
  TensorMap vals = values;
  for (const auto& unit : UnitOrder(graph, partition)) {
    ExecCounters c;
    if (const Group* g = partition.FindGroup(unit)) {
      auto it = schedule.find(g->id);
      if (it == schedule.end()) Fail(ErrorCode::kMissingPlan, "no schedule for group '" + g->id + "'");
      KernelResult r = RunGroup(graph, *g, it->second, vals, options);
      c = r.counters;
      if (!options.measure_only) {
        Tensor out = std::move(r.output);
        // Reduced outputs of 4-D groups come back as [M, 1]; restore the node shape.
        out.type = *graph.FindNode(g->Output())->type;
        vals[g->Output()] = std::move(out);
      } else {
        vals[g->Output()] = Tensor();
        vals[g->Output()].type = *graph.FindNode(g->Output())->type;
      }
    } else {
      const OpNode* node = graph.FindNode(unit);
      c = FallbackCounters(graph, *node);
      if (!options.measure_only) {
        vals[unit] = EvalNodeNaive(graph, *node, vals);
      } else {
        vals[unit] = Tensor();
        vals[unit].type = *node->type;
      }
    }
    run.total += c;
    run.per_unit[unit] = c;
  }
  if (!options.measure_only) {
    for (const auto& o : graph.outputs) {
      const OpNode* node = graph.FindNode(o);
      run.outputs[o] = node->attrs.nchw_output ? NhwcToNchw(vals.at(o)) : vals.at(o);
    }
  }
  return run;
}

Mismatch CompareOutputs(const TensorMap& expected, const TensorMap& actual) {
  Mismatch mm;
  for (const auto& [name, e] : expected) {
    auto it = actual.find(name);
    if (it == actual.end() || it->second.type.shape != e.type.shape || it->second.data.size() != e.data.size()) {
      mm.equal = false;
      mm.output = name;
      return mm;
    }
    const auto& a = it->second.data;
    for (size_t i = 0; i < e.data.size(); ++i) {
      if (std::memcmp(&e.data[i], &a[i], sizeof(float)) != 0) {
        mm.equal = false;
        mm.output = name;
        mm.index = static_cast<int64_t>(i);
        mm.expected = e.data[i];
        mm.actual = a[i];
        int64_t rem = mm.index;
        mm.coords.assign(e.type.shape.size(), 0);
        for (int d = static_cast<int>(e.type.shape.size()) - 1; d >= 0; --d) {
          mm.coords[d] = rem % e.type.shape[d];
          rem /= e.type.shape[d];
        }
        return mm;
      }
    }
  }
  return mm;
}

}  // namespace bolt
