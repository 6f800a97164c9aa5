// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/layout_pad.h"

#include <algorithm>

#include "bolt/error.h"

namespace bolt {

int64_t PaddedExtent(int64_t extent) { return (extent + kPadMultiple - 1) / kPadMultiple * kPadMultiple; }

PaddingResult PlanPadding(const Graph& typed) {
  PaddingResult result;
  Graph g = typed;
  std::vector<OpNode> pads;
  for (const auto& id : TopoOrder(typed)) {
    const OpNode* conv = typed.FindNode(id);
    if (conv->kind != OpKind::kConv2d) continue;
    const Conv2dProblem p = Conv2dProblemOf(typed, *conv);
    if (p.ic % kPadMultiple == 0) continue;

    PadPlan plan;
    plan.node_id = id;
    plan.original = p.ic;
    plan.padded = PaddedExtent(p.ic);
    const std::string suffix = ".pad" + std::to_string(plan.padded);

    const std::string& weight = conv->inputs[1];
    const TensorType& wt = typed.TypeOf(weight);
    plan.weight_param = weight + suffix;
    if (!g.FindParam(plan.weight_param)) {
      ValueInfo v;
      v.name = plan.weight_param;
      v.type = wt;
      v.type.shape[3] = plan.padded;
      v.param_kind = ParamKind::kPaddedWeight;
      v.derived_from = weight;
      g.params.push_back(std::move(v));
    }

    // The Pad node reads the activation exactly as the convolution did
    // (including an NCHW gather of a model input) and writes NHWC.
    OpNode pad;
    pad.id = id + suffix;
    pad.kind = OpKind::kPad;
    pad.attrs.pad_to = plan.padded;
    pad.inputs = {conv->inputs[0]};
    const auto& flagged = conv->attrs.nchw_inputs;
    if (std::find(flagged.begin(), flagged.end(), 0) != flagged.end()) pad.attrs.nchw_inputs = {0};

    TensorType bt = typed.TypeOf(conv->inputs[0]);
    if (!pad.attrs.nchw_inputs.empty()) bt.shape = {bt.shape[0], bt.shape[2], bt.shape[3], bt.shape[1]};
    if (!pad.attrs.nchw_inputs.empty()) bt.layout = Layout::kNHWC;
    bt.shape[bt.ChannelAxis()] = plan.padded;
    plan.buffer_param = pad.id + ".buffer";
    plan.axis = bt.ChannelAxis();
    g.params.push_back(ValueInfo{plan.buffer_param, bt, ParamKind::kPaddedBuffer, ""});
    plan.pad_node = pad.id;

    OpNode* target = g.FindNode(id);
    target->inputs = {pad.id, plan.weight_param};
    target->attrs.nchw_inputs.erase(
        std::remove(target->attrs.nchw_inputs.begin(), target->attrs.nchw_inputs.end(), 0),
        target->attrs.nchw_inputs.end());
    pads.push_back(std::move(pad));
    result.plans.push_back(std::move(plan));
  }
  for (auto& p : pads) g.nodes.push_back(std::move(p));
  result.graph = InferTypes(std::move(g));
  return result;
}

Graph InsertLayoutTransforms(const Graph& typed) {
  bool any_nchw = false;
  for (const auto& in : typed.inputs) {
    if (in.type.rank() == 4) {
      if (in.type.layout == Layout::kNCHW) {
        any_nchw = true;
      } else if (in.type.layout != Layout::kNHWC) {
        Fail(ErrorCode::kUnsupportedLayout, "4-D input '" + in.name + "' must be NCHW or NHWC");
      }
    }
  }
  if (!any_nchw) return typed;

  Graph g = typed;
  for (auto& node : g.nodes) {
    for (size_t i = 0; i < node.inputs.size(); ++i) {
      const ValueInfo* in = typed.FindInput(node.inputs[i]);
      if (in && in->type.rank() == 4 && in->type.layout == Layout::kNCHW) {
        auto& flagged = node.attrs.nchw_inputs;
        if (std::find(flagged.begin(), flagged.end(), static_cast<int>(i)) == flagged.end()) {
          flagged.push_back(static_cast<int>(i));
        }
      }
    }
    if (typed.IsGraphOutput(node.id) && node.type && node.type->rank() == 4 &&
        node.type->layout == Layout::kNCHW) {
      node.attrs.nchw_output = true;
    }
  }
  return InferTypes(std::move(g));
}

}  // namespace bolt
