// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/codegen.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "bolt/error.h"
#include "bolt/graph_io.h"

namespace bolt {

using nlohmann::json;

std::string_view PatternKindName(PatternKind k) {
  switch (k) {
    case PatternKind::kBare: return "bare";
    case PatternKind::kEpilogue: return "epilogue";
    case PatternKind::kChain: return "chain";
  }
  Fail(ErrorCode::kUnsupportedPattern, "unknown pattern kind " + std::to_string(static_cast<int>(k)));
}

PatternKind ParsePatternKind(std::string_view s) {
  if (s == "bare") return PatternKind::kBare;
  if (s == "epilogue") return PatternKind::kEpilogue;
  if (s == "chain") return PatternKind::kChain;
  Fail(ErrorCode::kUnsupportedPattern, "unknown pattern kind '" + std::string(s) + "'");
}

namespace {

json GemmToJson(const GemmProblem& p) {
  return json{{"m", p.m},
              {"n", p.n},
              {"k", p.k},
              {"dtype_in", DTypeName(p.dtype_in)},
              {"dtype_acc", DTypeName(p.dtype_acc)},
              {"dtype_out", DTypeName(p.dtype_out)},
              {"layout_a", LayoutName(p.layout_a)},
              {"layout_b", LayoutName(p.layout_b)},
              {"layout_c", LayoutName(p.layout_c)}};
}

GemmProblem GemmFromJson(const json& j) {
  GemmProblem p;
  p.m = j.at("m").get<int64_t>();
  p.n = j.at("n").get<int64_t>();
  p.k = j.at("k").get<int64_t>();
  p.dtype_in = ParseDType(j.at("dtype_in").get<std::string>());
  p.dtype_acc = ParseDType(j.at("dtype_acc").get<std::string>());
  p.dtype_out = ParseDType(j.at("dtype_out").get<std::string>());
  p.layout_a = ParseLayout(j.at("layout_a").get<std::string>());
  p.layout_b = ParseLayout(j.at("layout_b").get<std::string>());
  p.layout_c = ParseLayout(j.at("layout_c").get<std::string>());
  return p;
}

json ConvToJson(const Conv2dProblem& p) {
  return json{{"n", p.n},
              {"h", p.h},
              {"w", p.w},
              {"ic", p.ic},
              {"oc", p.oc},
              {"kernel", p.kernel},
              {"stride", p.stride},
              {"padding", p.padding},
              {"dtype_in", DTypeName(p.dtype_in)},
              {"dtype_acc", DTypeName(p.dtype_acc)},
              {"dtype_out", DTypeName(p.dtype_out)},
              {"layout", LayoutName(p.layout)}};
}

Conv2dProblem ConvFromJson(const json& j) {
  Conv2dProblem p;
  p.n = j.at("n").get<int64_t>();
  p.h = j.at("h").get<int64_t>();
  p.w = j.at("w").get<int64_t>();
  p.ic = j.at("ic").get<int64_t>();
  p.oc = j.at("oc").get<int64_t>();
  p.kernel = j.at("kernel").get<Pair>();
  p.stride = j.at("stride").get<Pair>();
  p.padding = j.at("padding").get<Pair>();
  p.dtype_in = ParseDType(j.at("dtype_in").get<std::string>());
  p.dtype_acc = ParseDType(j.at("dtype_acc").get<std::string>());
  p.dtype_out = ParseDType(j.at("dtype_out").get<std::string>());
  p.layout = ParseLayout(j.at("layout").get<std::string>());
  return p;
}

json PadToJson(const PadPlan& p) {
  return json{{"node", p.node_id},         {"axis", p.axis},
              {"original", p.original},    {"padded", p.padded},
              {"weight_param", p.weight_param}, {"buffer_param", p.buffer_param},
              {"pad_node", p.pad_node}};
}

PadPlan PadFromJson(const json& j) {
  PadPlan p;
  p.node_id = j.at("node").get<std::string>();
  p.axis = j.at("axis").get<int>();
  p.original = j.at("original").get<int64_t>();
  p.padded = j.at("padded").get<int64_t>();
  p.weight_param = j.at("weight_param").get<std::string>();
  p.buffer_param = j.at("buffer_param").get<std::string>();
  p.pad_node = j.at("pad_node").get<std::string>();
  return p;
}

std::string SymbolPattern(const KernelPlan& plan) {
  const bool conv = !plan.stages.empty() && plan.stages.front().anchor == OpKind::kConv2d;
  const bool b2b = plan.pattern == PatternKind::kChain;
  return std::string(b2b ? "b2b_" : "") + (conv ? "conv2d" : "gemm");
}

}  // namespace

json KernelPlanToJson(const KernelPlan& plan) {
  json stages = json::array();
  for (const auto& s : plan.stages) {
    json js{{"anchor", OpKindName(s.anchor)},
            {"gemm", GemmToJson(s.gemm)},
            {"config", KernelConfigToJson(s.config)},
            {"out_dtype", DTypeName(s.out_dtype)}};
    js["epilogue"] = json::array();
    for (OpKind k : s.epilogue) js["epilogue"].push_back(OpKindName(k));
    if (s.conv) js["conv"] = ConvToJson(*s.conv);
    stages.push_back(std::move(js));
  }
  return json{{"group", plan.group},
              {"pattern", PatternKindName(plan.pattern)},
              {"fusion", FusionKindName(plan.fusion)},
              {"stages", std::move(stages)},
              {"arch_tag", plan.arch_tag},
              {"nchw_input", plan.nchw_input},
              {"nchw_output", plan.nchw_output},
              {"padded_from", plan.padded_from},
              {"symbol", plan.symbol}};
}

KernelPlan KernelPlanFromJson(const json& j) {
  KernelPlan plan;
  try {
    plan.group = j.at("group").get<std::string>();
    plan.pattern = ParsePatternKind(j.at("pattern").get<std::string>());
    plan.fusion = ParseFusionKind(j.at("fusion").get<std::string>());
    for (const auto& js : j.at("stages")) {
      StagePlan s;
      s.anchor = ParseOpKind(js.at("anchor").get<std::string>());
      s.gemm = GemmFromJson(js.at("gemm"));
      s.config = KernelConfigFromJson(js.at("config"));
      s.out_dtype = ParseDType(js.at("out_dtype").get<std::string>());
      for (const auto& e : js.at("epilogue")) s.epilogue.push_back(ParseOpKind(e.get<std::string>()));
      if (js.contains("conv")) s.conv = ConvFromJson(js.at("conv"));
      plan.stages.push_back(std::move(s));
    }
    plan.arch_tag = j.at("arch_tag").get<std::string>();
    plan.nchw_input = j.at("nchw_input").get<bool>();
    plan.nchw_output = j.at("nchw_output").get<bool>();
    plan.padded_from = j.at("padded_from").get<int64_t>();
    plan.symbol = j.at("symbol").get<std::string>();
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParseError, std::string("malformed kernel plan: ") + e.what());
  }
  if (plan.stages.empty()) Fail(ErrorCode::kParseError, "kernel plan '" + plan.group + "' has no stages");
  return plan;
}

std::string PlanSymbol(const KernelPlan& plan) {
  json j = KernelPlanToJson(plan);
  j.erase("symbol");
  const StagePlan& s = plan.stages.front();
  const TileShape& tb = s.config.threadblock;
  std::ostringstream os;
  os << "bolt_" << SymbolPattern(plan) << "_" << s.gemm.m << "x" << s.gemm.n << "x" << s.gemm.k << "_" << tb.m
     << "x" << tb.n << "x" << tb.k << "_" << Hex64(Fnv1a64(j.dump())).substr(0, 8);
  return os.str();
}

std::vector<KernelPlan> MakePlans(const Graph& graph, const Partition& partition, const Schedule& schedule,
                                  const std::vector<PadPlan>& pads, const ArchSpec& arch) {
  std::vector<KernelPlan> plans;
  for (const auto& g : partition.groups) {
    auto it = schedule.find(g.id);
    if (it == schedule.end()) Fail(ErrorCode::kMissingPlan, "no schedule for group '" + g.id + "'");
    const auto stages = g.Stages();
    if (it->second.configs.size() != stages.size()) {
      Fail(ErrorCode::kMissingPlan, "schedule of group '" + g.id + "' does not cover every stage");
    }
    KernelPlan plan;
    plan.group = g.id;
    if (g.kind == GroupKind::kChain) {
      plan.pattern = PatternKind::kChain;
      plan.fusion = it->second.kind;
    } else {
      plan.pattern = g.pattern.epilogue.empty() ? PatternKind::kBare : PatternKind::kEpilogue;
    }
    plan.arch_tag = arch.sm_tag;
    for (size_t i = 0; i < stages.size(); ++i) {
      const OpNode* anchor = graph.FindNode(stages[i].anchor);
      StagePlan s;
      s.anchor = anchor->kind;
      s.gemm = AnchorGemm(graph, *anchor);
      if (anchor->kind == OpKind::kConv2d) s.conv = Conv2dProblemOf(graph, *anchor);
      s.config = it->second.configs[i];
      for (const auto& id : stages[i].epilogue) s.epilogue.push_back(graph.FindNode(id)->kind);
      s.out_dtype = graph.FindNode(stages[i].Output())->type->dtype;
      plan.stages.push_back(std::move(s));
    }
    const OpNode* first = graph.FindNode(stages.front().anchor);
    plan.nchw_input = !first->attrs.nchw_inputs.empty();
    plan.nchw_output = graph.FindNode(g.Output())->attrs.nchw_output;
    for (const auto& p : pads) {
      if (p.node_id == first->id) plan.padded_from = p.original;
    }
    plan.symbol = PlanSymbol(plan);
    plans.push_back(std::move(plan));
  }
  return plans;
}

Schedule ScheduleFromPlans(const std::vector<KernelPlan>& plans) {
  Schedule s;
  for (const auto& p : plans) {
    GroupSchedule g;
    g.kind = p.fusion;
    for (const auto& st : p.stages) g.configs.push_back(st.config);
    s[p.group] = std::move(g);
  }
  return s;
}

namespace {

std::string ElementType(DType t) {
  switch (t) {
    case DType::kFP16: return "cutlass::half_t";
    case DType::kBF16: return "cutlass::bfloat16_t";
    case DType::kFP32: return "float";
    case DType::kINT8: return "int8_t";
  }
  return "float";
}

std::string LayoutType(Layout l) {
  switch (l) {
    case Layout::kRowMajor: return "cutlass::layout::RowMajor";
    case Layout::kColMajor: return "cutlass::layout::ColumnMajor";
    case Layout::kNHWC: return "cutlass::layout::TensorNHWC";
    case Layout::kNCHW: return "cutlass::layout::TensorNCHW";
  }
  return "cutlass::layout::RowMajor";
}

std::string Shape3(const char* tmpl, const TileShape& s) {
  std::ostringstream os;
  os << tmpl << "<" << s.m << ", " << s.n << ", " << s.k << ">";
  return os.str();
}

std::string FunctorName(OpKind k) {
  switch (k) {
    case OpKind::kBiasAdd: return "bias_add";
    case OpKind::kReLU: return "relu";
    case OpKind::kGELU: return "gelu";
    case OpKind::kHardswish: return "hardswish";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kDTypeConvert: return "dtype_convert";
    case OpKind::kBroadcastColumns: return "broadcast_columns";
    case OpKind::kReduceColumns: return "reduce_columns";
    default: break;
  }
  Fail(ErrorCode::kUnsupportedPattern, "op '" + std::string(OpKindName(k)) + "' cannot be an epilogue functor");
}

std::string FunctorType(OpKind k) {
  switch (k) {
    case OpKind::kBiasAdd: return "bolt::epilogue::BiasAdd";
    case OpKind::kReLU: return "cutlass::epilogue::thread::ReLu";
    case OpKind::kGELU: return "cutlass::epilogue::thread::GELU";
    case OpKind::kHardswish: return "cutlass::epilogue::thread::HardSwish";
    case OpKind::kSoftplus: return "bolt::epilogue::Softplus";
    case OpKind::kDTypeConvert: return "bolt::epilogue::Convert";
    case OpKind::kBroadcastColumns: return "bolt::epilogue::BroadcastColumns";
    case OpKind::kReduceColumns: return "bolt::epilogue::ReduceColumns";
    default: break;
  }
  return FunctorName(k);
}

std::string EpilogueChain(const StagePlan& s) {
  if (s.epilogue.empty()) return "identity";
  std::string out;
  for (OpKind k : s.epilogue) out += (out.empty() ? "" : " -> ") + FunctorName(k);
  return out;
}

// using <name> = bolt::epilogue::Chain<LinearCombination, functors...>;
void EmitEpilogue(std::ostream& os, const std::string& name, const StagePlan& s) {
  const std::string out = ElementType(s.out_dtype), acc = ElementType(s.gemm.dtype_acc);
  const int vec = static_cast<int>(128 / Bits(s.gemm.dtype_out));
  os << "// epilogue: " << EpilogueChain(s) << "\n";
  os << "using " << name << " = bolt::epilogue::Chain<\n";
  os << "    cutlass::epilogue::thread::LinearCombination<" << ElementType(s.gemm.dtype_out) << ", " << vec << ", "
     << acc << ", " << acc << ">";
  if (s.epilogue.empty()) {
    os << ",\n    bolt::epilogue::Identity<" << out << ">";
  }
  for (OpKind k : s.epilogue) {
    os << ",\n    " << FunctorType(k) << "<" << out << ">";
  }
  os << ">;\n";
}

std::string SwizzleType(const KernelConfig& c, bool conv) {
  std::ostringstream os;
  os << (conv ? "cutlass::conv::threadblock::" : "cutlass::gemm::threadblock::")
     << "GemmIdentityThreadblockSwizzle<" << static_cast<int>(c.swizzle) << ">";
  return os.str();
}

std::string OpClass(DType t) {
  return t == DType::kFP32 ? "cutlass::arch::OpClassSimt" : "cutlass::arch::OpClassTensorOp";
}

void EmitConvProblem(std::ostream& os, const std::string& name, const Conv2dProblem& p) {
  os << "// " << name << ": N=" << p.n << " H=" << p.h << " W=" << p.w << " C=" << p.ic << " K=" << p.oc
     << " R=" << p.kernel[0] << " S=" << p.kernel[1] << " pad=(" << p.padding[0] << ", " << p.padding[1]
     << ") stride=(" << p.stride[0] << ", " << p.stride[1] << ") P=" << p.OutH() << " Q=" << p.OutW() << "\n";
}

}  // namespace

std::string SourceFileName(const KernelPlan& plan) { return plan.symbol + ".cu.txt"; }

std::string EmitKernelSource(const KernelPlan& plan) {
  PatternKindName(plan.pattern);  // rejects unknown kinds
  if (plan.stages.empty()) Fail(ErrorCode::kUnsupportedPattern, "plan '" + plan.group + "' has no stages");
  const bool chain = plan.pattern == PatternKind::kChain;
  if (chain != (plan.stages.size() > 1)) {
    Fail(ErrorCode::kUnsupportedPattern, "plan '" + plan.group + "' stage count does not match its pattern");
  }
  if (chain && plan.fusion == FusionKind::kNone) {
    Fail(ErrorCode::kUnsupportedPattern, "chain plan '" + plan.group + "' has no fusion kind");
  }
  const StagePlan& s0 = plan.stages.front();
  const bool conv = s0.anchor == OpKind::kConv2d;
  for (const auto& s : plan.stages) {
    if (s.anchor != s0.anchor) Fail(ErrorCode::kUnsupportedPattern, "mixed anchors in plan '" + plan.group + "'");
  }
  const std::string& sym = plan.symbol;

  std::ostringstream os;
  os << "// Generated by boltc. Template instantiation only.\n";
  os << "// group: " << plan.group << "\n";
  os << "// pattern: " << PatternKindName(plan.pattern);
  if (chain) os << " (" << FusionKindName(plan.fusion) << ")";
  os << "\n";
  if (plan.nchw_input) os << "// input: NCHW gathered as NHWC in the prologue\n";
  if (plan.nchw_output) os << "// output: NHWC written back as NCHW\n";
  if (plan.padded_from > 0) {
    os << "// input channels padded " << plan.padded_from << " -> " << s0.conv->ic << "\n";
  }
  os << "\n";
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    EmitEpilogue(os, sym + "_epilogue" + std::to_string(i), plan.stages[i]);
    if (plan.stages[i].conv) EmitConvProblem(os, "stage" + std::to_string(i), *plan.stages[i].conv);
  }
  os << "\n";

  const std::string in = ElementType(s0.gemm.dtype_in), acc = ElementType(s0.gemm.dtype_acc);
  const std::string out = ElementType(plan.stages.back().gemm.dtype_out);
  const std::string arch = "cutlass::arch::" + plan.arch_tag;
  const KernelConfig& c0 = s0.config;

  if (!chain && !conv) {
    os << "using " << sym << " = cutlass::gemm::device::Gemm<\n";
    os << "    " << in << ", " << LayoutType(s0.gemm.layout_a) << ",\n";
    os << "    " << in << ", " << LayoutType(s0.gemm.layout_b) << ",\n";
    os << "    " << out << ", " << LayoutType(s0.gemm.layout_c) << ",\n";
    os << "    " << acc << ", " << OpClass(s0.gemm.dtype_in) << ", " << arch << ",\n";
    os << "    " << Shape3("cutlass::gemm::GemmShape", c0.threadblock) << ",\n";
    os << "    " << Shape3("cutlass::gemm::GemmShape", c0.warp) << ",\n";
    os << "    " << Shape3("cutlass::gemm::GemmShape", c0.instruction) << ",\n";
    os << "    " << sym << "_epilogue0,\n";
    os << "    " << SwizzleType(c0, false) << ",\n";
    os << "    " << c0.stages << ", " << c0.alignment_a << ", " << c0.alignment_b << ">;\n";
  } else if (!chain) {
    os << "using " << sym << "_kernel = typename cutlass::conv::kernel::DefaultConv2dFprop<\n";
    os << "    " << in << ", cutlass::layout::TensorNHWC,\n";
    os << "    " << in << ", cutlass::layout::TensorNHWC,\n";
    os << "    " << out << ", cutlass::layout::TensorNHWC,\n";
    os << "    " << acc << ", " << OpClass(s0.gemm.dtype_in) << ", " << arch << ",\n";
    os << "    " << Shape3("cutlass::gemm::GemmShape", c0.threadblock) << ",\n";
    os << "    " << Shape3("cutlass::gemm::GemmShape", c0.warp) << ",\n";
    os << "    " << Shape3("cutlass::gemm::GemmShape", c0.instruction) << ",\n";
    os << "    " << sym << "_epilogue0,\n";
    os << "    " << SwizzleType(c0, true) << ",\n";
    os << "    " << c0.stages << ", cutlass::arch::OpMultiplyAdd,\n";
    os << "    cutlass::conv::IteratorAlgorithm::kOptimized,\n";
    os << "    cutlass::conv::StrideSupport::kStrided,\n";
    os << "    " << c0.alignment_a << ", " << c0.alignment_b << ">::Kernel;\n";
    os << "using " << sym << " = cutlass::conv::device::ImplicitGemmConvolution<" << sym << "_kernel>;\n";
  } else {
    const bool smem = plan.fusion == FusionKind::kSmemResident;
    os << "using " << sym << " = "
       << (conv ? "cutlass::conv::device::B2bImplicitGemmConvolution<\n" : "cutlass::gemm::device::B2bGemm<\n");
    os << "    " << in << ", " << (conv ? "cutlass::layout::TensorNHWC" : LayoutType(s0.gemm.layout_a)) << ",\n";
    os << "    " << in << ", " << (conv ? "cutlass::layout::TensorNHWC" : LayoutType(s0.gemm.layout_b)) << ",\n";
    os << "    " << out << ", " << (conv ? "cutlass::layout::TensorNHWC" : LayoutType(s0.gemm.layout_c)) << ",\n";
    os << "    " << acc << ", " << OpClass(s0.gemm.dtype_in) << ", " << arch << ",\n";
    os << "    bolt::b2b::Stages<\n";
    for (size_t i = 0; i < plan.stages.size(); ++i) {
      const KernelConfig& c = plan.stages[i].config;
      os << "        bolt::b2b::Stage<" << Shape3("cutlass::gemm::GemmShape", c.threadblock) << ", "
         << Shape3("cutlass::gemm::GemmShape", c.warp) << ", " << Shape3("cutlass::gemm::GemmShape", c.instruction)
         << ", " << sym << "_epilogue" << i << ">" << (i + 1 < plan.stages.size() ? "," : ">,") << "\n";
    }
    os << "    " << SwizzleType(c0, conv) << ",\n";
    os << "    " << c0.stages << ", " << c0.alignment_a << ", " << c0.alignment_b << ",\n";
    os << "    /*SmemAccumulator=*/" << (smem ? "true" : "false") << ">;\n";
  }
  return os.str();
}

RuntimeManifest BuildManifest(const Graph& graph, const Partition& partition, const std::vector<KernelPlan>& plans,
                              const std::vector<PadPlan>& pads, const ArchSpec& arch) {
  RuntimeManifest m;
  m.arch = arch.name;
  m.graph_checksum = GraphChecksum(graph);
  std::set<std::string> groups;
  for (const auto& g : partition.groups) groups.insert(g.id);
  std::set<std::string> seen;
  for (const auto& p : plans) {
    if (!groups.count(p.group)) Fail(ErrorCode::kMissingPlan, "plan for unknown group '" + p.group + "'");
    if (!seen.insert(p.group).second) Fail(ErrorCode::kMissingPlan, "group '" + p.group + "' planned twice");
  }
  for (const auto& g : partition.groups) {
    auto it = std::find_if(plans.begin(), plans.end(), [&](const KernelPlan& p) { return p.group == g.id; });
    if (it == plans.end()) Fail(ErrorCode::kMissingPlan, "no plan for group '" + g.id + "'");
    m.plans.push_back(*it);
  }
  m.params = graph.params;
  m.fallback = partition.fallback;
  m.pads = pads;
  return m;
}

json ManifestToJson(const RuntimeManifest& m) {
  json j{{"version", kManifestSchema}, {"arch", m.arch}, {"graph_checksum", m.graph_checksum}};
  j["plans"] = json::array();
  for (const auto& p : m.plans) {
    json jp = KernelPlanToJson(p);
    jp["source"] = SourceFileName(p);
    j["plans"].push_back(std::move(jp));
  }
  j["params"] = json::array();
  for (const auto& v : m.params) j["params"].push_back(ValueInfoToJson(v, true));
  j["fallback"] = m.fallback;
  j["padding"] = json::array();
  for (const auto& p : m.pads) j["padding"].push_back(PadToJson(p));
  return j;
}

RuntimeManifest ManifestFromJson(const json& j) {
  RuntimeManifest m;
  try {
    if (j.at("version").get<std::string>() != kManifestSchema) {
      Fail(ErrorCode::kParseError, "unsupported manifest version '" + j.at("version").get<std::string>() + "'");
    }
    m.arch = j.at("arch").get<std::string>();
    m.graph_checksum = j.at("graph_checksum").get<std::string>();
    for (const auto& jp : j.at("plans")) m.plans.push_back(KernelPlanFromJson(jp));
    for (const auto& v : j.at("params")) m.params.push_back(ValueInfoFromJson(v));
    m.fallback = j.at("fallback").get<std::vector<std::string>>();
    for (const auto& p : j.at("padding")) m.pads.push_back(PadFromJson(p));
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParseError, std::string("malformed manifest: ") + e.what());
  }
  std::set<std::string> names;
  for (const auto& v : m.params) {
    if (!names.insert(v.name).second) Fail(ErrorCode::kParseError, "duplicate parameter '" + v.name + "'");
  }
  return m;
}

std::string EmitManifest(const RuntimeManifest& m) { return ManifestToJson(m).dump(2) + "\n"; }

}  // namespace bolt
