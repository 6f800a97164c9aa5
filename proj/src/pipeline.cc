// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/pipeline.h"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "bolt/fusion.h"
#include "bolt/graph_io.h"

namespace bolt {

using nlohmann::json;

namespace {

std::string UnitOf(const Partition& p, const std::string& node) {
  for (const auto& g : p.groups) {
    for (const auto& n : g.Nodes()) {
      if (n == node) return g.id;
    }
  }
  return node;
}

json StageJson(const Graph& graph, const EpiloguePattern& stage, const KernelConfig& config) {
  const OpNode* anchor = graph.FindNode(stage.anchor);
  const GemmProblem g = AnchorGemm(graph, *anchor);
  json j{{"anchor", stage.anchor},
         {"kind", OpKindName(anchor->kind)},
         {"problem", {{"m", g.m}, {"n", g.n}, {"k", g.k}}},
         {"config", KernelConfigToJson(config)},
         {"alignment_a", config.alignment_a},
         {"alignment_b", config.alignment_b}};
  j["epilogue"] = stage.epilogue;
  return j;
}

json PaddingJson(const Compiled& c) {
  json out = json::array();
  for (const auto& p : c.pads) {
    const OpNode* pad = c.graph.FindNode(p.pad_node);
    const int64_t fill = pad->type->NumBytes() - c.graph.TypeOf(pad->inputs[0]).NumBytes();
    const DType dt = pad->type->dtype;
    out.push_back({{"node", p.node_id},
                   {"original", p.original},
                   {"padded", p.padded},
                   {"alignment_unpadded", ComputeAlignment(p.original, dt)},
                   {"alignment_padded", ComputeAlignment(p.padded, dt)},
                   {"pad_node", p.pad_node},
                   {"weight_param", p.weight_param},
                   {"buffer_param", p.buffer_param},
                   {"pad_fill_bytes", fill}});
  }
  return out;
}

json LayoutJson(const Compiled& c) {
  json in = json::array(), out = json::array();
  for (const auto& id : TopoOrder(c.graph)) {
    const OpNode* n = c.graph.FindNode(id);
    if (!n->attrs.nchw_inputs.empty()) in.push_back({{"node", id}, {"unit", UnitOf(c.partition(), id)}});
    if (n->attrs.nchw_output) out.push_back({{"node", id}, {"unit", UnitOf(c.partition(), id)}});
  }
  return json{{"nchw_input_kernels", in}, {"nchw_output_kernels", out}};
}

json GroupsJson(const Compiled& c) {
  json groups = json::array();
  for (const auto& g : c.partition().groups) {
    const GroupSchedule& s = c.schedule().at(g.id);
    const KernelPlan* plan = nullptr;
    for (const auto& p : c.plans) {
      if (p.group == g.id) plan = &p;
    }
    json jg{{"id", g.id},
            {"pattern", PatternKindName(plan->pattern)},
            {"fusion", FusionKindName(s.kind)},
            {"symbol", plan->symbol},
            {"source", SourceFileName(*plan)}};
    jg["stages"] = json::array();
    const auto stages = g.Stages();
    for (size_t i = 0; i < stages.size(); ++i) jg["stages"].push_back(StageJson(c.graph, stages[i], s.configs[i]));
    auto it = c.tuning.groups.find(g.id);
    if (it != c.tuning.groups.end()) {
      const ProfileReport& r = it->second.report;
      int64_t measured = 0, skipped = 0, best = 0;
      for (const auto& cand : r.candidates) {
        if (!cand.skipped.empty()) {
          ++skipped;
          continue;
        }
        ++measured;
        if (cand.schedule == r.best) best = cand.cost;
      }
      jg["candidates"] = {{"enumerated", it->second.enumerated}, {"measured", measured}, {"skipped", skipped},
                          {"best_cost", best}};
    }
    groups.push_back(std::move(jg));
  }
  return groups;
}

json DemotionsJson(const Compiled& c) {
  json out = json::array();
  for (const auto& r : c.rejected_chains) out.push_back({{"stage", "pre_tune"}, {"reason", r}});
  for (const auto& d : c.tuning.demoted) out.push_back({{"stage", "tune"}, {"group", d.group}, {"reason", d.reason}});
  return out;
}

json OptionsJson(const PipelineOptions& o) {
  return json{{"fusion", o.fusion ? "on" : "off"},
              {"padding", o.padding ? "on" : "off"},
              {"seed", o.seed},
              {"launch_weight", o.launch_weight}};
}

json BaseReport(const std::string& command, const Compiled& c, const ArchSpec& arch, const PipelineOptions& o) {
  json r{{"command", command},
         {"arch", arch.name},
         {"graph_checksum", c.manifest.graph_checksum},
         {"options", OptionsJson(o)},
         {"groups", GroupsJson(c)},
         {"fallback", c.partition().fallback},
         {"padding", PaddingJson(c)},
         {"layout", LayoutJson(c)},
         {"demotions", DemotionsJson(c)}};
  if (o.timing) r["tuning_seconds"] = c.tuning_seconds;
  return r;
}

json PerUnitJson(const GraphRun& run) {
  json j = json::object();
  for (const auto& [id, counters] : run.per_unit) j[id] = CountersToJson(counters);
  return j;
}

std::string OutputDigest(const TensorMap& outputs) {
  std::string bytes;
  for (const auto& [name, t] : outputs) {
    bytes += name;
    bytes.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  return Hex64(Fnv1a64(bytes));
}

}  // namespace

Compiled Compile(const Graph& input, const ArchSpec& arch, const PipelineOptions& options) {
  if (input.nodes.empty()) Fail(ErrorCode::kEmptyGraph, "graph has no nodes");
  Compiled c;
  c.source = InferTypes(input);
  Graph laid = InsertLayoutTransforms(c.source);
  if (options.padding) {
    PaddingResult padded = PlanPadding(laid);
    c.graph = std::move(padded.graph);
    c.pads = std::move(padded.plans);
  } else {
    c.graph = std::move(laid);
  }

  const auto patterns = MatchEpilogues(c.graph);
  std::vector<PersistentChain> chains;
  for (const auto& chain : MatchChains(patterns, c.graph)) {
    const std::string id = chain.stages.front().anchor;
    if (!options.fusion) {
      c.rejected_chains.push_back(id + ": fusion off");
      continue;
    }
    const ChainLegality verdict = CheckChainFeasible(ChainShapeOf(chain, c.graph));
    if (verdict.legal) {
      chains.push_back(chain);
      continue;
    }
    std::string why;
    for (const auto& r : verdict.reasons) why += (why.empty() ? "" : ",") + r;
    auto segments = SplitFeasible(chain, c.graph);
    why += "; split into " + std::to_string(segments.size()) + " chain(s)";
    c.rejected_chains.push_back(id + ": " + why);
    for (auto& seg : segments) chains.push_back(std::move(seg));
  }
  const Partition partition = MakePartition(c.graph, chains, patterns, std::vector<bool>(chains.size(), true));
  CheckCoverage(partition, c.graph);

  TunerOptions topts;
  topts.launch_weight = options.launch_weight;
  const auto t0 = std::chrono::steady_clock::now();
  c.tuning = TunePartition(c.graph, partition, arch, topts);
  c.tuning_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  c.plans = MakePlans(c.graph, c.partition(), c.schedule(), c.pads, arch);
  c.manifest = BuildManifest(c.graph, c.partition(), c.plans, c.pads, arch);
  for (const auto& p : c.plans) c.sources[SourceFileName(p)] = EmitKernelSource(p);
  return c;
}

TensorMap PipelineValues(const Compiled& c, uint64_t seed) {
  TensorMap values = MakeRandomValues(c.graph, seed);
  MaterializeDerivedParams(c.graph, values);
  return values;
}

Schedule CheckedSchedule(const Compiled& c, const RuntimeManifest& manifest, const ArchSpec& arch) {
  if (manifest.graph_checksum != c.manifest.graph_checksum) {
    Fail(ErrorCode::kMissingPlan, "manifest was built for a different graph");
  }
  for (const auto& plan : manifest.plans) {
    const Group* g = c.partition().FindGroup(plan.group);
    if (!g) Fail(ErrorCode::kMissingPlan, "manifest plan for unknown group '" + plan.group + "'");
    const auto stages = g->Stages();
    if (stages.size() != plan.stages.size()) {
      Fail(ErrorCode::kMissingPlan, "plan '" + plan.group + "' does not match the group's stages");
    }
    for (size_t i = 0; i < stages.size(); ++i) {
      const OpNode* anchor = c.graph.FindNode(stages[i].anchor);
      const auto v = ConfigViolations(plan.stages[i].config, AnchorGemm(c.graph, *anchor), arch);
      if (!v.empty()) Fail(ErrorCode::kIllegalFusion, "plan '" + plan.group + "' stage " + std::to_string(i) + ": " + v.front());
    }
    if (g->kind == GroupKind::kChain) {
      std::vector<KernelConfig> configs;
      for (const auto& s : plan.stages) configs.push_back(s.config);
      const ChainLegality verdict = CheckChain(ChainShapeOf(g->chain, c.graph), configs, arch);
      if (!verdict.legal) Fail(ErrorCode::kIllegalFusion, "plan '" + plan.group + "': " + verdict.reasons.front());
      if (plan.fusion == FusionKind::kNone ||
          (plan.fusion == FusionKind::kRFResident && verdict.kind != FusionKind::kRFResident)) {
        Fail(ErrorCode::kIllegalFusion, "plan '" + plan.group + "': fusion kind " +
                                            std::string(FusionKindName(plan.fusion)) + " not admissible");
      }
    } else if (plan.pattern == PatternKind::kChain) {
      Fail(ErrorCode::kIllegalFusion, "plan '" + plan.group + "' fuses a group the partition keeps separate");
    }
  }
  Schedule s = ScheduleFromPlans(manifest.plans);
  for (const auto& g : c.partition().groups) {
    if (!s.count(g.id)) Fail(ErrorCode::kMissingPlan, "manifest has no plan for group '" + g.id + "'");
  }
  return s;
}

json CompileReport(const Compiled& c, const ArchSpec& arch, const PipelineOptions& options) {
  json r = BaseReport("compile", c, arch, options);
  ExecOptions measure;
  measure.measure_only = true;
  const GraphRun run = RunGraph(c.graph, c.partition(), c.schedule(), ShapeOnlyValues(c.graph), measure);
  r["counters"] = CountersToJson(run.total);
  r["per_unit"] = PerUnitJson(run);
  return r;
}

BenchResult Bench(const Compiled& c, const ArchSpec& arch, const PipelineOptions& options) {
  BenchResult b;
  const TensorMap values = PipelineValues(c, options.seed);
  for (int rep = 0; rep < std::max(1, options.reps); ++rep) {
    GraphRun run = RunGraph(c.graph, c.partition(), c.schedule(), values);
    if (rep > 0 && !(run.total == b.run.total)) Fail(ErrorCode::kInternal, "counters differ between repetitions");
    b.run = std::move(run);
  }
  bool has_chain = false;
  for (const auto& g : c.partition().groups) has_chain = has_chain || g.kind == GroupKind::kChain;
  if (has_chain) {
    PipelineOptions off = options;
    off.fusion = false;
    const Compiled split = Compile(c.source, arch, off);
    b.unfused = RunGraph(split.graph, split.partition(), split.schedule(), PipelineValues(split, options.seed));
  } else {
    b.unfused = b.run;
  }
  json r = BaseReport("bench", c, arch, options);
  r["reps"] = std::max(1, options.reps);
  r["counters"] = CountersToJson(b.run.total);
  r["per_unit"] = PerUnitJson(b.run);
  r["unfused_counters"] = CountersToJson(b.unfused.total);
  r["savings"] = {{"global_bytes", b.unfused.total.GlobalBytes() - b.run.total.GlobalBytes()},
                  {"kernel_launches", b.unfused.total.kernel_launches - b.run.total.kernel_launches}};
  r["output_digest"] = OutputDigest(b.run.outputs);
  b.report = std::move(r);
  return b;
}

VerifyResult Verify(const Compiled& c, const ArchSpec& arch, const PipelineOptions& options,
                    const std::optional<RuntimeManifest>& manifest) {
  const Schedule schedule = manifest ? CheckedSchedule(c, *manifest, arch) : c.schedule();
  const TensorMap values = PipelineValues(c, options.seed);
  const GraphRun run = RunGraph(c.graph, c.partition(), schedule, values);
  const TensorMap expected = ReferenceGraph(c.source, values);
  VerifyResult v;
  v.mismatch = CompareOutputs(expected, run.outputs);
  v.counters = run.total;
  json r{{"command", "verify"},
         {"arch", arch.name},
         {"graph_checksum", c.manifest.graph_checksum},
         {"options", OptionsJson(options)},
         {"status", v.mismatch.equal ? "pass" : "fail"},
         {"outputs", expected.size()},
         {"counters", CountersToJson(run.total)}};
  if (!v.mismatch.equal) {
    r["first_mismatch"] = {{"output", v.mismatch.output},
                           {"index", v.mismatch.index},
                           {"coords", v.mismatch.coords},
                           {"expected", v.mismatch.expected},
                           {"actual", v.mismatch.actual}};
  }
  v.report = std::move(r);
  return v;
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kVerifyFailed:
    case ErrorCode::kIllegalFusion:
      return 3;
    case ErrorCode::kInternal:
    case ErrorCode::kConfigInvalid:
    case ErrorCode::kNoLegalFusedConfig:
      return 4;
    default:
      return 2;
  }
}

json ErrorJson(const Error& e) {
  return json{{"error", {{"code", std::string(ErrorCodeName(e.code()))}, {"message", e.what()}}}};
}

void WriteArtifacts(const Compiled& c, const json& report, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "kernels", ec);
  if (ec) Fail(ErrorCode::kParseError, "cannot create output directory '" + dir + "': " + ec.message());
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) Fail(ErrorCode::kParseError, "cannot write '" + p.string() + "'");
    f << text;
  };
  write(root / "manifest.json", EmitManifest(c.manifest));
  write(root / "report.json", report.dump(2) + "\n");
  for (const auto& [name, text] : c.sources) write(root / "kernels" / name, text);
}

}  // namespace bolt
