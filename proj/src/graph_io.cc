// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/graph_io.h"

#include <cstdio>
#include <fstream>

#include "bolt/error.h"

namespace bolt {

using nlohmann::json;

std::string_view ParamKindName(ParamKind k) {
  switch (k) {
    case ParamKind::kWeight: return "weight";
    case ParamKind::kPaddedWeight: return "padded_weight";
    case ParamKind::kPaddedBuffer: return "padded_buffer";
  }
  return "weight";
}

ParamKind ParseParamKind(std::string_view s) {
  if (s == "weight") return ParamKind::kWeight;
  if (s == "padded_weight") return ParamKind::kPaddedWeight;
  if (s == "padded_buffer") return ParamKind::kPaddedBuffer;
  Fail(ErrorCode::kParseError, "unknown param kind '" + std::string(s) + "'");
}

json ValueInfoToJson(const ValueInfo& v, bool is_param) {
  json j = TensorTypeToJson(v.type);
  j["name"] = v.name;
  if (is_param && v.param_kind != ParamKind::kWeight) {
    j["kind"] = ParamKindName(v.param_kind);
    if (!v.derived_from.empty()) j["derived_from"] = v.derived_from;
  }
  return j;
}

ValueInfo ValueInfoFromJson(const json& j) {
  ValueInfo v;
  v.name = j.at("name").get<std::string>();
  v.type = TensorTypeFromJson(j);
  if (j.contains("kind")) v.param_kind = ParseParamKind(j.at("kind").get<std::string>());
  if (j.contains("derived_from")) v.derived_from = j.at("derived_from").get<std::string>();
  return v;
}

namespace {

json AttrsToJson(const OpNode& n) {
  json a = json::object();
  const OpAttrs& at = n.attrs;
  switch (n.kind) {
    case OpKind::kGemm:
      a["alpha"] = at.alpha;
      a["beta"] = at.beta;
      break;
    case OpKind::kConv2d:
      a["kernel"] = at.kernel;
      a["stride"] = at.stride;
      a["padding"] = at.padding;
      a["dilation"] = at.dilation;
      break;
    case OpKind::kDTypeConvert:
      a["to_dtype"] = DTypeName(at.to_dtype);
      break;
    case OpKind::kLayoutTransform:
      a["to_layout"] = LayoutName(at.to_layout);
      break;
    case OpKind::kPad:
      a["pad_to"] = at.pad_to;
      break;
    default:
      break;
  }
  if (!at.nchw_inputs.empty()) a["nchw_inputs"] = at.nchw_inputs;
  if (at.nchw_output) a["nchw_output"] = true;
  return a;
}

Pair PairOr(const json& a, const char* key, Pair dflt) {
  if (!a.contains(key)) return dflt;
  const auto v = a.at(key).get<std::vector<int64_t>>();
  if (v.size() != 2) Fail(ErrorCode::kParseError, std::string("attribute '") + key + "' must have 2 entries");
  return {v[0], v[1]};
}

OpAttrs AttrsFromJson(const json& a) {
  OpAttrs at;
  if (a.is_null()) return at;
  at.kernel = PairOr(a, "kernel", at.kernel);
  at.stride = PairOr(a, "stride", at.stride);
  at.padding = PairOr(a, "padding", at.padding);
  at.dilation = PairOr(a, "dilation", at.dilation);
  if (a.contains("alpha")) at.alpha = a.at("alpha").get<float>();
  if (a.contains("beta")) at.beta = a.at("beta").get<float>();
  if (a.contains("to_dtype")) at.to_dtype = ParseDType(a.at("to_dtype").get<std::string>());
  if (a.contains("to_layout")) at.to_layout = ParseLayout(a.at("to_layout").get<std::string>());
  if (a.contains("pad_to")) at.pad_to = a.at("pad_to").get<int64_t>();
  if (a.contains("nchw_inputs")) at.nchw_inputs = a.at("nchw_inputs").get<std::vector<int>>();
  if (a.contains("nchw_output")) at.nchw_output = a.at("nchw_output").get<bool>();
  return at;
}

}  // namespace

json TensorTypeToJson(const TensorType& t) {
  return json{{"shape", t.shape}, {"dtype", DTypeName(t.dtype)}, {"layout", LayoutName(t.layout)}};
}

TensorType TensorTypeFromJson(const json& j) {
  TensorType t;
  t.shape = j.at("shape").get<Shape>();
  t.dtype = ParseDType(j.at("dtype").get<std::string>());
  t.layout = j.contains("layout") ? ParseLayout(j.at("layout").get<std::string>())
                                  : (t.rank() == 4 ? Layout::kNHWC : Layout::kRowMajor);
  for (int64_t e : t.shape) {
    if (e < 1) Fail(ErrorCode::kParseError, "tensor extents must be positive");
  }
  return t;
}

json GraphToJson(const Graph& graph) {
  json j;
  j["version"] = kGraphSchema;
  j["inputs"] = json::array();
  for (const auto& v : graph.inputs) j["inputs"].push_back(ValueInfoToJson(v, false));
  j["params"] = json::array();
  for (const auto& v : graph.params) j["params"].push_back(ValueInfoToJson(v, true));
  j["nodes"] = json::array();
  for (const auto& n : graph.nodes) {
    json jn{{"id", n.id}, {"kind", OpKindName(n.kind)}, {"attrs", AttrsToJson(n)}, {"inputs", n.inputs}};
    if (n.type) jn["type"] = TensorTypeToJson(*n.type);
    j["nodes"].push_back(std::move(jn));
  }
  j["outputs"] = graph.outputs;
  return j;
}

Graph GraphFromJson(const json& j) {
  try {
    if (!j.is_object()) Fail(ErrorCode::kParseError, "graph document must be a JSON object");
    if (j.value("version", std::string()) != kGraphSchema) {
      Fail(ErrorCode::kParseError, "graph version must be \"" + std::string(kGraphSchema) + "\"");
    }
    Graph g;
    for (const auto& v : j.value("inputs", json::array())) g.inputs.push_back(ValueInfoFromJson(v));
    for (const auto& v : j.value("params", json::array())) g.params.push_back(ValueInfoFromJson(v));
    for (const auto& jn : j.value("nodes", json::array())) {
      OpNode n;
      n.id = jn.at("id").get<std::string>();
      n.kind = ParseOpKind(jn.at("kind").get<std::string>());
      n.attrs = AttrsFromJson(jn.value("attrs", json::object()));
      n.inputs = jn.at("inputs").get<std::vector<std::string>>();
      if (jn.contains("type")) n.type = TensorTypeFromJson(jn.at("type"));
      g.nodes.push_back(std::move(n));
    }
    g.outputs = j.value("outputs", std::vector<std::string>{});
    return g;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParseError, std::string("malformed graph: ") + e.what());
  }
}

Graph LoadGraph(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kParseError, "cannot open graph file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParseError, "graph file '" + path + "' is not valid JSON: " + e.what());
  }
  return GraphFromJson(j);
}

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string Hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string GraphChecksum(const Graph& graph) { return Hex64(Fnv1a64(GraphToJson(graph).dump())); }

}  // namespace bolt
