// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// JSON form of the graph ("bolt-graph/1"):
//
//   {"version": "bolt-graph/1",
//    "inputs":  [{"name", "shape", "dtype", "layout"}],
//    "params":  [{"name", "shape", "dtype", "layout", ["kind", "derived_from"]}],
//    "nodes":   [{"id", "kind", "attrs", "inputs"}],
//    "outputs": ["node id", ...]}

#ifndef BOLT_GRAPH_IO_H_
#define BOLT_GRAPH_IO_H_

#include <cstdint>
#include <string>
#include <string_view>

#include "bolt/graph.h"
#include "json.hpp"

namespace bolt {

inline constexpr std::string_view kGraphSchema = "bolt-graph/1";

nlohmann::json TensorTypeToJson(const TensorType& t);
TensorType TensorTypeFromJson(const nlohmann::json& j);

std::string_view ParamKindName(ParamKind k);
ParamKind ParseParamKind(std::string_view s);
/// Graph inputs and parameters; `is_param` adds the parameter kind.
nlohmann::json ValueInfoToJson(const ValueInfo& v, bool is_param);
ValueInfo ValueInfoFromJson(const nlohmann::json& j);

nlohmann::json GraphToJson(const Graph& graph);
Graph GraphFromJson(const nlohmann::json& j);

Graph LoadGraph(const std::string& path);

/// 64-bit FNV-1a.
uint64_t Fnv1a64(std::string_view bytes);
std::string Hex64(uint64_t v);

/// Checksum of the canonical JSON serialization.
std::string GraphChecksum(const Graph& graph);

}  // namespace bolt

#endif  // BOLT_GRAPH_IO_H_
