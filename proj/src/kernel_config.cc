// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/kernel_config.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "bolt/error.h"

namespace bolt {

using nlohmann::json;

std::string ToString(const TileShape& s) {
  std::ostringstream os;
  os << s.m << "x" << s.n << "x" << s.k;
  return os.str();
}

const std::vector<TileShape>& ArchSpec::InstructionShapes(DType t) const {
  static const std::vector<TileShape> kNone;
  auto it = instruction_shapes.find(t);
  return it == instruction_shapes.end() ? kNone : it->second;
}

namespace {

json TileToJson(const TileShape& s) { return json::array({s.m, s.n, s.k}); }

TileShape TileFromJson(const json& j) {
  const auto v = j.get<std::vector<int64_t>>();
  if (v.size() != 3) Fail(ErrorCode::kParseError, "tile shape must have 3 entries");
  return {v[0], v[1], v[2]};
}

}  // namespace

ArchSpec ArchSpecFromJson(const json& j) {
  try {
    ArchSpec a;
    a.name = j.at("name").get<std::string>();
    a.sm_count = j.at("sm_count").get<int>();
    a.smem_bytes_per_threadblock = j.at("smem_bytes_per_threadblock").get<int64_t>();
    a.registers_per_thread = j.at("registers_per_thread").get<int>();
    a.registers_per_threadblock = j.at("registers_per_threadblock").get<int64_t>();
    a.warp_size = j.at("warp_size").get<int>();
    a.max_threads_per_threadblock = j.at("max_threads_per_threadblock").get<int>();
    a.tensor_cores = j.at("tensor_cores").get<bool>();
    a.peak_bandwidth_gbps = j.at("peak_bandwidth_gbps").get<double>();
    a.peak_tflops = j.at("peak_tflops").get<double>();
    a.sm_tag = j.value("sm_tag", std::string("Sm80"));
    for (const auto& [dt, shapes] : j.at("instruction_shapes").items()) {
      auto& list = a.instruction_shapes[ParseDType(dt)];
      for (const auto& s : shapes) list.push_back(TileFromJson(s));
      if (list.empty()) Fail(ErrorCode::kParseError, "empty instruction shape list for " + dt);
    }
    if (a.sm_count <= 0 || a.smem_bytes_per_threadblock <= 0 || a.registers_per_thread <= 0 ||
        a.registers_per_threadblock <= 0 || a.warp_size <= 0 || a.max_threads_per_threadblock <= 0 ||
        a.peak_bandwidth_gbps <= 0 || a.peak_tflops <= 0) {
      Fail(ErrorCode::kParseError, "arch '" + a.name + "': capacities must be positive");
    }
    return a;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParseError, std::string("malformed arch descriptor: ") + e.what());
  }
}

json ArchSpecToJson(const ArchSpec& a) {
  json shapes = json::object();
  for (const auto& [dt, list] : a.instruction_shapes) {
    json arr = json::array();
    for (const auto& s : list) arr.push_back(TileToJson(s));
    shapes[std::string(DTypeName(dt))] = arr;
  }
  return json{{"name", a.name},
              {"sm_count", a.sm_count},
              {"smem_bytes_per_threadblock", a.smem_bytes_per_threadblock},
              {"registers_per_thread", a.registers_per_thread},
              {"registers_per_threadblock", a.registers_per_threadblock},
              {"warp_size", a.warp_size},
              {"max_threads_per_threadblock", a.max_threads_per_threadblock},
              {"tensor_cores", a.tensor_cores},
              {"peak_bandwidth_gbps", a.peak_bandwidth_gbps},
              {"peak_tflops", a.peak_tflops},
              {"sm_tag", a.sm_tag},
              {"instruction_shapes", shapes}};
}

ArchSpec LoadArchSpec(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kParseError, "cannot open arch file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParseError, "arch file '" + path + "' is not valid JSON: " + e.what());
  }
  return ArchSpecFromJson(j);
}

ArchSpec BundledArch(const std::string& name) {
  ArchSpec a;
  a.name = name;
  a.registers_per_thread = 255;
  a.registers_per_threadblock = 65536;
  a.warp_size = 32;
  a.max_threads_per_threadblock = 1024;
  a.tensor_cores = true;
  if (name == "sm75-t4-like") {
    a.sm_count = 40;
    a.smem_bytes_per_threadblock = 64 * 1024;
    a.peak_bandwidth_gbps = 320;
    a.peak_tflops = 65;
    a.sm_tag = "Sm75";
    a.instruction_shapes[DType::kFP16] = {{16, 8, 8}};
    a.instruction_shapes[DType::kINT8] = {{8, 8, 16}};
    a.instruction_shapes[DType::kFP32] = {{1, 1, 1}};
    return a;
  }
  if (name == "sm80-a100-like") {
    a.sm_count = 108;
    a.smem_bytes_per_threadblock = 163 * 1024;
    a.peak_bandwidth_gbps = 1555;
    a.peak_tflops = 312;
    a.sm_tag = "Sm80";
    a.instruction_shapes[DType::kFP16] = {{16, 8, 16}, {16, 8, 8}};
    a.instruction_shapes[DType::kBF16] = {{16, 8, 16}, {16, 8, 8}};
    a.instruction_shapes[DType::kINT8] = {{16, 8, 32}};
    a.instruction_shapes[DType::kFP32] = {{1, 1, 1}};
    return a;
  }
  Fail(ErrorCode::kParseError, "no bundled arch named '" + name + "'");
}

Alignment ComputeAlignment(int64_t extent, DType dtype) {
  for (int a : {8, 4, 2, 1}) {
    if (extent % a == 0 && a * Bits(dtype) <= 128) return a;
  }
  return 1;
}

int64_t KernelConfig::WarpCount() const {
  if (warp.m <= 0 || warp.n <= 0) return 0;
  return (threadblock.m / warp.m) * (threadblock.n / warp.n);
}

int64_t KernelConfig::OperandSmemBytes(DType dtype) const {
  return stages * (threadblock.m * threadblock.k + threadblock.k * threadblock.n) * Bytes(dtype);
}

int64_t KernelConfig::AccumulatorRegisters(int warp_size) const {
  return (warp.m * warp.n + warp_size - 1) / warp_size;
}

std::string ToString(const KernelConfig& c) {
  std::ostringstream os;
  os << "tb=" << ToString(c.threadblock) << " warp=" << ToString(c.warp)
     << " inst=" << ToString(c.instruction) << " stages=" << c.stages
     << " swizzle=" << static_cast<int>(c.swizzle) << " align=" << c.alignment_a << "/"
     << c.alignment_b;
  return os.str();
}

json KernelConfigToJson(const KernelConfig& c) {
  return json{{"threadblock", TileToJson(c.threadblock)},
              {"warp", TileToJson(c.warp)},
              {"instruction", TileToJson(c.instruction)},
              {"stages", c.stages},
              {"swizzle", static_cast<int>(c.swizzle)},
              {"alignment_a", c.alignment_a},
              {"alignment_b", c.alignment_b}};
}

KernelConfig KernelConfigFromJson(const json& j) {
  try {
    KernelConfig c;
    c.threadblock = TileFromJson(j.at("threadblock"));
    c.warp = TileFromJson(j.at("warp"));
    c.instruction = TileFromJson(j.at("instruction"));
    c.stages = j.at("stages").get<int>();
    const int sw = j.at("swizzle").get<int>();
    if (sw != 1 && sw != 2 && sw != 4 && sw != 8) Fail(ErrorCode::kParseError, "bad swizzle");
    c.swizzle = static_cast<Swizzle>(sw);
    c.alignment_a = j.at("alignment_a").get<int>();
    c.alignment_b = j.at("alignment_b").get<int>();
    return c;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParseError, std::string("malformed kernel config: ") + e.what());
  }
}

namespace {

// A warp extent must be a whole number of instructions, unless the whole
// threadblock extent is smaller than one instruction (a single predicated
// instruction covers it).
bool InstructionFits(int64_t warp, int64_t tb, int64_t inst) {
  if (inst <= 0) return false;
  if (warp % inst == 0) return true;
  return warp < inst && warp == tb;
}

bool ValidAlignment(Alignment a, DType t) {
  return (a == 1 || a == 2 || a == 4 || a == 8) && a * Bits(t) <= 128;
}

}  // namespace

std::vector<std::string> ConfigViolations(const KernelConfig& c, const GemmProblem& problem,
                                          const ArchSpec& arch) {
  std::vector<std::string> v;
  const TileShape& tb = c.threadblock;
  const TileShape& w = c.warp;
  const TileShape& in = c.instruction;
  if (tb.m < 1 || tb.n < 1 || tb.k < 1 || w.m < 1 || w.n < 1 || w.k < 1) {
    v.push_back("NON_POSITIVE_TILE");
    return v;
  }
  if (tb.m % w.m || tb.n % w.n || tb.k % w.k) v.push_back("TB_NOT_DIVISIBLE_BY_WARP");
  if (!InstructionFits(w.m, tb.m, in.m) || !InstructionFits(w.n, tb.n, in.n) ||
      !InstructionFits(w.k, tb.k, in.k)) {
    v.push_back("WARP_NOT_DIVISIBLE_BY_INSTRUCTION");
  }
  const auto& shapes = arch.InstructionShapes(problem.dtype_in);
  if (std::find(shapes.begin(), shapes.end(), in) == shapes.end()) {
    v.push_back("INSTRUCTION_UNSUPPORTED");
  }
  const int64_t warps = c.WarpCount();
  if (warps < 1 || warps > 16) v.push_back("WARP_COUNT");
  if (warps * arch.warp_size > arch.max_threads_per_threadblock) v.push_back("THREADS_PER_TB");
  if (c.stages < 2) v.push_back("STAGES");
  if (c.OperandSmemBytes(problem.dtype_in) > arch.smem_bytes_per_threadblock) {
    v.push_back("SMEM_CAPACITY");
  }
  if (c.AccumulatorRegisters(arch.warp_size) > arch.registers_per_thread) {
    v.push_back("REGISTER_BUDGET");
  }
  if (!ValidAlignment(c.alignment_a, problem.dtype_in) || !ValidAlignment(c.alignment_b, problem.dtype_in)) {
    v.push_back("ALIGNMENT");
  } else if (problem.k % c.alignment_a != 0) {
    v.push_back("ALIGNMENT_A_EXTENT");
  }
  return v;
}

Alignment OperandAlignmentA(const GemmProblem& p, int64_t conv_ic) {
  return ComputeAlignment(conv_ic > 0 ? conv_ic : p.k, p.dtype_in);
}

Alignment OperandAlignmentB(const GemmProblem& p, int64_t conv_ic) {
  return ComputeAlignment(conv_ic > 0 ? conv_ic : p.n, p.dtype_in);
}

}  // namespace bolt
