// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

// Test helpers: an independent numeric oracle, random problem and chain
// generators, and a small graph builder.

#ifndef BOLT_TESTS_SUPPORT_H_
#define BOLT_TESTS_SUPPORT_H_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bolt/executor.h"
#include "bolt/fusion.h"
#include "bolt/graph.h"
#include "bolt/kernel_config.h"
#include "bolt/partition.h"

namespace bolt::testing {

using Rng = std::mt19937_64;

int64_t Uniform(Rng& rng, int64_t lo, int64_t hi);  // inclusive
template <class T>
const T& Pick(Rng& rng, const std::vector<T>& v) {
  return v[static_cast<size_t>(Uniform(rng, 0, static_cast<int64_t>(v.size()) - 1))];
}

// Oracle rounding, written from the format definitions (scale, nearbyint,
// unscale) rather than bit manipulation.
float OracleRound(DType t, float x);

// Values uniform in [-1, 1] rounded to the dtype (INT8: integers in [-4, 4]).
Tensor RandomTensor(const TensorType& type, Rng& rng);

// Owns the vectors and C operand an Epilogue points into.
struct OwnedEpilogue {
  Epilogue epi;
  std::vector<Tensor> vectors;
  std::optional<Tensor> source;

  OwnedEpilogue() = default;
  OwnedEpilogue(const OwnedEpilogue&) = delete;
  OwnedEpilogue& operator=(const OwnedEpilogue&) = delete;
  OwnedEpilogue(OwnedEpilogue&& o) noexcept { *this = std::move(o); }
  OwnedEpilogue& operator=(OwnedEpilogue&& o) noexcept;
};

struct EpilogueSpec {
  float alpha = 1.0f;
  float beta = 0.0f;
  bool with_source = false;
  DType anchor_dtype = DType::kFP16;
  std::vector<OpKind> ops;          // element-wise, optional trailing ReduceColumns
  std::vector<DType> op_dtypes;     // per op
};

EpilogueSpec RandomEpilogueSpec(Rng& rng, DType anchor_dtype, bool allow_reduce, bool allow_convert);
OwnedEpilogue MaterializeEpilogue(const EpilogueSpec& spec, int64_t m, int64_t n, Rng& rng);

// Naive oracle: FP32 accumulation in ascending k, the epilogue applied per
// element with a rounding after each op.
Tensor OracleGemm(const GemmProblem& p, const Tensor& a, const Tensor& b, const Epilogue& epi);
Tensor OracleConv2d(const Conv2dProblem& p, const Tensor& x, const Tensor& w, const Epilogue& epi,
                    bool input_nchw = false);

bool BitEqual(const Tensor& a, const Tensor& b);

// Configs accepted by the executor's tiling check, independent of any arch.
KernelConfig RandomTiling(Rng& rng);

struct RandomProblem {
  GemmProblem gemm;
  std::optional<Conv2dProblem> conv;
};
RandomProblem RandomAnchorProblem(Rng& rng, DType dtype);

StageShape GemmStage(int64_t m, int64_t n, int64_t k, DType dtype = DType::kFP16);
StageShape ConvStage(const Conv2dProblem& p);
Conv2dProblem MakeConv(int64_t n, int64_t h, int64_t w, int64_t ic, int64_t oc, Pair kernel, Pair stride,
                       Pair padding, DType dtype = DType::kFP16);

// Operands and epilogues for a chain, with owned storage.
struct ChainData {
  ChainShape shape;
  Tensor activation;
  std::vector<Tensor> weights;
  std::vector<OwnedEpilogue> epilogues;

  ChainOperands Operands() const;
};

ChainData MakeChainData(ChainShape shape, Rng& rng, bool random_epilogues);
// Stage-by-stage oracle of a chain.
Tensor OracleChain(const ChainData& d);

// Independent check of the arch capacity rules for one config: operand
// staging fits smem, accumulators fit the per-thread and per-block register
// files, and the warp count is 1..16 within the thread limit. Empty if ok.
std::string CapacityIssue(const KernelConfig& c, DType dtype, const ArchSpec& arch);

// a is no worse than b on every counter and better on at least one.
bool Dominates(const ExecCounters& a, const ExecCounters& b);

// Graph building.
class GraphBuilder {
 public:
  std::string Input(const std::string& name, Shape shape, DType dt = DType::kFP16, Layout l = Layout::kRowMajor);
  std::string Param(const std::string& name, Shape shape, DType dt = DType::kFP16, Layout l = Layout::kRowMajor);
  std::string Node(const std::string& id, OpKind kind, std::vector<std::string> inputs, OpAttrs attrs = {});
  std::string Gemm(const std::string& id, const std::string& a, int64_t k, int64_t n, DType dt = DType::kFP16);
  std::string Conv(const std::string& id, const std::string& x, int64_t ic, int64_t oc, Pair kernel, Pair stride,
                   Pair padding, DType dt = DType::kFP16);
  std::string Bias(const std::string& id, const std::string& x, int64_t n, DType dt = DType::kFP16);
  void Output(const std::string& id) { graph_.outputs.push_back(id); }
  Graph Build() const { return graph_; }

 private:
  Graph graph_;
};

// Random small graph of anchors, epilogue ops, branches and host-only ops.
Graph RandomGraph(Rng& rng);

// Chain legality fixtures (fixtures/legality/cases.json). Cases without
// configs are checked for structural feasibility only.
struct LegalityCase {
  std::string name;
  std::string rule;
  ChainShape chain;
  std::optional<std::vector<KernelConfig>> configs;
  std::string arch;
  bool legal = true;
  std::optional<FusionKind> kind;
  std::vector<std::string> reasons;
};

std::vector<LegalityCase> LoadLegalityCases();
ChainLegality EvaluateCase(const LegalityCase& c);
// Empty when the verdict matches the fixture, else a description.
std::string VerdictMismatch(const LegalityCase& c, const ChainLegality& v);

// Runs the boltc binary with `args`; stderr is captured through a file.
struct CommandResult {
  int rc = -1;
  std::string out;
  std::string err;
};
CommandResult RunBoltc(const std::string& args);
std::string ReadFile(const std::string& path);

// Compares `text` with tests/golden/<rel>. With BOLT_UPDATE_GOLDEN=1 in the
// environment the snapshot is rewritten instead. Empty on match.
std::string GoldenMismatch(const std::string& rel, const std::string& text);

}  // namespace bolt::testing

#endif  // BOLT_TESTS_SUPPORT_H_
