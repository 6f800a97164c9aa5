// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <functional>
#include <limits>

#include "bolt/dtype.h"
#include "bolt/error.h"
#include "bolt/graph.h"
#include "bolt/graph_io.h"
#include "bolt/kernel_config.h"
#include "support.h"

namespace bolt {
namespace {

using testing::GraphBuilder;

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;  // nothing thrown
}

TEST(DType, HalfKnownValues) {
  EXPECT_EQ(RoundToFP16(1.0f), 1.0f);
  EXPECT_EQ(RoundToFP16(1.0f / 3.0f), 0.333251953125f);
  EXPECT_EQ(RoundToFP16(65504.0f), 65504.0f);
  EXPECT_TRUE(std::isinf(RoundToFP16(65520.0f)));       // tie rounds up to 2^16
  EXPECT_EQ(RoundToFP16(65519.0f), 65504.0f);
  EXPECT_EQ(RoundToFP16(2049.0f), 2048.0f);              // tie to even
  EXPECT_EQ(RoundToFP16(2051.0f), 2052.0f);
  EXPECT_EQ(RoundToFP16(std::ldexp(1.0f, -24)), std::ldexp(1.0f, -24));
  EXPECT_EQ(RoundToFP16(std::ldexp(1.0f, -25)), 0.0f);   // tie to even zero
  EXPECT_EQ(RoundToFP16(std::ldexp(1.5f, -25)), std::ldexp(1.0f, -24));
  EXPECT_TRUE(std::signbit(RoundToFP16(-1e-30f)));
  EXPECT_TRUE(std::isnan(RoundToFP16(std::numeric_limits<float>::quiet_NaN())));
}

TEST(DType, BF16AndInt8) {
  EXPECT_EQ(RoundToBF16(1.0f + std::ldexp(1.0f, -8)), 1.0f);  // tie to even
  EXPECT_EQ(RoundToBF16(1.0f + 3 * std::ldexp(1.0f, -8)), 1.0f + std::ldexp(1.0f, -6));
  EXPECT_EQ(RoundTo(DType::kINT8, 2.5f), 2.0f);
  EXPECT_EQ(RoundTo(DType::kINT8, -3.5f), -4.0f);
  EXPECT_EQ(RoundTo(DType::kINT8, 300.0f), 127.0f);
  EXPECT_EQ(RoundTo(DType::kINT8, -300.0f), -128.0f);
  EXPECT_EQ(RoundTo(DType::kFP32, 0.1f), 0.1f);
}

TEST(DType, RoundingMatchesOracleOnEveryHalfNeighbourhood) {
  // Every float16 value and the midpoints around it.
  for (uint32_t h = 0; h < 0x7c00; ++h) {
    for (float sign : {1.0f, -1.0f}) {
      const int exp = static_cast<int>(h >> 10), mant = static_cast<int>(h & 0x3ff);
      const double v = exp == 0 ? std::ldexp(mant, -24) : std::ldexp(1024 + mant, exp - 25);
      const double ulp = exp == 0 ? std::ldexp(1.0, -24) : std::ldexp(1.0, exp - 25);
      for (double probe : {v, v + ulp / 2, v + ulp / 4, v + 3 * ulp / 4}) {
        const float x = static_cast<float>(sign * probe);
        ASSERT_EQ(std::bit_cast<uint32_t>(RoundToFP16(x)),
                  std::bit_cast<uint32_t>(testing::OracleRound(DType::kFP16, x)))
            << "x=" << x;
      }
    }
  }
}

TEST(DType, RoundingMatchesOracleOnRandomFloats) {
  testing::Rng rng(7);
  std::uniform_int_distribution<uint32_t> bits;
  for (int i = 0; i < 200000; ++i) {
    const float x = std::bit_cast<float>(bits(rng));
    if (std::isnan(x)) continue;
    ASSERT_EQ(std::bit_cast<uint32_t>(RoundToFP16(x)), std::bit_cast<uint32_t>(testing::OracleRound(DType::kFP16, x)))
        << x;
    ASSERT_EQ(std::bit_cast<uint32_t>(RoundToBF16(x)), std::bit_cast<uint32_t>(testing::OracleRound(DType::kBF16, x)))
        << x;
  }
}

TEST(DType, Names) {
  for (DType t : {DType::kFP16, DType::kBF16, DType::kFP32, DType::kINT8}) EXPECT_EQ(ParseDType(DTypeName(t)), t);
  EXPECT_EQ(CodeOf([] { ParseDType("float64"); }), ErrorCode::kParseError);
}

TEST(Alignment, Examples) {
  EXPECT_EQ(ComputeAlignment(3, DType::kFP16), 1);
  EXPECT_EQ(ComputeAlignment(46, DType::kFP16), 2);
  EXPECT_EQ(ComputeAlignment(48, DType::kFP16), 8);
  EXPECT_EQ(ComputeAlignment(174, DType::kFP16), 2);
  EXPECT_EQ(ComputeAlignment(176, DType::kFP16), 8);
  EXPECT_EQ(ComputeAlignment(12, DType::kFP16), 4);
  EXPECT_EQ(ComputeAlignment(64, DType::kFP32), 4);  // 4 * 32 = 128 bits
  EXPECT_EQ(ComputeAlignment(64, DType::kINT8), 8);  // largest listed value
  for (int64_t e = 1; e < 300; ++e) {
    for (DType t : {DType::kFP16, DType::kFP32, DType::kINT8}) {
      const int a = ComputeAlignment(e, t);
      EXPECT_EQ(e % a, 0);
      EXPECT_LE(a * Bits(t), 128);
    }
  }
}

TEST(Conv, OutputExtentAndImplicitGemm) {
  EXPECT_EQ(ConvOutExtent(56, 3, 1, 1), 56);
  EXPECT_EQ(ConvOutExtent(224, 3, 2, 1), 112);
  EXPECT_EQ(ConvOutExtent(112, 3, 2, 1), 56);
  EXPECT_EQ(ConvOutExtent(20, 5, 1, 2), 20);
  EXPECT_EQ(ConvOutExtent(14, 5, 1, 0), 10);
  EXPECT_EQ(ConvOutExtent(19, 7, 1, 0), 13);
  const Conv2dProblem p = testing::MakeConv(32, 56, 56, 48, 48, {1, 1}, {1, 1}, {0, 0});
  const GemmProblem g = Conv2dAsImplicitGemm(p);
  EXPECT_EQ(g.m, 100352);
  EXPECT_EQ(g.n, 48);
  EXPECT_EQ(g.k, 48);
  const GemmProblem g3 = Conv2dAsImplicitGemm(testing::MakeConv(1, 56, 56, 64, 64, {3, 3}, {1, 1}, {1, 1}));
  EXPECT_EQ(g3.m, 3136);
  EXPECT_EQ(g3.k, 576);
}

Graph ConvGraph() {
  GraphBuilder b;
  const auto x = b.Input("x", {32, 56, 56, 64}, DType::kFP16, Layout::kNHWC);
  const auto c = b.Conv("conv", x, 64, 64, {3, 3}, {1, 1}, {1, 1});
  b.Output(b.Node("relu", OpKind::kReLU, {c}));
  return b.Build();
}

TEST(Graph, InferTypesConvAndGemm) {
  const Graph g = InferTypes(ConvGraph());
  EXPECT_EQ(g.TypeOf("conv").shape, (Shape{32, 56, 56, 64}));
  EXPECT_EQ(g.TypeOf("conv").layout, Layout::kNHWC);
  EXPECT_EQ(g.TypeOf("relu").dtype, DType::kFP16);

  GraphBuilder b;
  b.Output(b.Gemm("g", b.Input("a", {1024, 1024}), 1024, 1024));
  const Graph gg = InferTypes(b.Build());
  EXPECT_EQ(gg.TypeOf("g").shape, (Shape{1024, 1024}));
  EXPECT_EQ(GemmProblemOf(gg, *gg.FindNode("g")).Macs(), int64_t{1} << 30);
}

TEST(Graph, InferTypesOps) {
  GraphBuilder b;
  const auto x = b.Input("x", {8, 16});
  const auto g = b.Gemm("g", x, 16, 4);
  OpAttrs to32;
  to32.to_dtype = DType::kFP32;
  const auto cvt = b.Node("cvt", OpKind::kDTypeConvert, {g}, to32);
  const auto red = b.Node("red", OpKind::kReduceColumns, {cvt});
  const auto sm = b.Node("sm", OpKind::kSoftmax, {b.Input("y", {8, 16}, DType::kFP32)});
  b.Output(red);
  b.Output(sm);
  const Graph t = InferTypes(b.Build());
  EXPECT_EQ(t.TypeOf("cvt").dtype, DType::kFP32);
  EXPECT_EQ(t.TypeOf("red").shape, (Shape{8, 1}));
  EXPECT_EQ(t.TypeOf("red").dtype, DType::kFP32);
  EXPECT_EQ(t.TypeOf("sm").shape, (Shape{8, 16}));
}

TEST(Graph, Errors) {
  {
    GraphBuilder b;
    b.Output(b.Gemm("g", b.Input("a", {8, 16}), 15, 4));  // K mismatch
    EXPECT_EQ(CodeOf([&] { InferTypes(b.Build()); }), ErrorCode::kShapeMismatch);
  }
  {
    GraphBuilder b;
    b.Input("a", {8, 16});
    b.Node("r1", OpKind::kReLU, {"r2"});
    b.Node("r2", OpKind::kReLU, {"r1"});
    b.Output("r2");
    EXPECT_EQ(CodeOf([&] { InferTypes(b.Build()); }), ErrorCode::kCycleDetected);
  }
  {
    GraphBuilder b;
    b.Output(b.Node("r", OpKind::kReLU, {"missing"}));
    EXPECT_EQ(CodeOf([&] { InferTypes(b.Build()); }), ErrorCode::kUnknownReference);
  }
  {
    GraphBuilder b;
    const auto x = b.Input("x", {1, 8, 8, 4}, DType::kFP16, Layout::kNHWC);
    OpAttrs a;
    a.kernel = {3, 3};
    a.dilation = {2, 2};
    b.Param("w", {4, 3, 3, 4});
    b.Output(b.Node("c", OpKind::kConv2d, {x, "w"}, a));
    EXPECT_EQ(CodeOf([&] { InferTypes(b.Build()); }), ErrorCode::kUnsupportedOp);
  }
  {
    GraphBuilder b;
    const auto x = b.Input("x", {1, 8, 8, 4}, DType::kFP16, Layout::kRowMajor);
    b.Output(b.Conv("c", x, 4, 4, {3, 3}, {1, 1}, {1, 1}));
    EXPECT_EQ(CodeOf([&] { InferTypes(b.Build()); }), ErrorCode::kUnsupportedLayout);
  }
  {
    GraphBuilder b;
    const auto x = b.Input("x", {1, 2, 2, 4}, DType::kFP16, Layout::kNHWC);
    b.Output(b.Conv("c", x, 4, 4, {5, 5}, {1, 1}, {0, 0}));
    EXPECT_EQ(CodeOf([&] { InferTypes(b.Build()); }), ErrorCode::kShapeMismatch);
  }
  {
    GraphBuilder b;
    const auto x = b.Input("x", {8, 16});
    b.Output(b.Bias("bias", x, 15));
    EXPECT_EQ(CodeOf([&] { InferTypes(b.Build()); }), ErrorCode::kShapeMismatch);
  }
  EXPECT_EQ(CodeOf([] { ParseOpKind("Attention"); }), ErrorCode::kUnsupportedOp);
}

TEST(Graph, TopoOrderAndConsumers) {
  GraphBuilder b;
  const auto x = b.Input("x", {4, 4});
  b.Node("c", OpKind::kReLU, {"b"});
  b.Node("b", OpKind::kReLU, {"a"});
  b.Node("a", OpKind::kReLU, {x});
  b.Node("d", OpKind::kGELU, {"a"});
  b.Output("c");
  b.Output("d");
  const Graph g = b.Build();
  const auto order = TopoOrder(g);
  auto pos = [&](const std::string& id) { return std::find(order.begin(), order.end(), id) - order.begin(); };
  EXPECT_LT(pos("a"), pos("b"));
  EXPECT_LT(pos("b"), pos("c"));
  EXPECT_LT(pos("a"), pos("d"));
  EXPECT_EQ(g.Consumers("a"), (std::vector<std::string>{"b", "d"}));
  EXPECT_EQ(g.Uses("c"), 1);
  EXPECT_EQ(g.Uses("a"), 2);
}

TEST(GraphIO, RoundTripAndChecksum) {
  const Graph g = ConvGraph();
  const nlohmann::json j = GraphToJson(g);
  EXPECT_EQ(j.at("version"), std::string(kGraphSchema));
  const Graph back = GraphFromJson(j);
  EXPECT_EQ(back, g);
  EXPECT_EQ(GraphChecksum(back), GraphChecksum(g));
  Graph other = g;
  other.nodes[0].attrs.stride = {2, 2};
  EXPECT_NE(GraphChecksum(other), GraphChecksum(g));
}

TEST(GraphIO, RejectsMalformed) {
  EXPECT_EQ(CodeOf([] { GraphFromJson(nlohmann::json::array()); }), ErrorCode::kParseError);
  EXPECT_EQ(CodeOf([] { GraphFromJson(nlohmann::json{{"version", "other/1"}}); }), ErrorCode::kParseError);
  nlohmann::json j = GraphToJson(ConvGraph());
  j["inputs"][0]["shape"] = {1, 0, 3, 3};
  EXPECT_EQ(CodeOf([&] { GraphFromJson(j); }), ErrorCode::kParseError);
  j = GraphToJson(ConvGraph());
  j["nodes"][0]["attrs"]["stride"] = {1};
  EXPECT_EQ(CodeOf([&] { GraphFromJson(j); }), ErrorCode::kParseError);
  j = GraphToJson(ConvGraph());
  j["nodes"][0]["kind"] = "Attention";
  EXPECT_EQ(CodeOf([&] { GraphFromJson(j); }), ErrorCode::kUnsupportedOp);
  EXPECT_EQ(CodeOf([] { LoadGraph("/nonexistent/graph.json"); }), ErrorCode::kParseError);
}

TEST(GraphIO, FixturesLoad) {
  for (const char* name : {"repvgg_a0_like", "b2b_gemm_chains", "padding_ic46", "gemm_bias_relu", "conv_epilogue",
                           "bert_ffn_like", "unsupported_only", "empty"}) {
    const Graph g = LoadGraph(std::string(BOLT_SOURCE_DIR) + "/fixtures/graphs/" + name + ".json");
    if (!g.nodes.empty()) {
      EXPECT_NO_THROW(InferTypes(g)) << name;
    }
  }
}

TEST(Arch, BundledMatchesFixtures) {
  for (const char* name : {"sm75-t4-like", "sm80-a100-like"}) {
    const ArchSpec file = LoadArchSpec(std::string(BOLT_SOURCE_DIR) + "/fixtures/arch/" + name + ".json");
    EXPECT_EQ(ArchSpecToJson(file), ArchSpecToJson(BundledArch(name)));
  }
  EXPECT_EQ(CodeOf([] { BundledArch("sm90"); }), ErrorCode::kParseError);
  nlohmann::json bad = ArchSpecToJson(BundledArch("sm75-t4-like"));
  bad["smem_bytes_per_threadblock"] = 0;
  EXPECT_EQ(CodeOf([&] { ArchSpecFromJson(bad); }), ErrorCode::kParseError);
}

}  // namespace
}  // namespace bolt
