// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.h"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace bolt::testing {

int64_t Uniform(Rng& rng, int64_t lo, int64_t hi) {
  return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
}

namespace {

// Round to a binary format with `mant_bits` stored mantissa bits, minimum
// normal exponent `emin` and largest finite value `max_finite`.
float RoundBinary(float x, int mant_bits, int emin, double max_finite) {
  if (std::isnan(x) || std::isinf(x) || x == 0.0f) return x;
  const double v = x;
  int e;
  std::frexp(v, &e);  // v = f * 2^e, 0.5 <= |f| < 1
  const int lead = std::max(e - 1, emin);
  const double quantum = std::ldexp(1.0, lead - mant_bits);
  const double r = std::nearbyint(v / quantum) * quantum;
  if (std::fabs(r) > max_finite) return std::copysign(std::numeric_limits<float>::infinity(), x);
  if (r == 0.0) return std::copysign(0.0f, x);
  return static_cast<float>(r);
}

float OracleElementwise(OpKind kind, float x, float operand) {
  switch (kind) {
    case OpKind::kBiasAdd: return x + operand;
    case OpKind::kBroadcastColumns: return x * operand;
    case OpKind::kReLU: return x > 0.0f ? x : 0.0f;
    case OpKind::kGELU: return 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752f));
    case OpKind::kHardswish: return x * std::min(std::max(x + 3.0f, 0.0f), 6.0f) / 6.0f;
    case OpKind::kSoftplus: return x > 20.0f ? x : std::log1p(std::exp(x));
    case OpKind::kDTypeConvert: return x;
    default: return std::numeric_limits<float>::quiet_NaN();
  }
}

// Applies the epilogue to a full accumulator matrix.
Tensor OracleEpilogue(const std::vector<float>& acc, int64_t m, int64_t n, const Epilogue& epi, Shape out_shape,
                      Layout layout) {
  const bool reduces = !epi.ops.empty() && epi.ops.back().kind == OpKind::kReduceColumns;
  const size_t elementwise = reduces ? epi.ops.size() - 1 : epi.ops.size();
  DType out_dtype = epi.ops.empty() ? epi.anchor_dtype : epi.ops.back().out_dtype;
  if (reduces) out_shape.back() = 1;
  Tensor out(TensorType{out_shape, out_dtype, layout});
  for (int64_t i = 0; i < m; ++i) {
    float row = 0.0f;
    for (int64_t j = 0; j < n; ++j) {
      float v = epi.alpha * acc[i * n + j];
      if (epi.source && epi.beta != 0.0f) v = v + epi.beta * epi.source->data[i * n + j];
      v = OracleRound(epi.anchor_dtype, v);
      for (size_t o = 0; o < elementwise; ++o) {
        const auto& op = epi.ops[o];
        v = OracleRound(op.out_dtype, OracleElementwise(op.kind, v, op.vector ? op.vector->data[j] : 0.0f));
      }
      if (reduces) {
        row += v;
      } else {
        out.data[i * n + j] = v;
      }
    }
    if (reduces) out.data[i] = row;
  }
  return out;
}

}  // namespace

float OracleRound(DType t, float x) {
  switch (t) {
    case DType::kFP16: return RoundBinary(x, 10, -14, 65504.0);
    case DType::kBF16: return RoundBinary(x, 7, -126, 3.3895313892515355e38);
    case DType::kFP32: return x;
    case DType::kINT8: return std::clamp(std::nearbyint(x), -128.0f, 127.0f);
  }
  return x;
}

Tensor RandomTensor(const TensorType& type, Rng& rng) {
  Tensor t(type);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : t.data) {
    v = type.dtype == DType::kINT8 ? static_cast<float>(Uniform(rng, -4, 4)) : OracleRound(type.dtype, u(rng));
  }
  return t;
}

OwnedEpilogue& OwnedEpilogue::operator=(OwnedEpilogue&& o) noexcept {
  epi = o.epi;
  vectors = std::move(o.vectors);
  source = std::move(o.source);
  // Re-point into our own storage.
  size_t vi = 0;
  for (auto& op : epi.ops) {
    if (op.vector) op.vector = &vectors[vi++];
  }
  epi.source = source ? &*source : nullptr;
  return *this;
}

EpilogueSpec RandomEpilogueSpec(Rng& rng, DType anchor_dtype, bool allow_reduce, bool allow_convert) {
  static const std::vector<OpKind> kinds = {OpKind::kBiasAdd,   OpKind::kReLU,     OpKind::kGELU,
                                            OpKind::kHardswish, OpKind::kSoftplus, OpKind::kBroadcastColumns};
  EpilogueSpec s;
  s.anchor_dtype = anchor_dtype;
  s.alpha = Pick(rng, std::vector<float>{1.0f, 1.0f, 0.5f, 2.0f, -1.0f});
  if (Uniform(rng, 0, 4) == 0) {
    s.with_source = true;
    s.beta = Pick(rng, std::vector<float>{1.0f, 0.5f, -2.0f});
  }
  DType cur = anchor_dtype;
  const int64_t count = Uniform(rng, 0, 3);
  for (int64_t i = 0; i < count; ++i) {
    OpKind k = Pick(rng, kinds);
    if (allow_convert && Uniform(rng, 0, 7) == 0) {
      k = OpKind::kDTypeConvert;
      cur = cur == DType::kFP32 ? DType::kFP16 : DType::kFP32;
    }
    s.ops.push_back(k);
    s.op_dtypes.push_back(cur);
  }
  if (allow_reduce && Uniform(rng, 0, 9) == 0) {
    s.ops.push_back(OpKind::kReduceColumns);
    s.op_dtypes.push_back(DType::kFP32);
  }
  return s;
}

OwnedEpilogue MaterializeEpilogue(const EpilogueSpec& spec, int64_t m, int64_t n, Rng& rng) {
  OwnedEpilogue o;
  o.epi.alpha = spec.alpha;
  o.epi.beta = spec.beta;
  o.epi.anchor_dtype = spec.anchor_dtype;
  if (spec.with_source) o.source = RandomTensor(TensorType{{m, n}, spec.anchor_dtype, Layout::kRowMajor}, rng);
  size_t nvec = 0;
  for (OpKind k : spec.ops) nvec += (k == OpKind::kBiasAdd || k == OpKind::kBroadcastColumns);
  o.vectors.reserve(nvec);
  DType prev = spec.anchor_dtype;
  for (size_t i = 0; i < spec.ops.size(); ++i) {
    EpilogueOp op;
    op.kind = spec.ops[i];
    op.out_dtype = spec.op_dtypes[i];
    if (op.kind == OpKind::kBiasAdd || op.kind == OpKind::kBroadcastColumns) {
      o.vectors.push_back(RandomTensor(TensorType{{n}, prev, Layout::kRowMajor}, rng));
      op.vector = &o.vectors.back();
    }
    prev = op.out_dtype;
    o.epi.ops.push_back(op);
  }
  o.epi.source = o.source ? &*o.source : nullptr;
  return o;
}

Tensor OracleGemm(const GemmProblem& p, const Tensor& a, const Tensor& b, const Epilogue& epi) {
  std::vector<float> acc(static_cast<size_t>(p.m * p.n), 0.0f);
  const bool a_col = a.type.layout == Layout::kColMajor;
  const bool b_col = b.type.layout == Layout::kColMajor;
  for (int64_t i = 0; i < p.m; ++i) {
    for (int64_t j = 0; j < p.n; ++j) {
      float s = 0.0f;
      for (int64_t k = 0; k < p.k; ++k) {
        const float av = a_col ? a.data[k * p.m + i] : a.data[i * p.k + k];
        const float bv = b_col ? b.data[j * p.k + k] : b.data[k * p.n + j];
        const float prod = av * bv;
        s = s + prod;
      }
      acc[i * p.n + j] = s;
    }
  }
  return OracleEpilogue(acc, p.m, p.n, epi, {p.m, p.n}, Layout::kRowMajor);
}

Tensor OracleConv2d(const Conv2dProblem& p, const Tensor& x, const Tensor& w, const Epilogue& epi, bool input_nchw) {
  const int64_t P = (p.h + 2 * p.padding[0] - p.kernel[0]) / p.stride[0] + 1;
  const int64_t Q = (p.w + 2 * p.padding[1] - p.kernel[1]) / p.stride[1] + 1;
  const int64_t M = p.n * P * Q;
  std::vector<float> acc(static_cast<size_t>(M * p.oc), 0.0f);
  auto xat = [&](int64_t b, int64_t h, int64_t ww, int64_t c) {
    return input_nchw ? x.data[((b * p.ic + c) * p.h + h) * p.w + ww] : x.data[((b * p.h + h) * p.w + ww) * p.ic + c];
  };
  for (int64_t b = 0; b < p.n; ++b) {
    for (int64_t y = 0; y < P; ++y) {
      for (int64_t z = 0; z < Q; ++z) {
        for (int64_t o = 0; o < p.oc; ++o) {
          // k enumerates (r, s, c) with c fastest, matching the filter layout.
          float s = 0.0f;
          for (int64_t r = 0; r < p.kernel[0]; ++r) {
            for (int64_t t = 0; t < p.kernel[1]; ++t) {
              const int64_t ih = y * p.stride[0] - p.padding[0] + r;
              const int64_t iw = z * p.stride[1] - p.padding[1] + t;
              const bool inside = ih >= 0 && ih < p.h && iw >= 0 && iw < p.w;
              for (int64_t c = 0; c < p.ic; ++c) {
                const float xv = inside ? xat(b, ih, iw, c) : 0.0f;
                const float prod = xv * w.data[((o * p.kernel[0] + r) * p.kernel[1] + t) * p.ic + c];
                s = s + prod;
              }
            }
          }
          acc[((b * P + y) * Q + z) * p.oc + o] = s;
        }
      }
    }
  }
  return OracleEpilogue(acc, M, p.oc, epi, {p.n, P, Q, p.oc}, Layout::kNHWC);
}

bool BitEqual(const Tensor& a, const Tensor& b) {
  if (a.type.shape != b.type.shape || a.data.size() != b.data.size()) return false;
  return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

KernelConfig RandomTiling(Rng& rng) {
  KernelConfig c;
  const std::vector<int64_t> tb = {8, 16, 32, 64, 128};
  c.threadblock = {Pick(rng, tb), Pick(rng, tb), Pick(rng, std::vector<int64_t>{8, 16, 32, 64})};
  auto divisor = [&](int64_t v) {
    std::vector<int64_t> ds;
    for (int64_t d = 1; d <= v; d *= 2) ds.push_back(d);
    return Pick(rng, ds);
  };
  c.warp = {divisor(c.threadblock.m), divisor(c.threadblock.n), divisor(c.threadblock.k)};
  c.instruction = {1, 1, 1};
  c.stages = static_cast<int>(Uniform(rng, 2, 4));
  c.swizzle = Pick(rng, std::vector<Swizzle>{Swizzle::kIdentity, Swizzle::k2, Swizzle::k4, Swizzle::k8});
  return c;
}

Conv2dProblem MakeConv(int64_t n, int64_t h, int64_t w, int64_t ic, int64_t oc, Pair kernel, Pair stride,
                       Pair padding, DType dtype) {
  Conv2dProblem p;
  p.n = n;
  p.h = h;
  p.w = w;
  p.ic = ic;
  p.oc = oc;
  p.kernel = kernel;
  p.stride = stride;
  p.padding = padding;
  p.dtype_in = dtype;
  p.dtype_out = dtype;
  return p;
}

RandomProblem RandomAnchorProblem(Rng& rng, DType dtype) {
  RandomProblem r;
  if (Uniform(rng, 0, 9) < 7) {
    r.gemm.m = Uniform(rng, 1, 96);
    r.gemm.n = Uniform(rng, 1, 96);
    r.gemm.k = Uniform(rng, 1, 96);
    r.gemm.dtype_in = r.gemm.dtype_out = dtype;
    return r;
  }
  for (;;) {
    const int64_t kh = Pick(rng, std::vector<int64_t>{1, 3, 5}), kw = Pick(rng, std::vector<int64_t>{1, 3, 5});
    const Conv2dProblem p =
        MakeConv(Uniform(rng, 1, 2), Uniform(rng, 2, 10), Uniform(rng, 2, 10), Uniform(rng, 1, 20),
                 Uniform(rng, 1, 40), {kh, kw}, {Uniform(rng, 1, 2), Uniform(rng, 1, 2)},
                 {Uniform(rng, 0, kh / 2), Uniform(rng, 0, kw / 2)}, dtype);
    if (p.h + 2 * p.padding[0] < kh || p.w + 2 * p.padding[1] < kw) continue;
    r.conv = p;
    r.gemm = Conv2dAsImplicitGemm(p);
    return r;
  }
}

StageShape GemmStage(int64_t m, int64_t n, int64_t k, DType dtype) {
  StageShape s;
  s.anchor = OpKind::kGemm;
  s.gemm.m = m;
  s.gemm.n = n;
  s.gemm.k = k;
  s.gemm.dtype_in = s.gemm.dtype_out = dtype;
  s.out_dtype = dtype;
  return s;
}

StageShape ConvStage(const Conv2dProblem& p) {
  StageShape s;
  s.anchor = OpKind::kConv2d;
  s.conv = p;
  s.gemm = Conv2dAsImplicitGemm(p);
  s.out_dtype = p.dtype_out;
  return s;
}

ChainOperands ChainData::Operands() const {
  ChainOperands ops;
  ops.activation = &activation;
  for (const auto& w : weights) ops.weights.push_back(&w);
  for (const auto& e : epilogues) ops.epilogues.push_back(e.epi);
  return ops;
}

ChainData MakeChainData(ChainShape shape, Rng& rng, bool random_epilogues) {
  ChainData d;
  const StageShape& first = shape.front();
  if (first.conv) {
    const auto& p = *first.conv;
    d.activation = RandomTensor(TensorType{{p.n, p.h, p.w, p.ic}, p.dtype_in, Layout::kNHWC}, rng);
  } else {
    d.activation = RandomTensor(TensorType{{first.gemm.m, first.gemm.k}, first.gemm.dtype_in, Layout::kRowMajor}, rng);
  }
  for (size_t i = 0; i < shape.size(); ++i) {
    StageShape& s = shape[i];
    if (s.conv) {
      const auto& p = *s.conv;
      d.weights.push_back(
          RandomTensor(TensorType{{p.oc, p.kernel[0], p.kernel[1], p.ic}, p.dtype_in, Layout::kRowMajor}, rng));
    } else {
      d.weights.push_back(RandomTensor(TensorType{{s.gemm.k, s.gemm.n}, s.gemm.dtype_in, Layout::kRowMajor}, rng));
    }
    const bool last = i + 1 == shape.size();
    EpilogueSpec spec;
    spec.anchor_dtype = s.gemm.dtype_out;
    if (random_epilogues) {
      spec = RandomEpilogueSpec(rng, s.gemm.dtype_out, last, false);
      spec.with_source = false;
      spec.beta = 0.0f;
    } else {
      spec.ops = {OpKind::kReLU};
      spec.op_dtypes = {s.gemm.dtype_out};
    }
    s.out_dtype = spec.ops.empty() ? spec.anchor_dtype : spec.op_dtypes.back();
    s.reduces = !spec.ops.empty() && spec.ops.back() == OpKind::kReduceColumns;
    d.epilogues.push_back(MaterializeEpilogue(spec, s.gemm.m, s.gemm.n, rng));
  }
  d.shape = std::move(shape);
  return d;
}

Tensor OracleChain(const ChainData& d) {
  Tensor act = d.activation;
  for (size_t i = 0; i < d.shape.size(); ++i) {
    const StageShape& s = d.shape[i];
    if (s.conv) {
      act = OracleConv2d(*s.conv, act, d.weights[i], d.epilogues[i].epi);
    } else {
      act = OracleGemm(s.gemm, act, d.weights[i], d.epilogues[i].epi);
    }
  }
  return act;
}

// ---------------------------------------------------------------------------

std::string GraphBuilder::Input(const std::string& name, Shape shape, DType dt, Layout l) {
  graph_.inputs.push_back(ValueInfo{name, TensorType{std::move(shape), dt, l}, ParamKind::kWeight, ""});
  return name;
}

std::string GraphBuilder::Param(const std::string& name, Shape shape, DType dt, Layout l) {
  graph_.params.push_back(ValueInfo{name, TensorType{std::move(shape), dt, l}, ParamKind::kWeight, ""});
  return name;
}

std::string GraphBuilder::Node(const std::string& id, OpKind kind, std::vector<std::string> inputs, OpAttrs attrs) {
  OpNode n;
  n.id = id;
  n.kind = kind;
  n.attrs = std::move(attrs);
  n.inputs = std::move(inputs);
  graph_.nodes.push_back(std::move(n));
  return id;
}

std::string GraphBuilder::Gemm(const std::string& id, const std::string& a, int64_t k, int64_t n, DType dt) {
  const std::string w = Param(id + "_w", {k, n}, dt);
  return Node(id, OpKind::kGemm, {a, w});
}

std::string GraphBuilder::Conv(const std::string& id, const std::string& x, int64_t ic, int64_t oc, Pair kernel,
                               Pair stride, Pair padding, DType dt) {
  const std::string w = Param(id + "_w", {oc, kernel[0], kernel[1], ic}, dt);
  OpAttrs a;
  a.kernel = kernel;
  a.stride = stride;
  a.padding = padding;
  return Node(id, OpKind::kConv2d, {x, w}, a);
}

std::string GraphBuilder::Bias(const std::string& id, const std::string& x, int64_t n, DType dt) {
  const std::string b = Param(id + "_b", {n}, dt);
  return Node(id, OpKind::kBiasAdd, {x, b});
}

Graph RandomGraph(Rng& rng) {
  GraphBuilder g;
  const bool conv = Uniform(rng, 0, 2) == 0;
  static const std::vector<OpKind> unary = {OpKind::kReLU, OpKind::kGELU, OpKind::kHardswish, OpKind::kSoftplus};
  int id = 0;
  auto name = [&](const char* p) { return std::string(p) + std::to_string(id++); };
  std::vector<std::string> outputs;
  if (conv) {
    const bool nchw = Uniform(rng, 0, 1) == 1;
    const int64_t n = Uniform(rng, 1, 2), h = Uniform(rng, 4, 12), w = Uniform(rng, 4, 12);
    int64_t c = Pick(rng, std::vector<int64_t>{3, 5, 8, 12, 16});
    std::string cur = nchw ? g.Input("x", {n, c, h, w}, DType::kFP16, Layout::kNCHW)
                           : g.Input("x", {n, h, w, c}, DType::kFP16, Layout::kNHWC);
    int64_t hh = h, ww = w;
    const int64_t layers = Uniform(rng, 1, 4);
    for (int64_t l = 0; l < layers; ++l) {
      const bool one = Uniform(rng, 0, 1) == 1;
      const int64_t oc = Pick(rng, std::vector<int64_t>{8, 12, 16, 24, 32});
      const int64_t stride = (!one && hh >= 6 && ww >= 6 && Uniform(rng, 0, 3) == 0) ? 2 : 1;
      const Pair k = one ? Pair{1, 1} : Pair{3, 3};
      const Pair pad = one ? Pair{0, 0} : Pair{1, 1};
      cur = g.Conv(name("conv"), cur, c, oc, k, {stride, stride}, pad);
      hh = (hh + 2 * pad[0] - k[0]) / stride + 1;
      ww = (ww + 2 * pad[1] - k[1]) / stride + 1;
      c = oc;
      if (Uniform(rng, 0, 1)) cur = g.Bias(name("bias"), cur, c);
      if (Uniform(rng, 0, 1)) cur = g.Node(name("act"), Pick(rng, unary), {cur});
      if (Uniform(rng, 0, 5) == 0) outputs.push_back(cur);  // extra consumer breaks fusion
    }
    outputs.push_back(cur);
  } else {
    const int64_t m = Uniform(rng, 1, 80);
    int64_t k = Uniform(rng, 1, 64);
    std::string cur = g.Input("x", {m, k});
    const int64_t layers = Uniform(rng, 1, 4);
    for (int64_t l = 0; l < layers; ++l) {
      const int64_t n = Pick(rng, std::vector<int64_t>{1, 4, 7, 16, 33, 64, 96});
      cur = g.Gemm(name("gemm"), cur, k, n);
      k = n;
      if (Uniform(rng, 0, 1)) cur = g.Bias(name("bias"), cur, n);
      if (Uniform(rng, 0, 1)) cur = g.Node(name("act"), Pick(rng, unary), {cur});
      if (Uniform(rng, 0, 5) == 0) outputs.push_back(cur);
    }
    switch (Uniform(rng, 0, 4)) {
      case 0: cur = g.Node(name("softmax"), OpKind::kSoftmax, {cur}); break;
      case 1: cur = g.Node(name("reduce"), OpKind::kReduceColumns, {cur}); break;
      case 2: {
        OpAttrs a;
        a.to_dtype = DType::kFP32;
        cur = g.Node(name("cvt"), OpKind::kDTypeConvert, {cur}, a);
        break;
      }
      default: break;
    }
    outputs.push_back(cur);
  }
  std::sort(outputs.begin(), outputs.end());
  outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());
  for (const auto& o : outputs) g.Output(o);
  return g.Build();
}

std::vector<LegalityCase> LoadLegalityCases() {
  std::ifstream f(std::string(BOLT_SOURCE_DIR) + "/fixtures/legality/cases.json");
  const nlohmann::json doc = nlohmann::json::parse(f);
  auto pair = [](const nlohmann::json& j) { return Pair{j.at(0).get<int64_t>(), j.at(1).get<int64_t>()}; };
  auto tile = [](const nlohmann::json& j) {
    return TileShape{j.at(0).get<int64_t>(), j.at(1).get<int64_t>(), j.at(2).get<int64_t>()};
  };
  std::vector<LegalityCase> out;
  for (const auto& j : doc.at("cases")) {
    LegalityCase c;
    c.name = j.at("name");
    c.rule = j.at("rule");
    c.arch = j.value("arch", "sm75-t4-like");
    for (const auto& s : j.at("stages")) {
      StageShape st;
      if (s.contains("gemm")) {
        const auto& g = s.at("gemm");
        st = GemmStage(g.at("m"), g.at("n"), g.at("k"));
      } else {
        const auto& v = s.at("conv");
        st = ConvStage(MakeConv(v.at("n"), v.at("h"), v.at("w"), v.at("ic"), v.at("oc"), pair(v.at("kernel")),
                                pair(v.at("stride")), pair(v.at("padding"))));
      }
      st.activation_linked = s.value("linked", true);
      c.chain.push_back(st);
    }
    if (j.contains("configs")) {
      std::vector<KernelConfig> cfgs;
      for (const auto& k : j.at("configs")) {
        KernelConfig cfg;
        cfg.threadblock = tile(k.at("threadblock"));
        cfg.warp = tile(k.at("warp"));
        cfg.instruction = {16, 8, 8};
        cfg.stages = k.at("stages");
        cfgs.push_back(cfg);
      }
      c.configs = cfgs;
    }
    const auto& e = j.at("expect");
    c.legal = e.at("legal");
    if (e.contains("kind")) c.kind = ParseFusionKind(e.at("kind").get<std::string>());
    if (e.contains("reasons")) c.reasons = e.at("reasons").get<std::vector<std::string>>();
    out.push_back(std::move(c));
  }
  return out;
}

ChainLegality EvaluateCase(const LegalityCase& c) {
  if (!c.configs) return CheckChainFeasible(c.chain);
  return CheckChain(c.chain, *c.configs, BundledArch(c.arch));
}

std::string VerdictMismatch(const LegalityCase& c, const ChainLegality& v) {
  std::string got = v.legal ? "legal" : "illegal";
  if (v.legal && c.configs) got += std::string(" ") + std::string(FusionKindName(v.kind));
  for (const auto& r : v.reasons) got += " " + r;
  if (v.legal != c.legal || v.reasons != c.reasons || (c.kind && v.kind != *c.kind)) return c.name + ": got " + got;
  return "";
}

std::string CapacityIssue(const KernelConfig& c, DType dtype, const ArchSpec& arch) {
  const TileShape& tb = c.threadblock;
  const TileShape& w = c.warp;
  if (tb.m % w.m || tb.n % w.n) return "warp tile does not divide " + ToString(c);
  const int64_t bytes = dtype == DType::kFP32 ? 4 : dtype == DType::kINT8 ? 1 : 2;
  const int64_t smem = c.stages * (tb.m * tb.k + tb.k * tb.n) * bytes;
  if (smem > arch.smem_bytes_per_threadblock) return "smem " + std::to_string(smem);
  const int64_t warps = (tb.m / w.m) * (tb.n / w.n);
  if (warps < 1 || warps > 16 || warps * arch.warp_size > arch.max_threads_per_threadblock) {
    return "warps " + std::to_string(warps);
  }
  const int64_t regs = (w.m * w.n + arch.warp_size - 1) / arch.warp_size;
  if (regs > arch.registers_per_thread) return "registers/thread " + std::to_string(regs);
  if (regs * warps * arch.warp_size > arch.registers_per_threadblock) {
    return "registers/block " + std::to_string(regs * warps * arch.warp_size);
  }
  return {};
}

bool Dominates(const ExecCounters& a, const ExecCounters& b) {
  const int64_t av[] = {a.global_bytes_read, a.global_bytes_written, a.kernel_launches, a.smem_bytes_moved,
                        a.smem_bank_conflicts};
  const int64_t bv[] = {b.global_bytes_read, b.global_bytes_written, b.kernel_launches, b.smem_bytes_moved,
                        b.smem_bank_conflicts};
  bool better = false;
  for (int i = 0; i < 5; ++i) {
    if (av[i] > bv[i]) return false;
    better = better || av[i] < bv[i];
  }
  return better;
}

std::string ReadFile(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

CommandResult RunBoltc(const std::string& args) {
  namespace fs = std::filesystem;
  const fs::path err = fs::temp_directory_path() / ("boltc_stderr_" + std::to_string(::getpid()) + ".txt");
  const std::string cmd = std::string(BOLTC_PATH) + " " + args + " 2>" + err.string();
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = ReadFile(err.string());
  fs::remove(err);
  return r;
}

std::string GoldenMismatch(const std::string& rel, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path path = fs::path(BOLT_SOURCE_DIR) / "tests" / "golden" / rel;
  const char* update = std::getenv("BOLT_UPDATE_GOLDEN");
  if (update && std::string(update) == "1") {
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
    return {};
  }
  if (!fs::exists(path)) return "missing snapshot " + rel;
  const std::string want = ReadFile(path.string());
  if (want == text) return {};
  size_t at = 0;
  while (at < want.size() && at < text.size() && want[at] == text[at]) ++at;
  return rel + " differs at byte " + std::to_string(at);
}

}  // namespace bolt::testing
