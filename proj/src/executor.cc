// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/executor.h"

#include <algorithm>
#include <cmath>
#include <optional>

#include "bolt/error.h"

namespace bolt {

ExecCounters& ExecCounters::operator+=(const ExecCounters& o) {
  global_bytes_read += o.global_bytes_read;
  global_bytes_written += o.global_bytes_written;
  smem_bytes_moved += o.smem_bytes_moved;
  smem_bank_conflicts += o.smem_bank_conflicts;
  kernel_launches += o.kernel_launches;
  mac_ops += o.mac_ops;
  pad_fill_bytes += o.pad_fill_bytes;
  return *this;
}

nlohmann::json CountersToJson(const ExecCounters& c) {
  return nlohmann::json{{"global_bytes_read", c.global_bytes_read},
                        {"global_bytes_written", c.global_bytes_written},
                        {"smem_bytes_moved", c.smem_bytes_moved},
                        {"smem_bank_conflicts", c.smem_bank_conflicts},
                        {"kernel_launches", c.kernel_launches},
                        {"mac_ops", c.mac_ops},
                        {"pad_fill_bytes", c.pad_fill_bytes}};
}

float ApplyElementwise(OpKind kind, float x, float operand) {
  switch (kind) {
    case OpKind::kBiasAdd:
      return x + operand;
    case OpKind::kBroadcastColumns:
      return x * operand;
    case OpKind::kReLU:
      return x > 0.0f ? x : 0.0f;
    case OpKind::kGELU:
      return 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752f));
    case OpKind::kHardswish:
      return x * std::min(std::max(x + 3.0f, 0.0f), 6.0f) / 6.0f;
    case OpKind::kSoftplus:
      return x > 20.0f ? x : std::log1p(std::exp(x));
    case OpKind::kDTypeConvert:
      return x;
    default:
      Fail(ErrorCode::kUnsupportedOp, "not an element-wise epilogue op: " + std::string(OpKindName(kind)));
  }
}

namespace {

struct MatrixView {
  const float* data = nullptr;
  int64_t rows = 0, cols = 0;
  bool col_major = false;

  float At(int64_t r, int64_t c) const { return col_major ? data[c * rows + r] : data[r * cols + c]; }
};

MatrixView ViewOf(const Tensor& t) {
  return MatrixView{t.data.data(), t.type.shape[0], t.type.shape[1], t.type.layout == Layout::kColMajor};
}

// Filters [OC, R, S, IC] seen as the K x N operand of the implicit GEMM.
MatrixView FilterView(const Tensor& w) {
  const int64_t oc = w.type.shape[0];
  return MatrixView{w.data.data(), w.type.NumElements() / oc, oc, true};
}

void RequireShape(const Tensor& t, const Shape& shape, const char* what) {
  if (t.type.shape != shape) {
    Fail(ErrorCode::kShapeMismatch, std::string(what) + " has shape " + ToString(t.type));
  }
}

// Value of the epilogue chain for one accumulator, excluding a trailing
// ReduceColumns.
struct EpilogueEval {
  const Epilogue& epi;
  MatrixView c;
  size_t elementwise_ops;

  explicit EpilogueEval(const Epilogue& e)
      : epi(e), c(e.source ? ViewOf(*e.source) : MatrixView{}),
        elementwise_ops(e.Reduces() ? e.ops.size() - 1 : e.ops.size()) {}

  float operator()(float acc, int64_t m, int64_t n) const {
    float v = epi.alpha * acc;
    if (epi.beta != 0.0f && epi.source) v = v + epi.beta * c.At(m, n);
    v = RoundTo(epi.anchor_dtype, v);
    for (size_t i = 0; i < elementwise_ops; ++i) {
      const EpilogueOp& op = epi.ops[i];
      const float operand = op.vector ? op.vector->data[n] : 0.0f;
      v = RoundTo(op.out_dtype, ApplyElementwise(op.kind, v, operand));
    }
    return v;
  }
};

// Global bytes read by the epilogue of one output tile.
int64_t EpilogueSourceBytes(const Epilogue& epi, int64_t mv, int64_t nv) {
  int64_t bytes = 0;
  if (epi.source && epi.beta != 0.0f) bytes += mv * nv * Bytes(epi.source->type.dtype);
  for (const auto& op : epi.ops) {
    if (op.vector) bytes += nv * Bytes(op.vector->type.dtype);
  }
  return bytes;
}

Tensor MakeOutput(const Epilogue& epi, Shape shape, Layout layout) {
  if (epi.Reduces()) shape.back() = 1;
  return Tensor(TensorType{std::move(shape), epi.OutputDType(), layout});
}

// ---------------------------------------------------------------------------
// Operand A sources. Count() returns the number of elements of the
// [m0, m0+mv) x [k0, k0+kv) tile fetched from global memory; Load() fills the
// shared-memory tile (row stride ld), zero where nothing is fetched.

struct GemmA {
  MatrixView v;

  int64_t Count(int64_t, int64_t mv, int64_t, int64_t kv) const { return mv * kv; }
  void Load(int64_t m0, int64_t mv, int64_t k0, int64_t kv, float* dst, int64_t ld) const {
    for (int64_t m = 0; m < mv; ++m) {
      for (int64_t k = 0; k < kv; ++k) dst[m * ld + k] = v.At(m0 + m, k0 + k);
    }
  }
};

// Implicit-GEMM gather from an NHWC (or NCHW) activation. Rows are output
// pixels (n, p, q); columns are (r, s, c). Zero padding is never fetched.
class ConvA {
 public:
  ConvA(const Conv2dProblem& p, const float* x, bool nchw) : p_(p), x_(x), nchw_(nchw) {
    const int64_t P = p.OutH(), Q = p.OutW();
    const int64_t M = p.n * P * Q;
    img_.resize(M);
    ih0_.resize(M);
    iw0_.resize(M);
    for (int64_t m = 0; m < M; ++m) {
      const int64_t q = m % Q, pp = (m / Q) % P;
      img_[m] = m / (P * Q);
      ih0_[m] = pp * p.stride[0] - p.padding[0];
      iw0_[m] = q * p.stride[1] - p.padding[1];
    }
    const int64_t K = p.kernel[0] * p.kernel[1] * p.ic;
    kr_.resize(K);
    ks_.resize(K);
    kc_.resize(K);
    for (int64_t k = 0; k < K; ++k) {
      kc_[k] = k % p.ic;
      ks_[k] = (k / p.ic) % p.kernel[1];
      kr_[k] = k / (p.ic * p.kernel[1]);
    }
  }

  int64_t Count(int64_t m0, int64_t mv, int64_t k0, int64_t kv) const {
    const int64_t ic = p_.ic, S = p_.kernel[1];
    const int64_t k1 = k0 + kv;
    int64_t total = 0;
    for (int64_t m = m0; m < m0 + mv; ++m) {
      for (int64_t t = k0 / ic; t * ic < k1; ++t) {
        const int64_t ih = ih0_[m] + t / S, iw = iw0_[m] + t % S;
        if (ih < 0 || ih >= p_.h || iw < 0 || iw >= p_.w) continue;
        total += std::min(k1, (t + 1) * ic) - std::max(k0, t * ic);
      }
    }
    return total;
  }

  void Load(int64_t m0, int64_t mv, int64_t k0, int64_t kv, float* dst, int64_t ld) const {
    for (int64_t m = 0; m < mv; ++m) {
      const int64_t gm = m0 + m;
      for (int64_t k = 0; k < kv; ++k) {
        const int64_t gk = k0 + k;
        const int64_t ih = ih0_[gm] + kr_[gk], iw = iw0_[gm] + ks_[gk];
        float v = 0.0f;
        if (ih >= 0 && ih < p_.h && iw >= 0 && iw < p_.w) v = x_[Offset(img_[gm], ih, iw, kc_[gk])];
        dst[m * ld + k] = v;
      }
    }
  }

 private:
  int64_t Offset(int64_t n, int64_t h, int64_t w, int64_t c) const {
    if (nchw_) return ((n * p_.ic + c) * p_.h + h) * p_.w + w;
    return ((n * p_.h + h) * p_.w + w) * p_.ic + c;
  }

  Conv2dProblem p_;
  const float* x_;
  bool nchw_;
  std::vector<int64_t> img_, ih0_, iw0_;
  std::vector<int64_t> kr_, ks_, kc_;
};

// Previous chain stage's output rows held on chip for the current
// threadblock (row index relative to the threadblock).
struct ResidentA {
  const float* tile;
  int64_t ld;

  int64_t Count(int64_t, int64_t, int64_t, int64_t) const { return 0; }
  void Load(int64_t, int64_t mv, int64_t k0, int64_t kv, float* dst, int64_t dst_ld) const {
    for (int64_t m = 0; m < mv; ++m) {
      for (int64_t k = 0; k < kv; ++k) dst[m * dst_ld + k] = tile[m * ld + k0 + k];
    }
  }
};

struct TileScratch {
  std::vector<float> acc, sa, sb;

  explicit TileScratch(const KernelConfig& c)
      : acc(static_cast<size_t>(c.threadblock.m * c.threadblock.n)),
        sa(static_cast<size_t>(c.threadblock.m * c.threadblock.k)),
        sb(static_cast<size_t>(c.threadblock.k * c.threadblock.n)) {}
};

// Main loop of one threadblock: k-steps of TB_K staged through shared memory,
// each warp accumulating its W_M x W_N sub-tile. Rows >= mv and columns >= nv
// are predicated off.
template <class ASource>
void MainLoop(const KernelConfig& cfg, const ASource& a, const MatrixView& b, int64_t m0, int64_t mv,
              int64_t n0, int64_t nv, int64_t K, DType in_dtype, bool compute, TileScratch& s,
              ExecCounters& cnt) {
  const int64_t tbm = cfg.threadblock.m, tbn = cfg.threadblock.n, tbk = cfg.threadblock.k;
  const int64_t wm = cfg.warp.m, wn = cfg.warp.n;
  const int64_t bytes = Bytes(in_dtype);
  if (compute) std::fill(s.acc.begin(), s.acc.end(), 0.0f);
  for (int64_t k0 = 0; k0 < K; k0 += tbk) {
    const int64_t kv = std::min(tbk, K - k0);
    const int64_t tile_bytes = (a.Count(m0, mv, k0, kv) + kv * nv) * bytes;
    cnt.global_bytes_read += tile_bytes;
    cnt.smem_bytes_moved += tile_bytes;
    if (!compute) continue;
    a.Load(m0, mv, k0, kv, s.sa.data(), tbk);
    for (int64_t k = 0; k < kv; ++k) {
      for (int64_t n = 0; n < nv; ++n) s.sb[k * tbn + n] = b.At(k0 + k, n0 + n);
    }
    for (int64_t w0m = 0; w0m < std::min(tbm, mv); w0m += wm) {
      const int64_t m_end = std::min(w0m + wm, mv);
      for (int64_t w0n = 0; w0n < std::min(tbn, nv); w0n += wn) {
        const int64_t n_end = std::min(w0n + wn, nv);
        for (int64_t m = w0m; m < m_end; ++m) {
          float* acc_row = &s.acc[m * tbn];
          const float* a_row = &s.sa[m * tbk];
          for (int64_t k = 0; k < kv; ++k) {
            const float av = a_row[k];
            const float* b_row = &s.sb[k * tbn];
            for (int64_t n = w0n; n < n_end; ++n) acc_row[n] += av * b_row[n];
          }
        }
      }
    }
  }
}

// Epilogue of one threadblock tile. Writes either into `out` (row-major with
// `out_ld` columns, global coordinates) or, for a trailing ReduceColumns,
// accumulates row sums across threadblock columns in ascending n order.
void StoreTile(const Epilogue& epi, const EpilogueEval& eval, const TileScratch& s, int64_t tbn, int64_t m0,
               int64_t mv, int64_t n0, int64_t nv, bool compute, float* out, int64_t out_ld,
               ExecCounters& cnt) {
  cnt.global_bytes_read += EpilogueSourceBytes(epi, mv, nv);
  if (epi.Reduces()) {
    if (n0 > 0) cnt.global_bytes_read += mv * Bytes(DType::kFP32);
    cnt.global_bytes_written += mv * Bytes(DType::kFP32);
    if (!compute) return;
    for (int64_t m = 0; m < mv; ++m) {
      float run = n0 > 0 ? out[m0 + m] : 0.0f;
      for (int64_t n = 0; n < nv; ++n) run += eval(s.acc[m * tbn + n], m0 + m, n0 + n);
      out[m0 + m] = run;
    }
    return;
  }
  cnt.global_bytes_written += mv * nv * Bytes(epi.OutputDType());
  if (!compute) return;
  for (int64_t m = 0; m < mv; ++m) {
    for (int64_t n = 0; n < nv; ++n) out[(m0 + m) * out_ld + n0 + n] = eval(s.acc[m * tbn + n], m0 + m, n0 + n);
  }
}

template <class ASource>
void TiledGemm(const GemmProblem& p, const KernelConfig& cfg, const ASource& a, const MatrixView& b,
               const Epilogue& epi, bool compute, Tensor& out, ExecCounters& cnt) {
  TileScratch s(cfg);
  EpilogueEval eval(epi);
  const int64_t tbm = cfg.threadblock.m, tbn = cfg.threadblock.n;
  for (int64_t m0 = 0; m0 < p.m; m0 += tbm) {
    const int64_t mv = std::min(tbm, p.m - m0);
    for (int64_t n0 = 0; n0 < p.n; n0 += tbn) {
      const int64_t nv = std::min(tbn, p.n - n0);
      MainLoop(cfg, a, b, m0, mv, n0, nv, p.k, p.dtype_in, compute, s, cnt);
      StoreTile(epi, eval, s, tbn, m0, mv, n0, nv, compute, out.data.data(), p.n, cnt);
    }
  }
  cnt.kernel_launches += 1;
  cnt.mac_ops += 2 * p.m * p.n * p.k;
}

void CheckEpilogueOperands(const Epilogue& epi, int64_t m, int64_t n) {
  if (epi.source) RequireShape(*epi.source, {m, n}, "epilogue source C");
  for (const auto& op : epi.ops) {
    if ((op.kind == OpKind::kBiasAdd || op.kind == OpKind::kBroadcastColumns) &&
        (!op.vector || op.vector->type.shape != Shape{n})) {
      Fail(ErrorCode::kShapeMismatch, "epilogue vector must have N elements");
    }
  }
}

template <class ASource>
Tensor ReferenceLoop(int64_t M, int64_t N, int64_t K, const ASource& a_at, const MatrixView& b,
                     const Epilogue& epi, Tensor out) {
  EpilogueEval eval(epi);
  for (int64_t m = 0; m < M; ++m) {
    float run = 0.0f;
    for (int64_t n = 0; n < N; ++n) {
      float acc = 0.0f;
      for (int64_t k = 0; k < K; ++k) {
        float av;
        if (a_at(m, k, av)) acc += av * b.At(k, n);
      }
      const float v = eval(acc, m, n);
      if (epi.Reduces()) {
        run += v;
      } else {
        out.data[m * N + n] = v;
      }
    }
    if (epi.Reduces()) out.data[m] = run;
  }
  return out;
}

}  // namespace

Tensor ReferenceGemm(const GemmProblem& p, const Tensor& a, const Tensor& b, const Epilogue& epi) {
  RequireShape(a, {p.m, p.k}, "operand A");
  RequireShape(b, {p.k, p.n}, "operand B");
  CheckEpilogueOperands(epi, p.m, p.n);
  const MatrixView av = ViewOf(a), bv = ViewOf(b);
  auto a_at = [&](int64_t m, int64_t k, float& v) {
    v = av.At(m, k);
    return true;
  };
  return ReferenceLoop(p.m, p.n, p.k, a_at, bv, epi, MakeOutput(epi, {p.m, p.n}, Layout::kRowMajor));
}

Tensor ReferenceConv2d(const Conv2dProblem& p, const Tensor& x, const Tensor& w, const Epilogue& epi,
                       bool input_nchw) {
  RequireShape(x, input_nchw ? Shape{p.n, p.ic, p.h, p.w} : Shape{p.n, p.h, p.w, p.ic}, "conv input");
  RequireShape(w, {p.oc, p.kernel[0], p.kernel[1], p.ic}, "conv filter");
  const int64_t P = p.OutH(), Q = p.OutW();
  const int64_t M = p.n * P * Q;
  CheckEpilogueOperands(epi, M, p.oc);
  const int64_t R = p.kernel[0], S = p.kernel[1], C = p.ic;
  Tensor out = MakeOutput(epi, {p.n, P, Q, p.oc}, Layout::kNHWC);
  EpilogueEval eval(epi);
  for (int64_t img = 0; img < p.n; ++img) {
    for (int64_t op = 0; op < P; ++op) {
      for (int64_t oq = 0; oq < Q; ++oq) {
        const int64_t m = (img * P + op) * Q + oq;
        float run = 0.0f;
        for (int64_t oc = 0; oc < p.oc; ++oc) {
          float acc = 0.0f;
          for (int64_t r = 0; r < R; ++r) {
            const int64_t ih = op * p.stride[0] - p.padding[0] + r;
            if (ih < 0 || ih >= p.h) continue;
            for (int64_t s = 0; s < S; ++s) {
              const int64_t iw = oq * p.stride[1] - p.padding[1] + s;
              if (iw < 0 || iw >= p.w) continue;
              for (int64_t c = 0; c < C; ++c) {
                const float xv = input_nchw ? x.data[((img * C + c) * p.h + ih) * p.w + iw]
                                            : x.data[((img * p.h + ih) * p.w + iw) * C + c];
                acc += xv * w.data[((oc * R + r) * S + s) * C + c];
              }
            }
          }
          const float v = eval(acc, m, oc);
          if (epi.Reduces()) {
            run += v;
          } else {
            out.data[m * p.oc + oc] = v;
          }
        }
        if (epi.Reduces()) out.data[m] = run;
      }
    }
  }
  return out;
}

void CheckTiling(const KernelConfig& c) {
  const TileShape& tb = c.threadblock;
  const TileShape& w = c.warp;
  if (tb.m < 1 || tb.n < 1 || tb.k < 1 || w.m < 1 || w.n < 1 || w.k < 1 || tb.m % w.m || tb.n % w.n ||
      tb.k % w.k || c.stages < 2) {
    Fail(ErrorCode::kConfigInvalid, "invalid tiling: " + ToString(c));
  }
}

KernelResult RunGemm(const GemmProblem& p, const KernelConfig& cfg, const Tensor& a, const Tensor& b,
                     const Epilogue& epi, const ExecOptions& options) {
  CheckTiling(cfg);
  RequireShape(a, {p.m, p.k}, "operand A");
  RequireShape(b, {p.k, p.n}, "operand B");
  CheckEpilogueOperands(epi, p.m, p.n);
  KernelResult r;
  const bool compute = !options.measure_only;
  if (compute) r.output = MakeOutput(epi, {p.m, p.n}, Layout::kRowMajor);
  TiledGemm(p, cfg, GemmA{ViewOf(a)}, ViewOf(b), epi, compute, r.output, r.counters);
  return r;
}

KernelResult RunConv2d(const Conv2dProblem& p, const KernelConfig& cfg, const Tensor& x, const Tensor& w,
                       const Epilogue& epi, bool input_nchw, const ExecOptions& options) {
  CheckTiling(cfg);
  RequireShape(x, input_nchw ? Shape{p.n, p.ic, p.h, p.w} : Shape{p.n, p.h, p.w, p.ic}, "conv input");
  RequireShape(w, {p.oc, p.kernel[0], p.kernel[1], p.ic}, "conv filter");
  const GemmProblem g = Conv2dAsImplicitGemm(p);
  CheckEpilogueOperands(epi, g.m, g.n);
  KernelResult r;
  const bool compute = !options.measure_only;
  if (compute) r.output = MakeOutput(epi, {p.n, p.OutH(), p.OutW(), p.oc}, Layout::kNHWC);
  TiledGemm(g, cfg, ConvA(p, x.data.data(), input_nchw), FilterView(w), epi, compute, r.output, r.counters);
  return r;
}

int64_t StagingBankConflicts(int64_t tb_m, int64_t tb_n, int64_t stride) {
  constexpr int kBanks = 32;
  int64_t conflicts = 0;
  for (int64_t r0 = 0; r0 < tb_m; r0 += 4) {
    for (int64_t c0 = 0; c0 < tb_n; c0 += 8) {
      int per_bank[kBanks] = {};
      for (int64_t r = r0; r < std::min(r0 + 4, tb_m); ++r) {
        for (int64_t c = c0; c < std::min(c0 + 8, tb_n); ++c) ++per_bank[(r * stride + c) % kBanks];
      }
      const int wavefronts = *std::max_element(per_bank, per_bank + kBanks);
      conflicts += wavefronts - 1;
    }
  }
  return 2 * conflicts;  // store, then load with the same pattern
}

namespace {

void CheckChainOperands(const ChainShape& chain, const std::vector<KernelConfig>& configs,
                        const ChainOperands& ops) {
  if (configs.size() != chain.size() || ops.weights.size() != chain.size() ||
      ops.epilogues.size() != chain.size() || !ops.activation) {
    Fail(ErrorCode::kShapeMismatch, "chain operands do not match the chain length");
  }
  for (const auto& c : configs) CheckTiling(c);
}

Shape StageOutputShape(const StageShape& s) {
  if (s.conv) return {s.conv->n, s.conv->OutH(), s.conv->OutW(), s.conv->oc};
  return {s.gemm.m, s.gemm.n};
}

}  // namespace

KernelResult RunChainFused(const ChainShape& chain, const std::vector<KernelConfig>& configs, FusionKind kind,
                           const ChainOperands& ops, const ExecOptions& options) {
  const ChainLegality structure = CheckStructure(chain);
  if (!structure.legal) Fail(ErrorCode::kIllegalFusion, "chain structure: " + structure.reasons.front());
  const ChainLegality residence = CheckThreadblockResidence(chain, configs);
  if (!residence.legal) Fail(ErrorCode::kIllegalFusion, "threadblock residence: " + residence.reasons.front());
  if (kind == FusionKind::kNone) Fail(ErrorCode::kIllegalFusion, "fusion kind none cannot be executed fused");
  if (kind == FusionKind::kRFResident) {
    for (const auto& c : configs) {
      if (c.warp.n != c.threadblock.n) Fail(ErrorCode::kIllegalFusion, "RF-resident fusion needs Warp_N == TB_N");
    }
  }
  CheckChainOperands(chain, configs, ops);

  const bool compute = !options.measure_only;
  const StageShape& first = chain.front();
  const size_t L = chain.size();
  const int64_t M = first.gemm.m;
  const int64_t tbm = configs.front().threadblock.m;

  std::vector<MatrixView> weights;
  for (size_t s = 0; s < L; ++s) {
    if (chain[s].conv) {
      RequireShape(*ops.weights[s], {chain[s].conv->oc, chain[s].conv->kernel[0], chain[s].conv->kernel[1],
                                     chain[s].conv->ic}, "conv filter");
      weights.push_back(FilterView(*ops.weights[s]));
    } else {
      RequireShape(*ops.weights[s], {chain[s].gemm.k, chain[s].gemm.n}, "operand B");
      weights.push_back(ViewOf(*ops.weights[s]));
    }
    CheckEpilogueOperands(ops.epilogues[s], M, chain[s].gemm.n);
  }

  KernelResult r;
  if (compute) r.output = MakeOutput(ops.epilogues.back(), StageOutputShape(chain.back()),
                                     first.conv ? Layout::kNHWC : Layout::kRowMajor);

  std::optional<ConvA> conv_a;
  std::optional<GemmA> gemm_a;
  if (first.conv) {
    const Conv2dProblem& p = *first.conv;
    RequireShape(*ops.activation,
                 ops.activation_nchw ? Shape{p.n, p.ic, p.h, p.w} : Shape{p.n, p.h, p.w, p.ic}, "conv input");
    conv_a.emplace(p, ops.activation->data.data(), ops.activation_nchw);
  } else {
    RequireShape(*ops.activation, {first.gemm.m, first.gemm.k}, "operand A");
    gemm_a.emplace(GemmA{ViewOf(*ops.activation)});
  }

  std::vector<TileScratch> scratch;
  std::vector<EpilogueEval> evals;
  std::vector<int64_t> junction_conflicts(L, 0);
  for (size_t s = 0; s < L; ++s) {
    scratch.emplace_back(configs[s]);
    evals.emplace_back(ops.epilogues[s]);
    if (s + 1 < L && kind == FusionKind::kSmemResident) {
      const int64_t n = chain[s].gemm.n;
      junction_conflicts[s] = StagingBankConflicts(tbm, n, options.padded_staging ? StagingStride(n) : n);
    }
  }
  // On-chip copies of the previous stage's output rows.
  std::vector<float> resident, next;

  ExecCounters& cnt = r.counters;
  for (int64_t m0 = 0; m0 < M; m0 += tbm) {
    const int64_t mv = std::min(tbm, M - m0);
    for (size_t s = 0; s < L; ++s) {
      const GemmProblem& g = chain[s].gemm;
      const KernelConfig& cfg = configs[s];
      if (s == 0) {
        if (conv_a) {
          MainLoop(cfg, *conv_a, weights[0], m0, mv, 0, g.n, g.k, g.dtype_in, compute, scratch[0], cnt);
        } else {
          MainLoop(cfg, *gemm_a, weights[0], m0, mv, 0, g.n, g.k, g.dtype_in, compute, scratch[0], cnt);
        }
      } else {
        MainLoop(cfg, ResidentA{resident.data(), chain[s - 1].gemm.n}, weights[s], m0, mv, 0, g.n, g.k,
                 g.dtype_in, compute, scratch[s], cnt);
      }
      const Epilogue& epi = ops.epilogues[s];
      if (s + 1 == L) {
        StoreTile(epi, evals[s], scratch[s], cfg.threadblock.n, m0, mv, 0, g.n, compute, r.output.data.data(),
                  g.n, cnt);
        continue;
      }
      // Intermediate stage: the epilogue result stays on chip.
      cnt.global_bytes_read += EpilogueSourceBytes(epi, mv, g.n);
      if (kind == FusionKind::kSmemResident) {
        cnt.smem_bytes_moved += 2 * tbm * cfg.threadblock.n * Bytes(DType::kFP32);
        cnt.smem_bank_conflicts += junction_conflicts[s];
      }
      if (!compute) continue;
      next.assign(static_cast<size_t>(mv * g.n), 0.0f);
      for (int64_t m = 0; m < mv; ++m) {
        for (int64_t n = 0; n < g.n; ++n) {
          next[m * g.n + n] = evals[s](scratch[s].acc[m * cfg.threadblock.n + n], m0 + m, n);
        }
      }
      resident.swap(next);
    }
  }
  cnt.kernel_launches += 1;
  for (const auto& s : chain) cnt.mac_ops += 2 * s.gemm.m * s.gemm.n * s.gemm.k;
  return r;
}

KernelResult RunChainUnfused(const ChainShape& chain, const std::vector<KernelConfig>& configs,
                             const ChainOperands& ops, const ExecOptions& options) {
  CheckChainOperands(chain, configs, ops);
  KernelResult r;
  Tensor carried;
  const Tensor* activation = ops.activation;
  bool nchw = ops.activation_nchw;
  for (size_t s = 0; s < chain.size(); ++s) {
    KernelResult stage;
    if (chain[s].conv) {
      stage = RunConv2d(*chain[s].conv, configs[s], *activation, *ops.weights[s], ops.epilogues[s], nchw, options);
    } else {
      stage = RunGemm(chain[s].gemm, configs[s], *activation, *ops.weights[s], ops.epilogues[s], options);
    }
    r.counters += stage.counters;
    if (options.measure_only && s + 1 < chain.size()) {
      // Shape-only stand-in so the next stage can be measured.
      Tensor placeholder;
      placeholder.type = TensorType{StageOutputShape(chain[s]), chain[s].out_dtype,
                                    chain[s].conv ? Layout::kNHWC : Layout::kRowMajor};
      stage.output = std::move(placeholder);
    }
    carried = std::move(stage.output);
    activation = &carried;
    nchw = false;
  }
  r.output = std::move(carried);
  return r;
}

}  // namespace bolt
