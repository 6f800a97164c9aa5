// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#include "bolt/dtype.h"

#include <bit>
#include <cmath>

#include "bolt/error.h"

namespace bolt {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kUnsupportedOp: return "UNSUPPORTED_OP";
    case ErrorCode::kUnsupportedLayout: return "UNSUPPORTED_LAYOUT";
    case ErrorCode::kCycleDetected: return "CYCLE_DETECTED";
    case ErrorCode::kUnknownReference: return "UNKNOWN_REFERENCE";
    case ErrorCode::kNoValidConfig: return "NO_VALID_CONFIG";
    case ErrorCode::kNoLegalFusedConfig: return "NO_LEGAL_FUSED_CONFIG";
    case ErrorCode::kConfigInvalid: return "CONFIG_INVALID";
    case ErrorCode::kIllegalFusion: return "ILLEGAL_FUSION";
    case ErrorCode::kUnsupportedPattern: return "UNSUPPORTED_PATTERN";
    case ErrorCode::kMissingPlan: return "MISSING_PLAN";
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kEmptyGraph: return "EMPTY_GRAPH";
    case ErrorCode::kVerifyFailed: return "VERIFY_FAILED";
    case ErrorCode::kInternal: return "INTERNAL";
  }
  return "INTERNAL";
}

std::string_view DTypeName(DType t) {
  switch (t) {
    case DType::kFP16: return "float16";
    case DType::kBF16: return "bfloat16";
    case DType::kFP32: return "float32";
    case DType::kINT8: return "int8";
  }
  return "?";
}

DType ParseDType(std::string_view s) {
  if (s == "float16" || s == "fp16") return DType::kFP16;
  if (s == "bfloat16" || s == "bf16") return DType::kBF16;
  if (s == "float32" || s == "fp32") return DType::kFP32;
  if (s == "int8") return DType::kINT8;
  Fail(ErrorCode::kParseError, "unknown dtype '" + std::string(s) + "'");
}

std::string_view LayoutName(Layout l) {
  switch (l) {
    case Layout::kNCHW: return "NCHW";
    case Layout::kNHWC: return "NHWC";
    case Layout::kRowMajor: return "RowMajor";
    case Layout::kColMajor: return "ColMajor";
  }
  return "?";
}

Layout ParseLayout(std::string_view s) {
  if (s == "NCHW") return Layout::kNCHW;
  if (s == "NHWC") return Layout::kNHWC;
  if (s == "RowMajor") return Layout::kRowMajor;
  if (s == "ColMajor") return Layout::kColMajor;
  Fail(ErrorCode::kParseError, "unknown layout '" + std::string(s) + "'");
}

namespace {

uint16_t FloatToHalfBits(float f) {
  const uint32_t x = std::bit_cast<uint32_t>(f);
  const uint32_t sign = (x >> 16) & 0x8000u;
  const uint32_t exp = (x >> 23) & 0xffu;
  uint32_t mant = x & 0x7fffffu;

  if (exp == 0xffu) {
    return static_cast<uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));
  }
  const int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 0x1f) return static_cast<uint16_t>(sign | 0x7c00u);
  if (e <= 0) {
    // Subnormal half (or zero). Shift in the implicit bit, round to nearest even.
    if (e < -10) return static_cast<uint16_t>(sign);
    mant |= 0x800000u;
    const int shift = 14 - e;
    uint32_t half_mant = mant >> shift;
    const uint32_t rem = mant & ((1u << shift) - 1u);
    const uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (half_mant & 1u))) ++half_mant;
    return static_cast<uint16_t>(sign | half_mant);
  }
  uint32_t h = sign | (static_cast<uint32_t>(e) << 10) | (mant >> 13);
  const uint32_t rem = mant & 0x1fffu;
  if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;  // may carry into exp
  return static_cast<uint16_t>(h);
}

float HalfBitsToFloat(uint16_t h) {
  const uint32_t sign = (static_cast<uint32_t>(h) & 0x8000u) << 16;
  const uint32_t exp = (h >> 10) & 0x1fu;
  uint32_t mant = h & 0x3ffu;
  uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      int e = -1;
      do {
        ++e;
        mant <<= 1;
      } while ((mant & 0x400u) == 0);
      bits = sign | (static_cast<uint32_t>(127 - 15 - e) << 23) |
             ((mant & 0x3ffu) << 13);
    }
  } else if (exp == 0x1f) {
    bits = sign | 0x7f800000u | (mant << 13);
  } else {
    bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

float RoundToFP16(float x) { return HalfBitsToFloat(FloatToHalfBits(x)); }

float RoundToBF16(float x) {
  uint32_t bits = std::bit_cast<uint32_t>(x);
  if ((bits & 0x7f800000u) == 0x7f800000u) return x;
  bits += 0x7fffu + ((bits >> 16) & 1u);
  bits &= 0xffff0000u;
  return std::bit_cast<float>(bits);
}

float RoundTo(DType t, float x) {
  switch (t) {
    case DType::kFP16: return RoundToFP16(x);
    case DType::kBF16: return RoundToBF16(x);
    case DType::kFP32: return x;
    case DType::kINT8: {
      float r = std::nearbyint(x);
      if (r > 127.f) r = 127.f;
      if (r < -128.f) r = -128.f;
      return r;
    }
  }
  return x;
}

}  // namespace bolt
