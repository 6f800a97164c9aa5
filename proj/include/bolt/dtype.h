// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef BOLT_DTYPE_H_
#define BOLT_DTYPE_H_

#include <cstdint>
#include <string>
#include <string_view>

namespace bolt {

enum class DType { kFP16, kBF16, kFP32, kINT8 };

enum class Layout { kNCHW, kNHWC, kRowMajor, kColMajor };

constexpr int Bits(DType t) {
  switch (t) {
    case DType::kFP16:
    case DType::kBF16:
      return 16;
    case DType::kFP32:
      return 32;
    case DType::kINT8:
      return 8;
  }
  return 0;
}

constexpr int64_t Bytes(DType t) { return Bits(t) / 8; }

std::string_view DTypeName(DType t);
DType ParseDType(std::string_view s);
std::string_view LayoutName(Layout l);
Layout ParseLayout(std::string_view s);

// Value storage is always float; these quantize to the representable set of
// the target type (round-to-nearest-even, INT8 saturating).
float RoundToFP16(float x);
float RoundToBF16(float x);
float RoundTo(DType t, float x);

}  // namespace bolt

#endif  // BOLT_DTYPE_H_
