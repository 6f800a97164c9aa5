// Copyright 2026 The Bolt Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef BOLT_ERROR_H_
#define BOLT_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace bolt {

enum class ErrorCode {
  kShapeMismatch,
  kUnsupportedOp,
  kUnsupportedLayout,
  kCycleDetected,
  kUnknownReference,
  kNoValidConfig,
  kNoLegalFusedConfig,
  kConfigInvalid,
  kIllegalFusion,
  kUnsupportedPattern,
  kMissingPlan,
  kParseError,
  kEmptyGraph,
  kVerifyFailed,
  kInternal,
};

/// Stable machine-readable tag, e.g. "SHAPE_MISMATCH".
std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace bolt

#endif  // BOLT_ERROR_H_
