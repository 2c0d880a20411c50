// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/error.hpp"

namespace bsrl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kUnavailable: return "unavailable";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kPricing: return "pricing";
    case ErrorCode::kRegistration: return "registration";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kMask: return "mask";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

void raise(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + " error: " + what);
}

}  // namespace bsrl
