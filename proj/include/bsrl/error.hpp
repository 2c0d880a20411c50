// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsrl {

enum class ErrorCode {
  kConfig,        // invalid parameters or configuration
  kSchema,        // malformed record, log or message sequence
  kUnavailable,   // not enough admissible data
  kProtocol,      // broadcast relay received a chunk it does not own
  kPricing,       // unknown gpu class
  kRegistration,  // unknown worker id
  kNumeric,       // NaN or non-finite input to a kernel
  kDegenerate,    // e.g. empty response mask
  kMask,          // no turn-start tokens
  kIntegrity,     // malformed simulation trace
  kIo,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& what);

}  // namespace bsrl
