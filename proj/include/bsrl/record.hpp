// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bsrl {

using Version = std::int64_t;
using TokenId = std::int32_t;

/// Task metadata carried alongside a trajectory. Per-token arrays are either
/// empty or aligned with the response payload: response_mask has one entry
/// per token, the shifted arrays (loss_mask, sampler_token_logprobs) one
/// entry per next-token position.
struct Metadata {
  std::vector<std::uint8_t> loss_mask;
  std::vector<std::uint8_t> response_mask;
  std::string group_tag;
  std::vector<double> sampler_token_logprobs;
  std::optional<double> advantage;

  bool operator==(const Metadata&) const = default;
};

/// Canonical record (x, y, r, v, Omega).
struct TrajectoryRecord {
  std::string prompt_id;
  std::vector<TokenId> response_payload;
  double reward = 0.0;
  Version version = 0;
  Metadata metadata;

  bool operator==(const TrajectoryRecord&) const = default;
};

/// Returns a human-readable reason when the record violates the format rules,
/// std::nullopt when it is well formed.
std::optional<std::string> schema_violation(const TrajectoryRecord& record);

}  // namespace bsrl
