// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/record.hpp"

#include <cmath>

namespace bsrl {

std::optional<std::string> schema_violation(const TrajectoryRecord& record) {
  if (record.version < 0) return "negative version";
  if (!std::isfinite(record.reward)) return "non-finite reward";
  const auto& meta = record.metadata;
  const std::size_t tokens = record.response_payload.size();
  const std::size_t shifted = tokens == 0 ? 0 : tokens - 1;
  if (!meta.response_mask.empty() && meta.response_mask.size() != tokens) {
    return "response_mask length does not match payload";
  }
  if (!meta.loss_mask.empty() && meta.loss_mask.size() != shifted) {
    return "loss_mask length does not match shifted payload";
  }
  if (!meta.sampler_token_logprobs.empty() && meta.sampler_token_logprobs.size() != shifted) {
    return "sampler_token_logprobs length does not match shifted payload";
  }
  for (auto m : meta.response_mask) {
    if (m > 1) return "response_mask entries must be 0/1";
  }
  for (auto m : meta.loss_mask) {
    if (m > 1) return "loss_mask entries must be 0/1";
  }
  for (double lp : meta.sampler_token_logprobs) {
    if (std::isnan(lp) || lp > 0.0) return "sampler logprob must be <= 0";
  }
  if (meta.advantage && !std::isfinite(*meta.advantage)) return "non-finite advantage";
  return std::nullopt;
}

}  // namespace bsrl
