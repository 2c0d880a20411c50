// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/worker.hpp"

#include <cmath>

#include "bsrl/error.hpp"

namespace bsrl {

void WorkerSpec::validate() const {
  if (id.empty()) raise(ErrorCode::kConfig, "worker id must not be empty");
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    raise(ErrorCode::kConfig, "worker " + id + ": mu must be > 0");
  }
  if (!(cost_per_hour >= 0.0) || !std::isfinite(cost_per_hour)) {
    raise(ErrorCode::kConfig, "worker " + id + ": cost_per_hour must be >= 0");
  }
  if (!(link_bytes_per_s >= 0.0)) {
    raise(ErrorCode::kConfig, "worker " + id + ": link rate must be >= 0");
  }
}

}  // namespace bsrl
