// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace bsrl {

using WorkerId = std::string;

/// Static description of one rollout worker.
struct WorkerSpec {
  WorkerId id;
  double mu = 1.0;             // rollouts/second delivered into the buffer
  double cost_per_hour = 0.0;  // currency per hour while active
  double link_bytes_per_s = 0.0;  // 0 means "use the network default"
  std::string gpu_class;       // optional, for dollar-cost accounting

  /// Cost of one unit of rollout throughput (c_i / mu_i).
  double unit_cost() const { return cost_per_hour / mu; }

  /// Throws Error(kConfig) if mu <= 0, cost < 0, link < 0 or id is empty.
  void validate() const;
};

}  // namespace bsrl
