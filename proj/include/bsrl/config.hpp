// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

// Run configuration loaded from YAML. Keys carry their unit in the name
// (`_seconds`, `_mbps`, `_gb`, `_per_hour`) and unknown keys are rejected.
//
//   planner:        t_train_seconds, t_bcast_seconds, rollouts_per_step,
//                   staleness_budget (3), kappa (S-1), safety_factor (1.1)
//   workers:        list of {id, rollouts_per_second, cost_per_hour |
//                   gpu_class, link_mbps, count}
//   network:        learner_uplink_mbps ("unlimited"), worker_link_mbps,
//                   chunk_mb (4 MiB), latency_per_hop_seconds (0)
//   broadcast:      strategy (star_unlimited), snapshot_gb | snapshot_mb (0)
//   sim:            total_steps (50), seed (1), rollout_jitter_cv (0),
//                   sample_order (oldest_first), worst_case,
//                   generate_during_dissemination, install_fraction (1/gamma),
//                   warmup_steps (kappa), autoscale, chunk_events,
//                   learner_cost_per_hour | learner_gpu_class,
//                   max_time_seconds, control {window_ticks, release_ratio}
//   prices_per_hour: map gpu_class -> dollars (A100 3.06, RTX5090 0.35)
//   dataplane:      clip_eps, kl_coeff, trunc_c, norm_eps, grouping

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bsrl/dataplane.hpp"
#include "bsrl/scheduler.hpp"
#include "bsrl/sim.hpp"

namespace bsrl::config {

struct RunConfig {
  std::optional<planner::PlannerInputs> planner;
  sim::SimConfig sim;  // planner left default; see to_sim_config
  scheduler::PriceTable prices;
  dataplane::GrpoConfig dataplane;
  std::string source;

  /// Throws Error(kConfig) when the planner section is missing.
  const planner::PlannerInputs& require_planner() const;
  sim::SimConfig to_sim_config() const;
};

/// Throws Error(kConfig) with "<source>:<line>:<col>: ..." context.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");

/// Throws Error(kIo) if the file cannot be read.
RunConfig load_config(const std::string& path);

inline constexpr double kMbps = 1e6 / 8.0;  // bytes per second
inline constexpr double kMB = 1e6;
inline constexpr double kGB = 1e9;

}  // namespace bsrl::config
