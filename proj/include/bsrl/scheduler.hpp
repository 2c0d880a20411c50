// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

// Cost-aware provisioning and the low-frequency capacity controller.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bsrl/planner.hpp"
#include "bsrl/record.hpp"
#include "bsrl/worker.hpp"

namespace bsrl::scheduler {

struct WorkerState {
  WorkerSpec spec;
  bool active = false;     // member of the active set A
  bool available = true;   // a_i(t)
  double mu_estimate = 0;  // mu_i(t)
  double last_heartbeat_s = 0.0;
  Version installed_version = 0;

  static WorkerState from_spec(const WorkerSpec& spec, bool active = true);
};

/// Sum of mu_estimate over active, available workers.
double effective_pool(std::span<const WorkerState> states);

struct ProvisionResult {
  std::vector<WorkerId> active;  // in activation order
  double total_mu = 0.0;
  double total_cost_per_hour = 0.0;
  bool feasible = true;
  double shortfall = 0.0;  // mu_required - total fleet capacity when infeasible
};

/// Activates workers in ascending c/mu order (ties: lower cost, then id)
/// until their throughput covers `mu_required`.
ProvisionResult greedy_provision(std::span<const WorkerSpec> candidates, double mu_required);

struct ControlPolicy {
  int window_ticks = 3;       // consecutive ticks of deviation before acting
  double release_ratio = 1.5; // release only when pool > ratio * target
};

enum class ActionKind { kActivate, kRelease };

struct ControlAction {
  ActionKind kind;
  WorkerId worker;
};

struct ControlDecision {
  double pool = 0.0;
  double target = 0.0;
  bool feasible = true;
  std::vector<ControlAction> actions;
};

/// Tracks sustained deviation of the effective pool from mu_target and
/// adjusts the active set. One call per control tick.
class CapacityController {
 public:
  explicit CapacityController(ControlPolicy policy = {});

  /// Applies any activation/release to `states` and returns what was done.
  ControlDecision control_step(std::vector<WorkerState>& states,
                               const planner::PlannerInputs& planner, double now);

  const ControlPolicy& policy() const { return policy_; }

 private:
  ControlPolicy policy_;
  int below_ticks_ = 0;
  int above_ticks_ = 0;
};

struct RegistryOptions {
  double heartbeat_interval_s = 10.0;
  double timeout_multiple = 3.0;  // timeout = multiple * interval
  double ewma_alpha = 0.3;
};

/// Live worker table fed by heartbeats and throughput reports. Applied
/// serially by the owning control loop.
class WorkerRegistry {
 public:
  explicit WorkerRegistry(std::span<const WorkerSpec> fleet, RegistryOptions options = {});

  /// Throws Error(kRegistration) for unknown ids.
  void heartbeat(const WorkerId& id, double now);
  void mark_availability(double now);
  /// Folds a measured delivery rate into the EWMA estimate.
  void observe_throughput(const WorkerId& id, double rollouts_per_s);

  double timeout_s() const { return options_.heartbeat_interval_s * options_.timeout_multiple; }
  std::vector<WorkerState>& states() { return states_; }
  const std::vector<WorkerState>& states() const { return states_; }
  const WorkerState& at(const WorkerId& id) const;

 private:
  WorkerState& find(const WorkerId& id);

  RegistryOptions options_;
  std::vector<WorkerState> states_;
};

struct PriceTable {
  std::map<std::string, double> price_per_gpu_hour;

  /// Hourly single-GPU rental prices: A100 80GB $3.06, RTX 5090 $0.35.
  static PriceTable defaults();
};

struct GpuUsage {
  std::string gpu_class;
  double gpu_hours = 0.0;
};

/// sum_g price_g * hours_g. Throws Error(kPricing) for an unknown class and
/// Error(kConfig) for negative hours.
double dollar_cost(std::span<const GpuUsage> usage, const PriceTable& prices);

std::string_view control_csv_header();
/// One CSV row: tick,pool,target,action,cost_rate.
std::string control_csv_row(std::int64_t tick, const ControlDecision& decision, double cost_rate);

}  // namespace bsrl::scheduler
