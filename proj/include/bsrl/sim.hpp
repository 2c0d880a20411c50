// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

// Deterministic discrete-event simulator of the asynchronous training loop:
// a learner that steps whenever a full admissible batch exists, periodic
// snapshot publication, dissemination through a broadcast plan, and rollout
// workers modelled as rate processes feeding the replay buffer.
//
// Worker semantics during dissemination: at each publication a worker
// suspends generation (its in-flight rollout keeps its old version tag and
// remaining work) and resumes once it has installed the new snapshot. This
// makes the generation window per period kappa*T_train - T_bcast, the same
// window the capacity planner budgets for. `generate_during_dissemination`
// turns the pause off.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bsrl/broadcast.hpp"
#include "bsrl/buffer.hpp"
#include "bsrl/planner.hpp"
#include "bsrl/scheduler.hpp"
#include "bsrl/worker.hpp"

namespace bsrl::sim {

struct SimConfig {
  planner::PlannerInputs planner;
  std::vector<WorkerSpec> workers;
  broadcast::NetworkConfig net;
  broadcast::Strategy strategy = broadcast::Strategy::kStarUnlimited;
  std::int64_t snapshot_bytes = 0;  // 0 disseminates instantly
  std::int64_t total_steps = 50;
  std::uint64_t rng_seed = 1;
  double rollout_jitter = 0.0;  // coefficient of variation of rollout time
  buffer::SampleOrder sample_order = buffer::SampleOrder::kOldestFirst;
  bool worst_case = false;
  bool generate_during_dissemination = false;
  std::optional<double> install_fraction;  // q; defaults to 1/safety_factor
  // Steps excluded from the bubble ratio; defaults to one publication period.
  std::optional<std::int64_t> warmup_steps;
  bool autoscale = false;
  scheduler::ControlPolicy control;
  bool chunk_events = false;  // log chunk_forward via the event-driven relay
  double learner_cost_per_hour = 0.0;
  double max_time_s = 0.0;  // 0 means no horizon

  double q() const { return install_fraction.value_or(1.0 / planner.safety_factor); }
  std::int64_t warmup() const { return warmup_steps.value_or(planner.kappa); }
  double pool_mu() const;
  /// Throws Error(kConfig).
  void validate() const;
};

enum class EventKind {
  kStepStart,
  kStepEnd,
  kPublish,
  kChunkForward,
  kInstall,
  kRolloutDelivered,
  kBatchSampled,
  kIdleStart,
  kIdleEnd,
  kActivate,
  kRelease,
  kEvict,
  kRunEnd,
};

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

/// One trace row. Fields not meaningful for a kind stay at their defaults.
///   step_start/step_end/idle_*: step
///   publish/install: version (install: worker)
///   rollout_delivered: worker, version = tag, count = 1 if admitted else 0
///   batch_sampled: step, count, min_version, max_version
///   chunk_forward: worker = receiver, version, count = bytes
///   evict: version = learner version, count
///   activate/release: worker
struct TraceEvent {
  double time_s = 0.0;
  EventKind kind = EventKind::kRunEnd;
  std::int64_t step = -1;
  Version version = -1;
  WorkerId worker;
  std::int64_t count = 0;
  Version min_version = -1;
  Version max_version = -1;

  bool operator==(const TraceEvent&) const = default;
};

struct SimTrace {
  std::vector<TraceEvent> events;
};

struct RunReport {
  double bubble_ratio = 1.0;
  std::vector<std::int64_t> staleness_series;  // per step: t - min version
  std::int64_t delta_max = 0;
  double t_bcast_observed = 0.0;  // mean over publications
  std::vector<double> t_bcast_per_publication;
  double total_cost = 0.0;
  std::int64_t rollouts_generated = 0;
  std::int64_t rollouts_consumed = 0;
  std::int64_t rollouts_evicted = 0;
  std::int64_t rollouts_rejected = 0;
  std::int64_t steps_completed = 0;
  double idle_time_s = 0.0;
  double train_time_s = 0.0;
  double sim_time_s = 0.0;

  bool operator==(const RunReport&) const = default;
};

struct ReportContext {
  double q = 1.0;
  std::int64_t warmup_steps = 0;  // 0 measures the bubble over the whole run
  std::map<WorkerId, double> worker_cost_per_hour;
  double learner_cost_per_hour = 0.0;

  static ReportContext from_config(const SimConfig& config);
};

struct RunResult {
  SimTrace trace;
  RunReport report;
};

RunResult run(const SimConfig& config);

/// Forces the conservative execution model: every worker installs a new
/// snapshot only when the whole fleet has it, and batches take the newest
/// admissible records.
RunReport worst_case_mode(SimConfig config);

struct SweepRow {
  std::int64_t size = 0;
  double pool_mu = 0.0;
  double bubble_ratio = 0.0;
  std::int64_t delta_max = 0;
};

/// Runs one simulation per fleet size. The fleet of size n is n copies of
/// `base.workers.front()` with ids w0..w{n-1}.
std::vector<SweepRow> sweep_pool_size(const SimConfig& base, const std::vector<std::int64_t>& sizes);

/// Deterministic aggregation. Throws Error(kIntegrity) on a malformed trace.
RunReport compute_report(const SimTrace& trace, const ReportContext& ctx);

}  // namespace bsrl::sim
