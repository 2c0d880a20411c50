// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "bsrl/error.hpp"

namespace bsrl::scheduler {
namespace {

bool cheaper(const WorkerSpec& a, const WorkerSpec& b) {
  const double ra = a.unit_cost(), rb = b.unit_cost();
  if (ra != rb) return ra < rb;
  if (a.cost_per_hour != b.cost_per_hour) return a.cost_per_hour < b.cost_per_hour;
  return a.id < b.id;
}

bool counts(const WorkerState& s) { return s.active && s.available; }

}  // namespace

WorkerState WorkerState::from_spec(const WorkerSpec& spec, bool active) {
  WorkerState s;
  s.spec = spec;
  s.active = active;
  s.mu_estimate = spec.mu;
  return s;
}

double effective_pool(std::span<const WorkerState> states) {
  double pool = 0.0;
  for (const auto& s : states) {
    if (counts(s)) pool += s.mu_estimate;
  }
  return pool;
}

ProvisionResult greedy_provision(std::span<const WorkerSpec> candidates, double mu_required) {
  if (!(mu_required >= 0.0)) raise(ErrorCode::kConfig, "mu_required must be >= 0");
  std::vector<WorkerSpec> order(candidates.begin(), candidates.end());
  for (const auto& w : order) w.validate();
  std::sort(order.begin(), order.end(), cheaper);

  ProvisionResult out;
  for (const auto& w : order) {
    if (out.total_mu >= mu_required) break;
    out.active.push_back(w.id);
    out.total_mu += w.mu;
    out.total_cost_per_hour += w.cost_per_hour;
  }
  if (out.total_mu < mu_required) {
    out.feasible = false;
    out.shortfall = mu_required - out.total_mu;
  }
  return out;
}

CapacityController::CapacityController(ControlPolicy policy) : policy_(policy) {
  if (policy_.window_ticks < 1) raise(ErrorCode::kConfig, "window_ticks must be >= 1");
  if (!(policy_.release_ratio > 1.0)) raise(ErrorCode::kConfig, "release_ratio must be > 1");
}

ControlDecision CapacityController::control_step(std::vector<WorkerState>& states,
                                                 const planner::PlannerInputs& planner,
                                                 double /*now*/) {
  ControlDecision d;
  const auto capacity = planner::compute_mu_min(planner);
  d.pool = effective_pool(states);
  d.feasible = capacity.feasible;
  if (!capacity.feasible) {
    below_ticks_ = above_ticks_ = 0;
    return d;
  }
  d.target = capacity.mu_target;

  below_ticks_ = d.pool < d.target ? below_ticks_ + 1 : 0;
  above_ticks_ = d.pool > policy_.release_ratio * d.target ? above_ticks_ + 1 : 0;

  if (below_ticks_ >= policy_.window_ticks) {
    std::vector<WorkerState*> idle;
    for (auto& s : states) {
      if (!s.active && s.available) idle.push_back(&s);
    }
    std::sort(idle.begin(), idle.end(),
              [](const WorkerState* a, const WorkerState* b) { return cheaper(a->spec, b->spec); });
    double pool = d.pool;
    for (auto* s : idle) {
      if (pool >= d.target) break;
      s->active = true;
      pool += s->mu_estimate;
      d.actions.push_back({ActionKind::kActivate, s->spec.id});
    }
    below_ticks_ = 0;
  } else if (above_ticks_ >= policy_.window_ticks) {
    std::vector<WorkerState*> busy;
    for (auto& s : states) {
      if (s.active) busy.push_back(&s);
    }
    std::sort(busy.begin(), busy.end(),
              [](const WorkerState* a, const WorkerState* b) { return cheaper(b->spec, a->spec); });
    double pool = d.pool;
    for (auto* s : busy) {
      const double contribution = s->available ? s->mu_estimate : 0.0;
      if (pool - contribution < d.target) continue;
      s->active = false;
      pool -= contribution;
      d.actions.push_back({ActionKind::kRelease, s->spec.id});
    }
    above_ticks_ = 0;
  }
  return d;
}

WorkerRegistry::WorkerRegistry(std::span<const WorkerSpec> fleet, RegistryOptions options)
    : options_(options) {
  if (!(options_.heartbeat_interval_s > 0.0)) raise(ErrorCode::kConfig, "heartbeat interval must be > 0");
  if (!(options_.ewma_alpha > 0.0 && options_.ewma_alpha <= 1.0)) {
    raise(ErrorCode::kConfig, "ewma_alpha must be in (0, 1]");
  }
  for (const auto& spec : fleet) {
    spec.validate();
    states_.push_back(WorkerState::from_spec(spec));
  }
}

WorkerState& WorkerRegistry::find(const WorkerId& id) {
  for (auto& s : states_) {
    if (s.spec.id == id) return s;
  }
  raise(ErrorCode::kRegistration, "unknown worker '" + id + "'");
}

const WorkerState& WorkerRegistry::at(const WorkerId& id) const {
  return const_cast<WorkerRegistry*>(this)->find(id);
}

void WorkerRegistry::heartbeat(const WorkerId& id, double now) {
  auto& s = find(id);
  s.last_heartbeat_s = now;
  s.available = true;
}

void WorkerRegistry::mark_availability(double now) {
  for (auto& s : states_) s.available = now - s.last_heartbeat_s <= timeout_s();
}

void WorkerRegistry::observe_throughput(const WorkerId& id, double rollouts_per_s) {
  if (!(rollouts_per_s >= 0.0)) raise(ErrorCode::kConfig, "throughput must be >= 0");
  auto& s = find(id);
  s.mu_estimate = options_.ewma_alpha * rollouts_per_s + (1.0 - options_.ewma_alpha) * s.mu_estimate;
}

PriceTable PriceTable::defaults() {
  return PriceTable{{{"A100", 3.06}, {"RTX5090", 0.35}}};
}

double dollar_cost(std::span<const GpuUsage> usage, const PriceTable& prices) {
  double total = 0.0;
  for (const auto& u : usage) {
    if (!(u.gpu_hours >= 0.0)) raise(ErrorCode::kConfig, "gpu_hours must be >= 0");
    auto it = prices.price_per_gpu_hour.find(u.gpu_class);
    if (it == prices.price_per_gpu_hour.end()) {
      raise(ErrorCode::kPricing, "no price for gpu class '" + u.gpu_class + "'");
    }
    total += it->second * u.gpu_hours;
  }
  return total;
}

std::string_view control_csv_header() { return "tick,pool,target,action,cost_rate"; }

std::string control_csv_row(std::int64_t tick, const ControlDecision& decision, double cost_rate) {
  std::string action = "none";
  if (!decision.actions.empty()) {
    action.clear();
    for (const auto& a : decision.actions) {
      if (!action.empty()) action += ';';
      action += (a.kind == ActionKind::kActivate ? "activate:" : "release:") + a.worker;
    }
  }
  return fmt::format("{},{},{},{},{}", tick, decision.pool, decision.target, action, cost_rate);
}

}  // namespace bsrl::scheduler
