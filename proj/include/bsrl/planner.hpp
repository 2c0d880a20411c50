// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

// Capacity and staleness arithmetic for a learner that publishes a snapshot
// every `kappa` updates while a remote pool generates rollouts.

#pragma once

#include <cstdint>

namespace bsrl::planner {

struct PlannerInputs {
  double t_train = 0.0;           // seconds per learner update
  double t_bcast = 0.0;           // learner-visible dissemination latency
  std::int64_t rollouts_per_step = 1;
  int kappa = 2;                  // publication period, in learner updates
  int staleness_budget = 3;
  double safety_factor = 1.1;

  /// Throws Error(kConfig) naming the first violated invariant.
  void validate() const;
};

struct CapacityResult {
  double mu_min = 0.0;     // rollouts/second; meaningless when !feasible
  double mu_target = 0.0;
  bool feasible = false;
};

struct StalenessBounds {
  int baseline = 0;
  int tightened = 0;
  bool satisfies_budget = false;  // baseline <= staleness_budget
};

/// Relative tolerance used when comparing against exact boundaries and
/// before taking ceilings.
inline constexpr double kBoundaryTolerance = 1e-9;

/// ceil(x), except values within kBoundaryTolerance (relative) of an integer
/// snap to that integer.
std::int64_t stable_ceil(double x);

/// mu_min = kappa*R / (kappa*T_train - T_bcast); infeasible when the
/// denominator is not positive.
CapacityResult compute_mu_min(const PlannerInputs& in);

/// kappa*T_train >= T_bcast + kappa*R/mu_pool, with equality accepted up to
/// kBoundaryTolerance.
bool overlap_holds(const PlannerInputs& in, double mu_pool);

/// Default publication period for a staleness budget: S - 1. Budgets below 3
/// would force kappa < 2 and are rejected.
int choose_kappa(int staleness_budget);

/// Worst-case bound when no rollout uses a new snapshot until dissemination
/// completes: kappa + ceil((T_bcast + R/mu_pool) / T_train) - 1.
int staleness_bound_baseline(const PlannerInputs& in, double mu_pool);

/// Bound after substituting the overlap condition:
/// kappa + ceil((1 - 1/kappa) * T_bcast / T_train).
int staleness_bound_tightened(const PlannerInputs& in);

StalenessBounds staleness_bounds(const PlannerInputs& in, double mu_pool);

}  // namespace bsrl::planner
