// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/planner.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bsrl/error.hpp"

namespace bsrl::planner {

void PlannerInputs::validate() const {
  if (!(t_train > 0.0) || !std::isfinite(t_train)) {
    raise(ErrorCode::kConfig, "t_train must be a positive number of seconds");
  }
  if (!(t_bcast >= 0.0) || !std::isfinite(t_bcast)) {
    raise(ErrorCode::kConfig, "t_bcast must be >= 0");
  }
  if (rollouts_per_step < 1) {
    raise(ErrorCode::kConfig, "rollouts_per_step must be >= 1");
  }
  if (kappa < 2) {
    raise(ErrorCode::kConfig, "kappa must be >= 2, got " + std::to_string(kappa));
  }
  if (staleness_budget < 3) {
    raise(ErrorCode::kConfig, "staleness_budget must be >= 3, got " +
                                  std::to_string(staleness_budget));
  }
  if (!(safety_factor > 1.0)) {
    raise(ErrorCode::kConfig, "safety_factor must be > 1");
  }
}

std::int64_t stable_ceil(double x) {
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= kBoundaryTolerance * std::max(1.0, std::abs(x))) {
    return static_cast<std::int64_t>(nearest);
  }
  return static_cast<std::int64_t>(std::ceil(x));
}

CapacityResult compute_mu_min(const PlannerInputs& in) {
  in.validate();
  CapacityResult out;
  const double window = in.kappa * in.t_train - in.t_bcast;
  if (!(window > 0.0)) return out;
  out.feasible = true;
  out.mu_min = static_cast<double>(in.kappa) *
               static_cast<double>(in.rollouts_per_step) / window;
  out.mu_target = in.safety_factor * out.mu_min;
  return out;
}

bool overlap_holds(const PlannerInputs& in, double mu_pool) {
  in.validate();
  if (!(mu_pool > 0.0)) raise(ErrorCode::kConfig, "mu_pool must be > 0");
  const double lhs = in.kappa * in.t_train;
  const double rhs = in.t_bcast + in.kappa * static_cast<double>(in.rollouts_per_step) / mu_pool;
  return lhs >= rhs - kBoundaryTolerance * std::max(std::abs(lhs), std::abs(rhs));
}

int choose_kappa(int staleness_budget) {
  if (staleness_budget < 3) {
    raise(ErrorCode::kConfig, "staleness budget " + std::to_string(staleness_budget) +
                                  " leaves kappa = S-1 below 2");
  }
  return staleness_budget - 1;
}

int staleness_bound_baseline(const PlannerInputs& in, double mu_pool) {
  in.validate();
  if (!(mu_pool > 0.0)) raise(ErrorCode::kConfig, "mu_pool must be > 0");
  const double steps =
      (in.t_bcast + static_cast<double>(in.rollouts_per_step) / mu_pool) / in.t_train;
  // A vanishing numerator still needs one step to collect the batch.
  const std::int64_t wait = std::max<std::int64_t>(1, stable_ceil(steps));
  return static_cast<int>(in.kappa + wait - 1);
}

int staleness_bound_tightened(const PlannerInputs& in) {
  in.validate();
  const double frac = (1.0 - 1.0 / in.kappa) * in.t_bcast / in.t_train;
  return static_cast<int>(in.kappa + stable_ceil(frac));
}

StalenessBounds staleness_bounds(const PlannerInputs& in, double mu_pool) {
  StalenessBounds b;
  b.baseline = staleness_bound_baseline(in, mu_pool);
  b.tightened = staleness_bound_tightened(in);
  b.satisfies_budget = b.baseline <= in.staleness_budget;
  return b;
}

}  // namespace bsrl::planner
