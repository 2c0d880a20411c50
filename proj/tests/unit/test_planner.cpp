// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "bsrl/error.hpp"
#include "bsrl/planner.hpp"
#include "doctest.h"

using namespace bsrl;
using namespace bsrl::planner;

namespace {

PlannerInputs make(int kappa, double t_train, double t_bcast, std::int64_t r) {
  PlannerInputs in;
  in.kappa = kappa;
  in.staleness_budget = kappa + 1;
  in.t_train = t_train;
  in.t_bcast = t_bcast;
  in.rollouts_per_step = r;
  return in;
}

}  // namespace

TEST_CASE("mu_min follows the capacity rule") {
  auto c = compute_mu_min(make(2, 10, 4, 128));
  CHECK(c.feasible);
  CHECK(c.mu_min == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(c.mu_target == doctest::Approx(1.1 * 16.0).epsilon(1e-12));

  c = compute_mu_min(make(2, 10, 0, 100));
  CHECK(c.mu_min == doctest::Approx(10.0).epsilon(1e-12));

  c = compute_mu_min(make(2, 10, 25, 128));
  CHECK_FALSE(c.feasible);
  // kappa*T_train == T_bcast is still outside the domain.
  CHECK_FALSE(compute_mu_min(make(2, 10, 20, 128)).feasible);
}

TEST_CASE("overlap condition") {
  const auto in = make(2, 10, 4, 128);
  CHECK(overlap_holds(in, 16.0));
  CHECK_FALSE(overlap_holds(in, 15.0));
  CHECK(overlap_holds(make(2, 10, 0, 100), 10.0));
  CHECK_THROWS_AS(overlap_holds(in, 0.0), bsrl::Error);
}

TEST_CASE("choose_kappa") {
  CHECK(choose_kappa(3) == 2);
  CHECK(choose_kappa(4) == 3);
  CHECK_THROWS_AS(choose_kappa(2), bsrl::Error);
}

TEST_CASE("staleness bounds, worked values") {
  CHECK(staleness_bound_baseline(make(2, 10, 8, 128), 16.0) == 3);
  CHECK(staleness_bound_baseline(make(2, 10, 0, 1), 1e9) == 2);
  CHECK(staleness_bound_tightened(make(2, 10, 8, 128)) == 3);
  CHECK(staleness_bound_tightened(make(2, 10, 0, 128)) == 2);
  // Exact boundary: (T_bcast + R/mu)/T_train == 2 must not bump to 3.
  CHECK(staleness_bound_baseline(make(2, 10, 4, 128), 8.0) == 3);
  CHECK(staleness_bound_baseline(make(2, 10, 4, 96), 6.0) == 3);
}

TEST_CASE("input validation") {
  auto in = make(2, 10, 4, 128);
  in.kappa = 1;
  CHECK_THROWS_AS(compute_mu_min(in), bsrl::Error);
  in = make(2, 10, 4, 128);
  in.staleness_budget = 2;
  CHECK_THROWS_AS(compute_mu_min(in), bsrl::Error);
  in = make(2, 0, 4, 128);
  CHECK_THROWS_AS(compute_mu_min(in), bsrl::Error);
  in = make(2, 10, 4, 128);
  in.safety_factor = 1.0;
  CHECK_THROWS_AS(compute_mu_min(in), bsrl::Error);
}

TEST_CASE("property: bounds ordering and the single-parameter corollary") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> kappa_d(2, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int overlap_cases = 0;
  for (int i = 0; i < 10000; ++i) {
    const int kappa = kappa_d(rng);
    const double t_train = 1.0 + 99.0 * u(rng);
    const double t_bcast = t_train * 1.5 * u(rng);
    const auto r = static_cast<std::int64_t>(1 + 511 * u(rng));
    auto in = make(kappa, t_train, t_bcast, r);
    const auto cap = compute_mu_min(in);
    if (!cap.feasible) continue;
    const double mu_pool = cap.mu_min * (1.0 + 3.0 * u(rng));
    REQUIRE(overlap_holds(in, mu_pool));
    ++overlap_cases;
    const int baseline = staleness_bound_baseline(in, mu_pool);
    const int tightened = staleness_bound_tightened(in);
    CHECK(baseline <= tightened);
    CHECK(baseline >= kappa);
    CHECK(tightened >= kappa);
    if (t_bcast < t_train) CHECK(baseline <= in.staleness_budget);
  }
  CHECK(overlap_cases > 5000);
}

TEST_CASE("property: mu_min monotonicity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    auto in = make(2 + static_cast<int>(4 * u(rng)), 5 + 20 * u(rng), 0, 1 + static_cast<int>(200 * u(rng)));
    in.t_bcast = u(rng) * in.kappa * in.t_train * 0.9;
    const double base = compute_mu_min(in).mu_min;

    auto more_r = in;
    more_r.rollouts_per_step += 1 + static_cast<int>(10 * u(rng));
    CHECK(compute_mu_min(more_r).mu_min >= base);

    auto more_bcast = in;
    more_bcast.t_bcast = std::min(in.t_bcast + u(rng), in.kappa * in.t_train * 0.95);
    CHECK(compute_mu_min(more_bcast).mu_min >= base);

    auto longer = in;
    longer.t_train *= 1.0 + u(rng);
    CHECK(compute_mu_min(longer).mu_min <= base);
  }
}

TEST_CASE("property: mu_min sits exactly on the overlap boundary") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    auto in = make(2 + static_cast<int>(5 * u(rng)), 1 + 50 * u(rng), 0, 1 + static_cast<int>(300 * u(rng)));
    in.t_bcast = u(rng) * in.kappa * in.t_train * 0.99;
    const double mu = compute_mu_min(in).mu_min;
    CHECK(overlap_holds(in, mu));
    CHECK_FALSE(overlap_holds(in, mu * (1.0 - 1e-6)));
  }
}
