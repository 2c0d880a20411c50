// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

// Self-check of the dataplane kernels, run by `bsrl dataplane-check`.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bsrl::dataplane {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 1;
  int mask_layouts = 10000;
  int gradient_instances = 100;
  double gradient_rel_tol = 1e-4;
  std::optional<std::string> golden_path;  // dataplane_golden.json
};

std::vector<CheckResult> run_dataplane_check(const CheckOptions& options = {});

}  // namespace bsrl::dataplane
