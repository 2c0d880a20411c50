// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

// The `bsrl` command line: plan | simulate | sweep | dataplane-check.
// Exit codes: 0 success, 1 a check or run failed, 2 usage or validation
// error, 3 I/O error.

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bsrl/config.hpp"
#include "bsrl/error.hpp"
#include "bsrl/io.hpp"

namespace bsrl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;

int exit_code_for(ErrorCode code);

/// Capacity, staleness bounds and, when workers are configured, the greedy
/// provisioning for the target throughput. Requires the planner section.
nlohmann::ordered_json plan_json(const config::RunConfig& cfg);

enum class SweepAxis { kPoolSize, kStaleness, kFleetBroadcast };
SweepAxis sweep_axis_from_string(const std::string& name);

/// Plot-ready CSV (preamble included). Throws Error(kConfig) for an empty
/// value list or values that do not fit the axis.
std::string sweep_csv(const config::RunConfig& cfg, SweepAxis axis,
                      const std::vector<double>& values, const io::CsvOptions& options);

/// Writes trace.csv and report.json into out_dir and returns the report.
sim::RunReport simulate_to_dir(const config::RunConfig& cfg, const std::string& out_dir,
                               const io::CsvOptions& options);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bsrl::cli
