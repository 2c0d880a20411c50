// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

// Result serialization. CSV files open with a schema line and an optional
// timestamp line; everything after them is byte-identical across runs with
// the same inputs. New columns are only ever appended.

#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "bsrl/broadcast.hpp"
#include "bsrl/planner.hpp"
#include "bsrl/sim.hpp"

namespace bsrl::io {

inline constexpr int kSchemaVersion = 1;

struct CsvOptions {
  bool timestamp = true;
};

/// "# bsrl <kind> schema=1" and, if enabled, "# generated <UTC time>".
void write_csv_preamble(std::ostream& out, const std::string& kind, const CsvOptions& options);

std::string_view trace_csv_header();
void write_trace_csv(std::ostream& out, const sim::SimTrace& trace, const CsvOptions& options);

/// Skips '#' lines. Throws Error(kSchema) with the line number.
sim::SimTrace read_trace_csv(std::istream& in);

nlohmann::ordered_json to_json(const sim::RunReport& report);
nlohmann::ordered_json to_json(const planner::PlannerInputs& inputs);
nlohmann::ordered_json to_json(const broadcast::BroadcastPlan& plan);
nlohmann::ordered_json to_json(const broadcast::BroadcastOutcome& outcome);

/// Writes atomically enough for our purposes: truncate then write. Throws
/// Error(kIo) when the file cannot be opened or written.
void write_file(const std::string& path, const std::string& content);

/// Creates the directory (and parents). Throws Error(kIo).
void ensure_directory(const std::string& path);

}  // namespace bsrl::io
