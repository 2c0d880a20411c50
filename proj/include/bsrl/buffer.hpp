// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

// Version-indexed replay buffer with bounded-staleness admission.
//
// A record with version v is admissible at learner version v_t iff
// v >= v_t - S. Pushes may come from many producers; sample_batch and
// evict_stale belong to the single learner loop.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bsrl/record.hpp"

namespace bsrl::buffer {

enum class SampleOrder { kOldestFirst, kNewestFirst };

enum class PushResult { kAccepted, kRejectedStale, kRejectedMalformed, kRejectedFull };

std::string_view to_string(PushResult r);

struct BufferOptions {
  SampleOrder order = SampleOrder::kOldestFirst;
  /// Unbounded when empty; otherwise newest pushes beyond the cap are rejected.
  std::optional<std::size_t> max_records;
};

struct BufferStats {
  std::int64_t admissible_count = 0;
  std::int64_t stored_count = 0;
  std::int64_t accepted_total = 0;
  std::int64_t sampled_total = 0;
  std::int64_t evicted_total = 0;
  std::int64_t rejected_stale_total = 0;
  std::int64_t rejected_malformed_total = 0;
  std::int64_t rejected_full_total = 0;
  std::map<Version, std::int64_t> per_version_histogram;
};

/// One row of the optional audit trail.
struct AuditRow {
  std::string event;  // push, reject_stale, reject_malformed, reject_full, evict, sample
  Version version = 0;
  Version learner_version = 0;
  double timestamp = 0.0;
};

using AuditSink = std::function<void(const AuditRow&)>;

/// Writes audit rows as CSV (header on construction). Not thread-safe on its
/// own; the buffer serializes calls to the sink.
class CsvAuditWriter {
 public:
  explicit CsvAuditWriter(std::ostream& out);
  void operator()(const AuditRow& row);

 private:
  std::ostream* out_;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(BufferOptions options = {});

  ReplayBuffer(const ReplayBuffer&) = delete;
  ReplayBuffer& operator=(const ReplayBuffer&) = delete;

  PushResult push(TrajectoryRecord record, Version learner_version, int staleness_budget);

  /// Drops every record with version < learner_version - S.
  std::int64_t evict_stale(Version learner_version, int staleness_budget);

  bool can_form_batch(std::int64_t batch_size) const;

  /// Removes and returns exactly `batch_size` admissible records in the
  /// configured version order, FIFO within a version. Admission is re-checked
  /// against `learner_version` with the most recently used budget.
  /// Throws Error(kUnavailable) when too few admissible records exist.
  std::vector<TrajectoryRecord> sample_batch(std::int64_t batch_size, Version learner_version);

  BufferStats stats() const;

  /// Clock used to stamp audit rows; defaults to 0.
  void set_audit_sink(AuditSink sink, std::function<double()> clock = {});

 private:
  Version floor_for(Version learner_version) const { return learner_version - budget_; }
  std::int64_t evict_below(Version floor, Version learner_version);
  std::int64_t admissible_locked() const;
  void audit(const char* event, Version version, Version learner_version) const;

  mutable std::mutex mu_;
  BufferOptions options_;
  std::map<Version, std::deque<TrajectoryRecord>> by_version_;
  std::int64_t stored_ = 0;
  // Highest admission floor seen so far; floors only move forward.
  std::optional<Version> floor_;
  int budget_ = 0;
  BufferStats counters_;
  AuditSink sink_;
  std::function<double()> clock_;
};

}  // namespace bsrl::buffer
