// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/buffer.hpp"

#include <algorithm>
#include <string>

#include "bsrl/error.hpp"

namespace bsrl::buffer {

std::string_view to_string(PushResult r) {
  switch (r) {
    case PushResult::kAccepted: return "accepted";
    case PushResult::kRejectedStale: return "rejected_stale";
    case PushResult::kRejectedMalformed: return "rejected_malformed";
    case PushResult::kRejectedFull: return "rejected_full";
  }
  return "unknown";
}

CsvAuditWriter::CsvAuditWriter(std::ostream& out) : out_(&out) {
  *out_ << "event,version,learner_version,timestamp\n";
}

void CsvAuditWriter::operator()(const AuditRow& row) {
  *out_ << row.event << ',' << row.version << ',' << row.learner_version << ','
        << row.timestamp << '\n';
}

ReplayBuffer::ReplayBuffer(BufferOptions options) : options_(options) {}

void ReplayBuffer::set_audit_sink(AuditSink sink, std::function<double()> clock) {
  std::lock_guard lock(mu_);
  sink_ = std::move(sink);
  clock_ = std::move(clock);
}

void ReplayBuffer::audit(const char* event, Version version, Version learner_version) const {
  if (!sink_) return;
  sink_(AuditRow{event, version, learner_version, clock_ ? clock_() : 0.0});
}

PushResult ReplayBuffer::push(TrajectoryRecord record, Version learner_version,
                              int staleness_budget) {
  std::lock_guard lock(mu_);
  if (schema_violation(record)) {
    ++counters_.rejected_malformed_total;
    audit("reject_malformed", record.version, learner_version);
    return PushResult::kRejectedMalformed;
  }
  budget_ = staleness_budget;
  const Version floor = std::max(floor_.value_or(floor_for(learner_version)),
                                 floor_for(learner_version));
  floor_ = floor;
  if (record.version < floor) {
    ++counters_.rejected_stale_total;
    audit("reject_stale", record.version, learner_version);
    return PushResult::kRejectedStale;
  }
  if (options_.max_records && static_cast<std::size_t>(stored_) >= *options_.max_records) {
    ++counters_.rejected_full_total;
    audit("reject_full", record.version, learner_version);
    return PushResult::kRejectedFull;
  }
  const Version v = record.version;
  by_version_[v].push_back(std::move(record));
  ++stored_;
  ++counters_.accepted_total;
  audit("push", v, learner_version);
  return PushResult::kAccepted;
}

std::int64_t ReplayBuffer::evict_below(Version floor, Version learner_version) {
  std::int64_t evicted = 0;
  auto end = by_version_.lower_bound(floor);
  for (auto it = by_version_.begin(); it != end;) {
    const auto n = static_cast<std::int64_t>(it->second.size());
    evicted += n;
    for (std::int64_t i = 0; i < n; ++i) audit("evict", it->first, learner_version);
    it = by_version_.erase(it);
  }
  stored_ -= evicted;
  counters_.evicted_total += evicted;
  return evicted;
}

std::int64_t ReplayBuffer::evict_stale(Version learner_version, int staleness_budget) {
  std::lock_guard lock(mu_);
  budget_ = staleness_budget;
  const Version floor = std::max(floor_.value_or(floor_for(learner_version)),
                                 floor_for(learner_version));
  floor_ = floor;
  return evict_below(floor, learner_version);
}

std::int64_t ReplayBuffer::admissible_locked() const {
  if (!floor_) return stored_;
  std::int64_t n = 0;
  for (auto it = by_version_.lower_bound(*floor_); it != by_version_.end(); ++it) {
    n += static_cast<std::int64_t>(it->second.size());
  }
  return n;
}

bool ReplayBuffer::can_form_batch(std::int64_t batch_size) const {
  std::lock_guard lock(mu_);
  return admissible_locked() >= batch_size;
}

std::vector<TrajectoryRecord> ReplayBuffer::sample_batch(std::int64_t batch_size,
                                                         Version learner_version) {
  std::lock_guard lock(mu_);
  if (batch_size < 0) raise(ErrorCode::kConfig, "negative batch size");
  if (floor_) {
    floor_ = std::max(*floor_, floor_for(learner_version));
    evict_below(*floor_, learner_version);
  }
  if (stored_ < batch_size) {
    raise(ErrorCode::kUnavailable, "requested " + std::to_string(batch_size) +
                                       " records, only " + std::to_string(stored_) +
                                       " admissible");
  }
  std::vector<TrajectoryRecord> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  auto take_from = [&](std::map<Version, std::deque<TrajectoryRecord>>::iterator it) {
    auto& queue = it->second;
    while (!queue.empty() && static_cast<std::int64_t>(batch.size()) < batch_size) {
      audit("sample", it->first, learner_version);
      batch.push_back(std::move(queue.front()));
      queue.pop_front();
    }
    return queue.empty();
  };
  while (static_cast<std::int64_t>(batch.size()) < batch_size) {
    auto it = options_.order == SampleOrder::kOldestFirst ? by_version_.begin()
                                                          : std::prev(by_version_.end());
    if (take_from(it)) by_version_.erase(it);
  }
  stored_ -= batch_size;
  counters_.sampled_total += batch_size;
  return batch;
}

BufferStats ReplayBuffer::stats() const {
  std::lock_guard lock(mu_);
  BufferStats s = counters_;
  s.stored_count = stored_;
  s.admissible_count = admissible_locked();
  for (const auto& [v, q] : by_version_) s.per_version_histogram[v] = static_cast<std::int64_t>(q.size());
  return s;
}

}  // namespace bsrl::buffer
