// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "bsrl/buffer.hpp"
#include "bsrl/error.hpp"
#include "doctest.h"

using namespace bsrl;
using namespace bsrl::buffer;

namespace {

TrajectoryRecord rec(Version v, std::string id = "p") {
  TrajectoryRecord r;
  r.prompt_id = std::move(id);
  r.version = v;
  r.reward = 1.0;
  return r;
}

}  // namespace

TEST_CASE("push admits exactly at the staleness boundary") {
  ReplayBuffer b;
  CHECK(b.push(rec(7), 10, 3) == PushResult::kAccepted);
  CHECK(b.push(rec(6), 10, 3) == PushResult::kRejectedStale);
  auto bad = rec(9);
  bad.reward = std::nan("");
  CHECK(b.push(bad, 10, 3) == PushResult::kRejectedMalformed);
  const auto s = b.stats();
  CHECK(s.stored_count == 1);
  CHECK(s.rejected_stale_total == 1);
  CHECK(s.rejected_malformed_total == 1);
}

TEST_CASE("malformed metadata is rejected and never stored") {
  ReplayBuffer b;
  auto r = rec(1);
  r.response_payload = {1, 2, 3};
  r.metadata.response_mask = {0, 1};
  CHECK(b.push(r, 1, 3) == PushResult::kRejectedMalformed);
  r.metadata.response_mask = {0, 1, 1};
  r.metadata.loss_mask = {0, 1};
  CHECK(b.push(r, 1, 3) == PushResult::kAccepted);
  auto neg = rec(-1);
  CHECK(b.push(neg, 0, 3) == PushResult::kRejectedMalformed);
  CHECK(b.stats().stored_count == 1);
}

TEST_CASE("evict_stale") {
  ReplayBuffer b;
  for (int i = 0; i < 3; ++i) b.push(rec(5), 5, 3);
  for (int i = 0; i < 2; ++i) b.push(rec(8), 8, 3);
  CHECK(b.evict_stale(10, 3) == 3);
  CHECK(b.stats().stored_count == 2);
  CHECK(b.stats().evicted_total == 3);

  ReplayBuffer empty;
  CHECK(empty.evict_stale(10, 3) == 0);
  ReplayBuffer fresh;
  fresh.push(rec(9), 9, 3);
  CHECK(fresh.evict_stale(10, 3) == 0);
}

TEST_CASE("can_form_batch") {
  ReplayBuffer b;
  CHECK_FALSE(b.can_form_batch(1));
  for (int i = 0; i < 127; ++i) b.push(rec(1), 1, 3);
  CHECK_FALSE(b.can_form_batch(128));
  b.push(rec(1), 1, 3);
  CHECK(b.can_form_batch(128));
}

TEST_CASE("sample_batch is oldest-version first, FIFO within a version") {
  ReplayBuffer b;
  for (int i = 0; i < 100; ++i) b.push(rec(9, "b" + std::to_string(i)), 9, 3);
  for (int i = 0; i < 100; ++i) b.push(rec(8, "a" + std::to_string(i)), 9, 3);
  auto batch = b.sample_batch(128, 9);
  REQUIRE(batch.size() == 128);
  for (int i = 0; i < 100; ++i) {
    CHECK(batch[i].version == 8);
    CHECK(batch[i].prompt_id == "a" + std::to_string(i));
  }
  for (int i = 100; i < 128; ++i) {
    CHECK(batch[i].version == 9);
    CHECK(batch[i].prompt_id == "b" + std::to_string(i - 100));
  }
  CHECK(b.sample_batch(0, 9).empty());
  CHECK(b.stats().stored_count == 72);
}

TEST_CASE("sample_batch newest-first order") {
  ReplayBuffer b({SampleOrder::kNewestFirst, {}});
  for (int i = 0; i < 3; ++i) b.push(rec(4), 4, 3);
  for (int i = 0; i < 3; ++i) b.push(rec(6), 6, 3);
  auto batch = b.sample_batch(4, 6);
  CHECK(batch[0].version == 6);
  CHECK(batch[2].version == 6);
  CHECK(batch[3].version == 4);
}

TEST_CASE("whole buffer of one version comes back in insertion order") {
  ReplayBuffer b;
  for (int i = 0; i < 5; ++i) b.push(rec(2, std::to_string(i)), 2, 3);
  auto batch = b.sample_batch(5, 2);
  for (int i = 0; i < 5; ++i) CHECK(batch[i].prompt_id == std::to_string(i));
}

TEST_CASE("sample re-checks admission against the current learner version") {
  ReplayBuffer b;
  for (int i = 0; i < 4; ++i) b.push(rec(3), 3, 3);
  for (int i = 0; i < 4; ++i) b.push(rec(5), 5, 3);
  // At learner version 7 the floor is 4, so only the four v=5 records remain.
  CHECK_THROWS_AS(b.sample_batch(5, 7), bsrl::Error);
  CHECK(b.stats().evicted_total == 4);
  auto batch = b.sample_batch(4, 7);
  for (const auto& r : batch) CHECK(r.version == 5);
}

TEST_CASE("insufficient records is an unavailable error") {
  ReplayBuffer b;
  b.push(rec(0), 0, 3);
  try {
    b.sample_batch(2, 0);
    FAIL("expected an error");
  } catch (const bsrl::Error& e) {
    CHECK(e.code() == ErrorCode::kUnavailable);
  }
}

TEST_CASE("stats counters") {
  ReplayBuffer b;
  auto s = b.stats();
  CHECK(s.admissible_count == 0);
  CHECK(s.evicted_total == 0);
  CHECK(s.rejected_malformed_total == 0);
  CHECK(s.per_version_histogram.empty());

  b.push(rec(1), 1, 3);
  b.push(rec(1), 1, 3);
  b.push(rec(2), 2, 3);
  auto bad = rec(2);
  bad.reward = std::numeric_limits<double>::infinity();
  b.push(bad, 2, 3);
  s = b.stats();
  CHECK(s.admissible_count == 3);
  CHECK(s.rejected_malformed_total == 1);

  b.evict_stale(5, 3);
  s = b.stats();
  CHECK(s.evicted_total == 2);
  CHECK(s.per_version_histogram.size() == 1);
  CHECK(s.per_version_histogram.at(2) == 1);
}

TEST_CASE("capacity cap rejects the newest push") {
  ReplayBuffer b({SampleOrder::kOldestFirst, 2});
  CHECK(b.push(rec(1), 1, 3) == PushResult::kAccepted);
  CHECK(b.push(rec(1), 1, 3) == PushResult::kAccepted);
  CHECK(b.push(rec(1), 1, 3) == PushResult::kRejectedFull);
}

TEST_CASE("audit trail is CSV") {
  std::ostringstream out;
  ReplayBuffer b;
  CsvAuditWriter writer(out);
  double now = 1.5;
  b.set_audit_sink(std::ref(writer), [&] { return now; });
  b.push(rec(1), 1, 3);
  now = 2.0;
  b.sample_batch(1, 1);
  CHECK(out.str() == "event,version,learner_version,timestamp\npush,1,1,1.5\nsample,1,1,2\n");
}

TEST_CASE("property: randomized push/evict/sample keeps conservation and staleness") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    ReplayBuffer b;
    const int budget = 3 + static_cast<int>(rng() % 4);
    Version learner = 0;
    std::int64_t sampled = 0;
    for (int op = 0; op < 2000; ++op) {
      const auto roll = rng() % 10;
      if (roll < 7) {
        const Version lag = static_cast<Version>(rng() % (budget + 3));
        b.push(rec(std::max<Version>(0, learner - lag)), learner, budget);
      } else if (roll < 8) {
        b.evict_stale(learner, budget);
        const auto hist = b.stats().per_version_histogram;
        if (!hist.empty()) CHECK(hist.begin()->first >= learner - budget);
      } else {
        const auto r = static_cast<std::int64_t>(rng() % 8);
        b.evict_stale(learner, budget);
        if (b.can_form_batch(r)) {
          for (const auto& x : b.sample_batch(r, learner)) CHECK(learner - x.version <= budget);
          sampled += r;
          ++learner;
        }
      }
    }
    const auto s = b.stats();
    CHECK(s.accepted_total == s.sampled_total + s.evicted_total + s.stored_count);
    CHECK(s.sampled_total == sampled);
    std::int64_t hist_sum = 0;
    for (const auto& [v, n] : s.per_version_histogram) hist_sum += n;
    CHECK(hist_sum == s.stored_count);
  }
}

TEST_CASE("property: identical operation sequences give identical batches") {
  auto run = [] {
    ReplayBuffer b;
    std::mt19937_64 rng(99);
    std::vector<std::string> ids;
    for (int i = 0; i < 500; ++i) {
      b.push(rec(static_cast<Version>(rng() % 6), std::to_string(rng() % 1000)), 5, 3);
    }
    for (const auto& r : b.sample_batch(200, 5)) ids.push_back(r.prompt_id);
    return ids;
  };
  CHECK(run() == run());
}

TEST_CASE("concurrent pushes are all accounted for") {
  ReplayBuffer b;
  std::vector<std::thread> producers;
  for (int t = 0; t < 4; ++t) {
    producers.emplace_back([&b] {
      for (int i = 0; i < 1000; ++i) b.push(rec(3), 3, 3);
    });
  }
  for (auto& t : producers) t.join();
  CHECK(b.stats().accepted_total == 4000);
  CHECK(b.sample_batch(4000, 3).size() == 4000);
}
