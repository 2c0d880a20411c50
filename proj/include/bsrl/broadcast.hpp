// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

// Snapshot dissemination: push-to-all star (with or without a learner uplink
// cap) and a striped chain where every worker relays its stripe chunk by
// chunk to a single child.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsrl/record.hpp"
#include "bsrl/worker.hpp"

namespace bsrl::broadcast {

inline constexpr std::int64_t kDefaultChunkBytes = 4LL << 20;
inline constexpr double kUnlimited = std::numeric_limits<double>::infinity();

struct PolicySnapshot {
  Version version = 0;
  std::int64_t size_bytes = 0;
  std::uint64_t payload_digest = 0;
};

struct NetworkConfig {
  double learner_uplink_bytes_per_s = kUnlimited;  // B_0
  double worker_link_bytes_per_s = 0.0;            // B_w, default per worker
  std::int64_t chunk_bytes = kDefaultChunkBytes;
  double latency_per_hop_s = 0.0;

  bool uplink_unlimited() const { return !(learner_uplink_bytes_per_s < kUnlimited); }
  /// Link rate of a worker, falling back to the network default.
  double link_of(const WorkerSpec& w) const;
  void validate() const;
};

enum class Strategy { kStarUnlimited, kStarLimited, kTreePipelined };

std::string_view to_string(Strategy s);
/// Accepts star_unlimited, star_limited, tree_pipelined.
Strategy strategy_from_string(std::string_view name);

struct Stripe {
  int index = 0;
  std::int64_t offset = 0;
  std::int64_t bytes = 0;
  std::vector<WorkerId> chain;  // head first
};

struct BroadcastPlan {
  Strategy strategy = Strategy::kStarUnlimited;
  /// Tree: one stripe per chain. Star: a single stripe spanning the snapshot
  /// whose `chain` lists every worker as a direct child of the learner.
  std::vector<Stripe> stripes;
  std::int64_t stripe_bytes = 0;  // largest stripe
  std::vector<WorkerSpec> workers;

  int max_depth() const;
};

struct BroadcastOutcome {
  std::map<WorkerId, double> per_worker_install_time_s;
  double t_bcast_s = 0.0;
  std::int64_t bytes_sent_by_learner = 0;
};

/// Number of chains for a tree plan: min(floor(B_0 / B_w), fleet), at least 1.
int stripe_count(const NetworkConfig& net, std::size_t fleet_size);

/// Throws Error(kConfig) for an empty fleet, an unlimited uplink with
/// TreePipelined, or a chunk larger than a stripe.
BroadcastPlan plan_broadcast(Strategy strategy, std::span<const WorkerSpec> workers,
                             const NetworkConfig& net, const PolicySnapshot& snapshot);

/// The ceil(q * fleet_size)-th smallest install time; +inf when fewer workers
/// than that ever installed.
double measure_t_bcast(std::span<const double> install_times, double q, std::size_t fleet_size);

/// Closed-form install times. Star flows get a max-min fair share of B_0;
/// chain hops are modelled as a deterministic tandem of links so a stripe of
/// K chunks reaches depth d after (K + d - 1) chunk times on uniform links.
BroadcastOutcome simulate_dissemination(const BroadcastPlan& plan, const NetworkConfig& net,
                                        const PolicySnapshot& snapshot, double q);

// ---------------------------------------------------------------------------
// Chunk-level relay.

struct Chunk {
  Version version = 0;
  int stripe = 0;
  int index = 0;  // position within the stripe
  std::int64_t bytes = 0;
};

struct RelayAction {
  enum class Kind { kForward, kInstall };
  Kind kind = Kind::kForward;
  Chunk chunk;
  WorkerId to;  // child for kForward
};

/// Per-worker assembly state. A worker owns one or more stripes; it installs
/// the snapshot once every chunk of every owned stripe has arrived.
class RelayNode {
 public:
  RelayNode(WorkerId id, Version version, std::map<int, int> chunks_per_stripe,
            std::optional<WorkerId> child);

  /// Stores the chunk and, in the same step, forwards it to the child. Emits
  /// kInstall once assembly completes. Duplicates are ignored. Throws
  /// Error(kProtocol) for a chunk of a stripe this node does not own.
  std::vector<RelayAction> forward_on_receipt(const Chunk& chunk);

  bool installed() const { return installed_; }
  const WorkerId& id() const { return id_; }

 private:
  WorkerId id_;
  Version version_;
  std::map<int, int> expected_;
  std::map<int, std::vector<bool>> have_;
  int missing_ = 0;
  std::optional<WorkerId> child_;
  bool installed_ = false;
};

/// Receives every chunk arrival: (time, receiving worker, chunk).
using ChunkObserver = std::function<void(double, const WorkerId&, const Chunk&)>;

/// Event-driven execution of a plan: chunks are pushed by the learner and
/// relayed through RelayNode::forward_on_receipt over rate-limited links.
BroadcastOutcome run_event_driven(const BroadcastPlan& plan, const NetworkConfig& net,
                                  const PolicySnapshot& snapshot, double q,
                                  const ChunkObserver& observer = {});

}  // namespace bsrl::broadcast
