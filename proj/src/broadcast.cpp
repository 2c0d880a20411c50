// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/broadcast.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

#include "bsrl/error.hpp"
#include "bsrl/planner.hpp"

namespace bsrl::broadcast {
namespace {

std::vector<std::int64_t> chunk_sizes(std::int64_t bytes, std::int64_t chunk) {
  std::vector<std::int64_t> sizes;
  for (std::int64_t off = 0; off < bytes; off += chunk) {
    sizes.push_back(std::min(chunk, bytes - off));
  }
  return sizes;
}

const WorkerSpec& find_worker(const BroadcastPlan& plan, const WorkerId& id) {
  for (const auto& w : plan.workers) {
    if (w.id == id) return w;
  }
  raise(ErrorCode::kConfig, "worker " + id + " is not part of the plan");
}

// Max-min fair split of the learner uplink across one flow per worker, each
// capped by the worker link. Returned in plan order.
std::vector<double> star_rates(const BroadcastPlan& plan, const NetworkConfig& net) {
  const auto& chain = plan.stripes.front().chain;
  std::vector<double> caps;
  for (const auto& id : chain) caps.push_back(net.link_of(find_worker(plan, id)));
  if (plan.strategy == Strategy::kStarUnlimited || net.uplink_unlimited()) return caps;

  std::vector<std::size_t> order(caps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return caps[a] < caps[b]; });
  std::vector<double> rates(caps.size());
  double remaining = net.learner_uplink_bytes_per_s;
  std::size_t left = caps.size();
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double share = remaining / static_cast<double>(left);
    const std::size_t i = order[k];
    if (caps[i] <= share) {
      rates[i] = caps[i];
      remaining -= caps[i];
      --left;
    } else {
      for (std::size_t j = k; j < order.size(); ++j) rates[order[j]] = share;
      break;
    }
  }
  return rates;
}

// Rate of each hop along a chain; hop 0 leaves the learner.
std::vector<double> chain_rates(const BroadcastPlan& plan, const NetworkConfig& net,
                                const Stripe& stripe) {
  const double uplink_share =
      net.learner_uplink_bytes_per_s / static_cast<double>(plan.stripes.size());
  std::vector<double> rates;
  double upstream = uplink_share;
  for (const auto& id : stripe.chain) {
    const double link = net.link_of(find_worker(plan, id));
    rates.push_back(std::min(upstream, link));
    upstream = link;
  }
  return rates;
}

}  // namespace

double NetworkConfig::link_of(const WorkerSpec& w) const {
  return w.link_bytes_per_s > 0.0 ? w.link_bytes_per_s : worker_link_bytes_per_s;
}

void NetworkConfig::validate() const {
  if (!(learner_uplink_bytes_per_s > 0.0)) {
    raise(ErrorCode::kConfig, "learner uplink must be > 0 or unlimited");
  }
  if (!(worker_link_bytes_per_s > 0.0) || !std::isfinite(worker_link_bytes_per_s)) {
    raise(ErrorCode::kConfig, "worker link rate must be finite and > 0");
  }
  if (chunk_bytes <= 0) raise(ErrorCode::kConfig, "chunk_bytes must be > 0");
  if (!(latency_per_hop_s >= 0.0)) raise(ErrorCode::kConfig, "latency must be >= 0");
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kStarUnlimited: return "star_unlimited";
    case Strategy::kStarLimited: return "star_limited";
    case Strategy::kTreePipelined: return "tree_pipelined";
  }
  return "unknown";
}

Strategy strategy_from_string(std::string_view name) {
  if (name == "star_unlimited") return Strategy::kStarUnlimited;
  if (name == "star_limited") return Strategy::kStarLimited;
  if (name == "tree_pipelined") return Strategy::kTreePipelined;
  raise(ErrorCode::kConfig, "unknown broadcast strategy '" + std::string(name) + "'");
}

int BroadcastPlan::max_depth() const {
  if (strategy != Strategy::kTreePipelined) return stripes.empty() ? 0 : 1;
  std::size_t depth = 0;
  for (const auto& s : stripes) depth = std::max(depth, s.chain.size());
  return static_cast<int>(depth);
}

int stripe_count(const NetworkConfig& net, std::size_t fleet_size) {
  const double ratio = net.learner_uplink_bytes_per_s / net.worker_link_bytes_per_s;
  const auto by_bandwidth =
      static_cast<std::int64_t>(std::floor(ratio * (1.0 + planner::kBoundaryTolerance)));
  const auto n = std::min<std::int64_t>(by_bandwidth, static_cast<std::int64_t>(fleet_size));
  return static_cast<int>(std::max<std::int64_t>(1, n));
}

BroadcastPlan plan_broadcast(Strategy strategy, std::span<const WorkerSpec> workers,
                             const NetworkConfig& net, const PolicySnapshot& snapshot) {
  net.validate();
  if (workers.empty()) raise(ErrorCode::kConfig, "broadcast needs at least one worker");
  if (snapshot.size_bytes <= 0) raise(ErrorCode::kConfig, "snapshot size must be > 0");
  for (const auto& w : workers) w.validate();

  BroadcastPlan plan;
  plan.strategy = strategy;
  plan.workers.assign(workers.begin(), workers.end());
  std::stable_sort(plan.workers.begin(), plan.workers.end(),
                   [&](const WorkerSpec& a, const WorkerSpec& b) {
                     const double la = net.link_of(a), lb = net.link_of(b);
                     if (la != lb) return la > lb;
                     return a.id < b.id;
                   });

  if (strategy != Strategy::kTreePipelined) {
    Stripe all{0, 0, snapshot.size_bytes, {}};
    for (const auto& w : plan.workers) all.chain.push_back(w.id);
    plan.stripes.push_back(std::move(all));
    plan.stripe_bytes = snapshot.size_bytes;
    return plan;
  }

  if (net.uplink_unlimited()) {
    raise(ErrorCode::kConfig, "tree_pipelined needs a finite learner uplink");
  }
  const int n = stripe_count(net, plan.workers.size());
  const std::int64_t base = snapshot.size_bytes / n;
  const std::int64_t extra = snapshot.size_bytes % n;
  std::int64_t offset = 0;
  for (int j = 0; j < n; ++j) {
    const std::int64_t bytes = base + (j < extra ? 1 : 0);
    if (net.chunk_bytes > bytes) {
      raise(ErrorCode::kConfig, "chunk_bytes " + std::to_string(net.chunk_bytes) +
                                    " exceeds stripe size " + std::to_string(bytes));
    }
    plan.stripes.push_back(Stripe{j, offset, bytes, {}});
    offset += bytes;
    plan.stripe_bytes = std::max(plan.stripe_bytes, bytes);
  }
  for (std::size_t k = 0; k < plan.workers.size(); ++k) {
    plan.stripes[k % n].chain.push_back(plan.workers[k].id);
  }
  return plan;
}

double measure_t_bcast(std::span<const double> install_times, double q, std::size_t fleet_size) {
  if (fleet_size < 1) raise(ErrorCode::kConfig, "fleet_size must be >= 1");
  if (!(q > 0.0 && q <= 1.0)) raise(ErrorCode::kConfig, "q must be in (0, 1]");
  const auto rank = std::clamp<std::int64_t>(
      planner::stable_ceil(q * static_cast<double>(fleet_size)), 1,
      static_cast<std::int64_t>(fleet_size));
  if (static_cast<std::size_t>(rank) > install_times.size()) {
    return std::numeric_limits<double>::infinity();
  }
  std::vector<double> sorted(install_times.begin(), install_times.end());
  std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
  return sorted[static_cast<std::size_t>(rank - 1)];
}

namespace {

BroadcastOutcome finish(BroadcastOutcome out, double q, std::size_t fleet) {
  std::vector<double> times;
  for (const auto& [id, t] : out.per_worker_install_time_s) times.push_back(t);
  out.t_bcast_s = measure_t_bcast(times, q, fleet);
  return out;
}

}  // namespace

BroadcastOutcome simulate_dissemination(const BroadcastPlan& plan, const NetworkConfig& net,
                                        const PolicySnapshot& snapshot, double q) {
  net.validate();
  BroadcastOutcome out;
  const double lat = net.latency_per_hop_s;
  if (plan.strategy != Strategy::kTreePipelined) {
    const auto rates = star_rates(plan, net);
    const auto& chain = plan.stripes.front().chain;
    for (std::size_t i = 0; i < chain.size(); ++i) {
      out.per_worker_install_time_s[chain[i]] =
          static_cast<double>(snapshot.size_bytes) / rates[i] + lat;
    }
    out.bytes_sent_by_learner = snapshot.size_bytes * static_cast<std::int64_t>(chain.size());
    return finish(std::move(out), q, plan.workers.size());
  }

  for (const auto& stripe : plan.stripes) {
    const auto rates = chain_rates(plan, net, stripe);
    const auto sizes = chunk_sizes(stripe.bytes, net.chunk_bytes);
    // arrive[k]: arrival time of chunk k at the current hop's receiver.
    std::vector<double> arrive(sizes.size(), 0.0);
    for (std::size_t d = 0; d < stripe.chain.size(); ++d) {
      double link_free = 0.0;
      for (std::size_t k = 0; k < sizes.size(); ++k) {
        const double ready = d == 0 ? 0.0 : arrive[k];
        link_free = std::max(ready, link_free) + static_cast<double>(sizes[k]) / rates[d];
        arrive[k] = link_free + lat;
      }
      out.per_worker_install_time_s[stripe.chain[d]] = arrive.back();
    }
    out.bytes_sent_by_learner += stripe.bytes;
  }
  return finish(std::move(out), q, plan.workers.size());
}

RelayNode::RelayNode(WorkerId id, Version version, std::map<int, int> chunks_per_stripe,
                     std::optional<WorkerId> child)
    : id_(std::move(id)), version_(version), expected_(std::move(chunks_per_stripe)),
      child_(std::move(child)) {
  for (const auto& [stripe, count] : expected_) {
    have_[stripe].assign(static_cast<std::size_t>(count), false);
    missing_ += count;
  }
}

std::vector<RelayAction> RelayNode::forward_on_receipt(const Chunk& chunk) {
  auto it = have_.find(chunk.stripe);
  if (it == have_.end()) {
    raise(ErrorCode::kProtocol, "worker " + id_ + " received chunk of unassigned stripe " +
                                    std::to_string(chunk.stripe));
  }
  if (chunk.version != version_ || chunk.index < 0 ||
      static_cast<std::size_t>(chunk.index) >= it->second.size()) {
    raise(ErrorCode::kProtocol, "worker " + id_ + " received an out-of-range chunk");
  }
  std::vector<RelayAction> actions;
  if (it->second[static_cast<std::size_t>(chunk.index)]) return actions;
  it->second[static_cast<std::size_t>(chunk.index)] = true;
  --missing_;
  if (child_) actions.push_back({RelayAction::Kind::kForward, chunk, *child_});
  if (missing_ == 0 && !installed_) {
    installed_ = true;
    actions.push_back({RelayAction::Kind::kInstall, chunk, {}});
  }
  return actions;
}

BroadcastOutcome run_event_driven(const BroadcastPlan& plan, const NetworkConfig& net,
                                  const PolicySnapshot& snapshot, double q,
                                  const ChunkObserver& observer) {
  net.validate();
  const double lat = net.latency_per_hop_s;
  BroadcastOutcome out;

  struct Arrival {
    double time;
    std::uint64_t seq;
    std::string to;
    Chunk chunk;
    bool operator>(const Arrival& o) const { return std::tie(time, seq) > std::tie(o.time, o.seq); }
  };
  std::priority_queue<Arrival, std::vector<Arrival>, std::greater<>> queue;
  std::uint64_t seq = 0;

  std::map<WorkerId, RelayNode> nodes;
  std::map<WorkerId, double> out_rate;    // rate towards the child
  std::map<WorkerId, double> link_free;   // when the outbound link is idle

  auto push_stream = [&](const Stripe& stripe, const WorkerId& to, double rate) {
    const auto sizes = chunk_sizes(stripe.bytes, net.chunk_bytes);
    double t = 0.0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      t += static_cast<double>(sizes[k]) / rate;
      queue.push({t + lat, seq++, to,
                  Chunk{snapshot.version, stripe.index, static_cast<int>(k), sizes[k]}});
    }
    out.bytes_sent_by_learner += stripe.bytes;
  };

  if (plan.strategy != Strategy::kTreePipelined) {
    const auto& stripe = plan.stripes.front();
    const auto rates = star_rates(plan, net);
    const int chunks = static_cast<int>(chunk_sizes(stripe.bytes, net.chunk_bytes).size());
    for (std::size_t i = 0; i < stripe.chain.size(); ++i) {
      nodes.emplace(stripe.chain[i],
                    RelayNode(stripe.chain[i], snapshot.version, {{stripe.index, chunks}}, {}));
      push_stream(stripe, stripe.chain[i], rates[i]);
    }
  } else {
    for (const auto& stripe : plan.stripes) {
      const auto rates = chain_rates(plan, net, stripe);
      const int chunks = static_cast<int>(chunk_sizes(stripe.bytes, net.chunk_bytes).size());
      for (std::size_t d = 0; d < stripe.chain.size(); ++d) {
        std::optional<WorkerId> child;
        if (d + 1 < stripe.chain.size()) {
          child = stripe.chain[d + 1];
          out_rate[stripe.chain[d]] = rates[d + 1];
          link_free[stripe.chain[d]] = 0.0;
        }
        nodes.emplace(stripe.chain[d],
                      RelayNode(stripe.chain[d], snapshot.version, {{stripe.index, chunks}}, child));
      }
      push_stream(stripe, stripe.chain.front(), rates.front());
    }
  }

  while (!queue.empty()) {
    Arrival a = queue.top();
    queue.pop();
    if (observer) observer(a.time, a.to, a.chunk);
    auto& node = nodes.at(a.to);
    for (const auto& action : node.forward_on_receipt(a.chunk)) {
      if (action.kind == RelayAction::Kind::kInstall) {
        out.per_worker_install_time_s[a.to] = a.time;
        continue;
      }
      double& free_at = link_free[a.to];
      free_at = std::max(free_at, a.time) + static_cast<double>(action.chunk.bytes) / out_rate[a.to];
      queue.push({free_at + lat, seq++, action.to, action.chunk});
    }
  }
  return finish(std::move(out), q, plan.workers.size());
}

}  // namespace bsrl::broadcast
