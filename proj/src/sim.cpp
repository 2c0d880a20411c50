// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <unordered_map>

#include "bsrl/error.hpp"

namespace bsrl::sim {

namespace {

constexpr std::string_view kKindNames[] = {
    "step_start", "step_end",     "publish",   "chunk_forward", "install",
    "rollout_delivered", "batch_sampled", "idle_start", "idle_end", "activate",
    "release",    "evict",        "run_end",
};

}  // namespace

std::string_view to_string(EventKind kind) { return kKindNames[static_cast<int>(kind)]; }

EventKind event_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == name) return static_cast<EventKind>(i);
  }
  raise(ErrorCode::kIntegrity, "unknown trace event kind '" + std::string(name) + "'");
}

double SimConfig::pool_mu() const {
  double mu = 0.0;
  for (const auto& w : workers) mu += w.mu;
  return mu;
}

void SimConfig::validate() const {
  planner.validate();
  if (total_steps < 1) raise(ErrorCode::kConfig, "total_steps must be >= 1");
  if (!(rollout_jitter >= 0.0) || !std::isfinite(rollout_jitter)) {
    raise(ErrorCode::kConfig, "rollout_jitter must be a finite value >= 0");
  }
  if (snapshot_bytes < 0) raise(ErrorCode::kConfig, "snapshot_bytes must be >= 0");
  std::set<WorkerId> ids;
  for (const auto& w : workers) {
    w.validate();
    if (!ids.insert(w.id).second) raise(ErrorCode::kConfig, "duplicate worker id '" + w.id + "'");
  }
  if (snapshot_bytes > 0) {
    net.validate();
    if (strategy == broadcast::Strategy::kTreePipelined && net.uplink_unlimited()) {
      raise(ErrorCode::kConfig, "tree_pipelined needs a finite learner uplink");
    }
  }
  const double qv = q();
  if (!(qv > 0.0 && qv <= 1.0)) raise(ErrorCode::kConfig, "install_fraction must be in (0, 1]");
  if (warmup() < 0) raise(ErrorCode::kConfig, "warmup_steps must be >= 0");
  if (!(max_time_s >= 0.0)) raise(ErrorCode::kConfig, "max_time_s must be >= 0");
  if (!(learner_cost_per_hour >= 0.0)) raise(ErrorCode::kConfig, "learner cost must be >= 0");
  if (control.window_ticks < 1) raise(ErrorCode::kConfig, "control window must be >= 1 tick");
  if (!(control.release_ratio > 1.0)) raise(ErrorCode::kConfig, "release_ratio must be > 1");
}

ReportContext ReportContext::from_config(const SimConfig& config) {
  ReportContext ctx;
  ctx.q = config.q();
  ctx.warmup_steps = config.warmup();
  for (const auto& w : config.workers) ctx.worker_cost_per_hour[w.id] = w.cost_per_hour;
  ctx.learner_cost_per_hour = config.learner_cost_per_hour;
  return ctx;
}

namespace {

// Tie order at equal times: chunk traffic, installs, deliveries, then step
// boundaries, so a step starting at time t sees everything delivered at t.
enum class Pending { kChunk = 0, kInstall = 1, kDelivery = 2, kStepEnd = 3 };

struct QueueItem {
  double time;
  Pending kind;
  std::uint64_t seq;
  std::size_t worker = 0;
  Version version = 0;
  std::uint64_t token = 0;
  std::int64_t bytes = 0;

  bool operator>(const QueueItem& o) const {
    if (time != o.time) return time > o.time;
    if (kind != o.kind) return kind > o.kind;
    return seq > o.seq;
  }
};

struct WorkerRt {
  WorkerSpec spec;
  bool active = false;
  Version installed = -1;
  bool paused = false;
  Version awaiting = -1;
  bool busy = false;
  Version tag = 0;
  double end_time = 0.0;
  double remaining = 0.0;
  std::uint64_t token = 0;
  std::mt19937_64 rng;
};

class Engine {
 public:
  explicit Engine(const SimConfig& cfg)
      : cfg_(cfg), buffer_(buffer::BufferOptions{cfg.worst_case ? buffer::SampleOrder::kNewestFirst
                                                                  : cfg.sample_order,
                                                 std::nullopt}) {
    const double cv = cfg.rollout_jitter;
    if (cv > 0.0) {
      const double s2 = std::log1p(cv * cv);
      jitter_ = std::lognormal_distribution<double>(-0.5 * s2, std::sqrt(s2));
    }
    for (std::size_t i = 0; i < cfg.workers.size(); ++i) {
      WorkerRt rt;
      rt.spec = cfg.workers[i];
      std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed),
                        static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                        static_cast<std::uint32_t>(i)};
      rt.rng.seed(seq);
      index_[rt.spec.id] = i;
      workers_.push_back(std::move(rt));
    }
  }

  SimTrace run() {
    std::vector<bool> initial(workers_.size(), true);
    if (cfg_.autoscale) {
      const auto target = planner::compute_mu_min(cfg_.planner);
      std::fill(initial.begin(), initial.end(), false);
      if (target.feasible) {
        for (const auto& id : scheduler::greedy_provision(cfg_.workers, target.mu_target).active) {
          initial[index_.at(id)] = true;
        }
      } else {
        std::fill(initial.begin(), initial.end(), true);
      }
    }
    for (std::size_t i = 0; i < workers_.size(); ++i) {
      if (!initial[i]) continue;
      workers_[i].active = true;
      log({0.0, EventKind::kActivate, -1, -1, workers_[i].spec.id});
    }
    for (auto& w : workers_) {
      if (!w.active) continue;
      w.installed = 0;
      log({0.0, EventKind::kInstall, -1, 0, w.spec.id});
    }
    for (std::size_t i = 0; i < workers_.size(); ++i) {
      if (workers_[i].active) start_rollout(i, 0.0);
    }
    try_step(0.0);

    double now = 0.0;
    while (!done_ && !queue_.empty()) {
      const QueueItem item = queue_.top();
      if (cfg_.max_time_s > 0.0 && item.time > cfg_.max_time_s) {
        now = cfg_.max_time_s;
        break;
      }
      queue_.pop();
      now = item.time;
      dispatch(item);
    }
    if (!done_) finish(now);
    return std::move(trace_);
  }

 private:
  void log(TraceEvent e) { trace_.events.push_back(std::move(e)); }

  void push(QueueItem item) {
    item.seq = seq_++;
    queue_.push(item);
  }

  double rollout_duration(WorkerRt& w) {
    const double base = 1.0 / w.spec.mu;
    return jitter_ ? base * (*jitter_)(w.rng) : base;
  }

  void start_rollout(std::size_t i, double now) {
    auto& w = workers_[i];
    w.busy = true;
    w.tag = w.installed;
    w.end_time = now + rollout_duration(w);
    push({w.end_time, Pending::kDelivery, 0, i, 0, ++w.token});
  }

  void pause(std::size_t i, double now, Version awaiting) {
    auto& w = workers_[i];
    if (w.busy && !w.paused) {
      w.remaining = w.end_time - now;
      ++w.token;
    }
    w.paused = true;
    w.awaiting = awaiting;
  }

  void resume(std::size_t i, double now) {
    auto& w = workers_[i];
    w.paused = false;
    if (w.busy) {
      w.end_time = now + w.remaining;
      push({w.end_time, Pending::kDelivery, 0, i, 0, ++w.token});
    } else {
      start_rollout(i, now);
    }
  }

  void dispatch(const QueueItem& item) {
    switch (item.kind) {
      case Pending::kChunk:
        log({item.time, EventKind::kChunkForward, -1, item.version, workers_[item.worker].spec.id,
             item.bytes});
        break;
      case Pending::kInstall:
        on_install(item);
        break;
      case Pending::kDelivery:
        on_delivery(item);
        break;
      case Pending::kStepEnd:
        on_step_end(item.time);
        break;
    }
  }

  void on_install(const QueueItem& item) {
    auto& w = workers_[item.worker];
    if (!w.active) return;
    w.installed = std::max(w.installed, item.version);
    log({item.time, EventKind::kInstall, -1, item.version, w.spec.id});
    if (w.paused && w.installed >= w.awaiting) resume(item.worker, item.time);
  }

  void on_delivery(const QueueItem& item) {
    auto& w = workers_[item.worker];
    if (!w.active || w.paused || item.token != w.token) return;
    w.busy = false;
    TrajectoryRecord rec;
    rec.prompt_id = std::to_string(next_prompt_++);
    rec.version = w.tag;
    const auto result = buffer_.push(std::move(rec), learner_version_, cfg_.planner.staleness_budget);
    log({item.time, EventKind::kRolloutDelivered, -1, w.tag, w.spec.id,
         result == buffer::PushResult::kAccepted ? 1 : 0});
    start_rollout(item.worker, item.time);
    try_step(item.time);
  }

  void try_step(double now) {
    if (learner_busy_ || done_) return;
    const Version lv = learner_version_;
    const auto evicted = buffer_.evict_stale(lv, cfg_.planner.staleness_budget);
    if (evicted > 0) log({now, EventKind::kEvict, -1, lv, {}, evicted});
    const std::int64_t r = cfg_.planner.rollouts_per_step;
    if (!buffer_.can_form_batch(r)) {
      if (!idle_) {
        idle_ = true;
        log({now, EventKind::kIdleStart, lv});
      }
      return;
    }
    const auto batch = buffer_.sample_batch(r, lv);
    Version lo = std::numeric_limits<Version>::max(), hi = -1;
    for (const auto& rec : batch) {
      lo = std::min(lo, rec.version);
      hi = std::max(hi, rec.version);
    }
    if (idle_) {
      idle_ = false;
      log({now, EventKind::kIdleEnd, lv});
    }
    log({now, EventKind::kBatchSampled, lv, lv, {}, r, lo, hi});
    log({now, EventKind::kStepStart, lv, lv});
    learner_busy_ = true;
    push({now + cfg_.planner.t_train, Pending::kStepEnd, 0});
  }

  void on_step_end(double now) {
    learner_busy_ = false;
    const std::int64_t step = learner_version_;
    ++learner_version_;
    log({now, EventKind::kStepEnd, step, learner_version_});
    if (learner_version_ >= cfg_.total_steps) {
      finish(now);
      return;
    }
    if (learner_version_ % cfg_.planner.kappa == 0) publish(now);
    try_step(now);
  }

  void control(double now) {
    std::vector<scheduler::WorkerState> states;
    for (const auto& w : workers_) states.push_back(scheduler::WorkerState::from_spec(w.spec, w.active));
    const auto decision = controller_.control_step(states, cfg_.planner, now);
    for (const auto& action : decision.actions) {
      auto& w = workers_[index_.at(action.worker)];
      if (action.kind == scheduler::ActionKind::kActivate) {
        w.active = true;
        w.busy = false;
        w.paused = false;
        ++w.token;
        log({now, EventKind::kActivate, -1, -1, w.spec.id});
      } else {
        w.active = false;
        w.busy = false;
        w.paused = false;
        ++w.token;
        log({now, EventKind::kRelease, -1, -1, w.spec.id});
      }
    }
  }

  void publish(double now) {
    const Version v = learner_version_;
    if (cfg_.autoscale) control(now);
    log({now, EventKind::kPublish, -1, v});

    std::vector<WorkerSpec> active;
    for (const auto& w : workers_) {
      if (w.active) active.push_back(w.spec);
    }
    if (active.empty()) return;

    std::map<WorkerId, double> offsets;
    if (cfg_.snapshot_bytes == 0) {
      for (const auto& w : active) offsets[w.id] = 0.0;
    } else {
      const broadcast::PolicySnapshot snap{v, cfg_.snapshot_bytes, static_cast<std::uint64_t>(v)};
      const auto plan = broadcast::plan_broadcast(cfg_.strategy, active, cfg_.net, snap);
      if (cfg_.chunk_events) {
        offsets = broadcast::run_event_driven(
                      plan, cfg_.net, snap, cfg_.q(),
                      [&](double t, const WorkerId& to, const broadcast::Chunk& c) {
                        push({now + t, Pending::kChunk, 0, index_.at(to), v, 0, c.bytes});
                      })
                      .per_worker_install_time_s;
      } else {
        offsets = broadcast::simulate_dissemination(plan, cfg_.net, snap, cfg_.q())
                      .per_worker_install_time_s;
      }
    }
    if (cfg_.worst_case) {
      double latest = 0.0;
      for (const auto& [id, t] : offsets) latest = std::max(latest, t);
      for (auto& [id, t] : offsets) t = latest;
    }
    for (std::size_t i = 0; i < workers_.size(); ++i) {
      auto& w = workers_[i];
      if (!w.active) continue;
      // A freshly activated worker has nothing to generate with until it installs.
      if (!cfg_.generate_during_dissemination || w.installed < 0) {
        pause(i, now, v);
      }
      push({now + offsets.at(w.spec.id), Pending::kInstall, 0, i, v});
    }
  }

  void finish(double now) {
    done_ = true;
    log({now, EventKind::kRunEnd});
  }

  const SimConfig& cfg_;
  buffer::ReplayBuffer buffer_;
  std::optional<std::lognormal_distribution<double>> jitter_;
  std::vector<WorkerRt> workers_;
  std::unordered_map<WorkerId, std::size_t> index_;
  std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  scheduler::CapacityController controller_{cfg_.control};
  SimTrace trace_;
  Version learner_version_ = 0;
  bool learner_busy_ = false;
  bool idle_ = false;
  bool done_ = false;
  std::int64_t next_prompt_ = 0;
};

// Length of [a, b] inside [lo, hi].
double clipped(double a, double b, double lo, double hi) {
  return std::max(0.0, std::min(b, hi) - std::max(a, lo));
}

}  // namespace

RunResult run(const SimConfig& config) {
  config.validate();
  RunResult out;
  out.trace = Engine(config).run();
  out.report = compute_report(out.trace, ReportContext::from_config(config));
  return out;
}

RunReport worst_case_mode(SimConfig config) {
  config.worst_case = true;
  return run(config).report;
}

std::vector<SweepRow> sweep_pool_size(const SimConfig& base, const std::vector<std::int64_t>& sizes) {
  if (base.workers.empty()) raise(ErrorCode::kConfig, "pool sweep needs a template worker");
  std::vector<SweepRow> rows;
  for (const auto n : sizes) {
    if (n < 0) raise(ErrorCode::kConfig, "pool size must be >= 0");
    SimConfig cfg = base;
    cfg.workers.clear();
    for (std::int64_t i = 0; i < n; ++i) {
      WorkerSpec w = base.workers.front();
      w.id = "w" + std::to_string(i);
      cfg.workers.push_back(std::move(w));
    }
    const auto report = run(cfg).report;
    rows.push_back({n, cfg.pool_mu(), report.bubble_ratio, report.delta_max});
  }
  return rows;
}

RunReport compute_report(const SimTrace& trace, const ReportContext& ctx) {
  const auto& ev = trace.events;
  auto bad = [](const std::string& what, std::size_t i) {
    raise(ErrorCode::kIntegrity, "event " + std::to_string(i) + ": " + what);
  };
  if (ev.empty() || ev.back().kind != EventKind::kRunEnd) {
    raise(ErrorCode::kIntegrity, "trace does not end with run_end");
  }
  RunReport rep;
  const double end = ev.back().time_s;
  rep.sim_time_s = end;

  std::vector<std::pair<double, double>> idle, train;
  std::optional<double> idle_open, step_open;
  std::int64_t open_step = -1;
  std::optional<double> window_start;
  std::map<WorkerId, double> active_since;
  std::map<WorkerId, double> active_seconds;
  std::map<Version, std::pair<double, std::size_t>> publications;  // time, fleet
  std::map<Version, std::vector<double>> installs;

  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto& e = ev[i];
    if (!std::isfinite(e.time_s) || e.time_s < 0.0) bad("bad timestamp", i);
    if (i > 0 && e.time_s < ev[i - 1].time_s) bad("time goes backwards", i);
    switch (e.kind) {
      case EventKind::kStepStart:
        if (step_open) bad("step_start inside a step", i);
        if (idle_open) bad("step_start while idle", i);
        step_open = e.time_s;
        open_step = e.step;
        if (ctx.warmup_steps > 0 && e.step == ctx.warmup_steps) window_start = e.time_s;
        break;
      case EventKind::kStepEnd:
        if (!step_open || e.step != open_step) bad("step_end without matching step_start", i);
        train.emplace_back(*step_open, e.time_s);
        step_open.reset();
        ++rep.steps_completed;
        break;
      case EventKind::kIdleStart:
        if (idle_open || step_open) bad("idle_start while idle or training", i);
        idle_open = e.time_s;
        break;
      case EventKind::kIdleEnd:
        if (!idle_open) bad("idle_end without idle_start", i);
        idle.emplace_back(*idle_open, e.time_s);
        idle_open.reset();
        break;
      case EventKind::kBatchSampled:
        if (e.min_version < 0 || e.max_version < e.min_version || e.max_version > e.step) {
          bad("batch versions out of range", i);
        }
        rep.staleness_series.push_back(e.step - e.min_version);
        rep.rollouts_consumed += e.count;
        break;
      case EventKind::kRolloutDelivered:
        ++rep.rollouts_generated;
        if (e.count == 0) ++rep.rollouts_rejected;
        break;
      case EventKind::kEvict:
        rep.rollouts_evicted += e.count;
        break;
      case EventKind::kActivate:
        if (active_since.count(e.worker)) bad("worker activated twice", i);
        active_since[e.worker] = e.time_s;
        break;
      case EventKind::kRelease: {
        auto it = active_since.find(e.worker);
        if (it == active_since.end()) bad("release of an inactive worker", i);
        active_seconds[e.worker] += e.time_s - it->second;
        active_since.erase(it);
        break;
      }
      case EventKind::kPublish:
        publications[e.version] = {e.time_s, active_since.size()};
        break;
      case EventKind::kInstall:
        installs[e.version].push_back(e.time_s);
        break;
      case EventKind::kChunkForward:
        break;
      case EventKind::kRunEnd:
        if (i + 1 != ev.size()) bad("run_end before the end of the trace", i);
        break;
    }
  }
  if (step_open) train.emplace_back(*step_open, end);
  if (idle_open) idle.emplace_back(*idle_open, end);
  for (const auto& [id, since] : active_since) active_seconds[id] += end - since;

  const double lo = window_start.value_or(0.0);
  for (const auto& [a, b] : idle) rep.idle_time_s += clipped(a, b, lo, end);
  for (const auto& [a, b] : train) rep.train_time_s += clipped(a, b, lo, end);
  rep.bubble_ratio = rep.train_time_s > 0.0 ? rep.idle_time_s / (rep.idle_time_s + rep.train_time_s)
                                            : 1.0;

  for (const auto s : rep.staleness_series) rep.delta_max = std::max(rep.delta_max, s);

  for (const auto& [v, pub] : publications) {
    if (pub.second == 0) continue;
    std::vector<double> offsets;
    for (const double t : installs[v]) offsets.push_back(t - pub.first);
    const double tb = broadcast::measure_t_bcast(offsets, ctx.q, pub.second);
    if (std::isfinite(tb)) rep.t_bcast_per_publication.push_back(tb);
  }
  if (!rep.t_bcast_per_publication.empty()) {
    rep.t_bcast_observed = std::accumulate(rep.t_bcast_per_publication.begin(),
                                           rep.t_bcast_per_publication.end(), 0.0) /
                           static_cast<double>(rep.t_bcast_per_publication.size());
  }

  for (const auto& [id, seconds] : active_seconds) {
    auto it = ctx.worker_cost_per_hour.find(id);
    if (it != ctx.worker_cost_per_hour.end()) rep.total_cost += it->second * seconds / 3600.0;
  }
  rep.total_cost += ctx.learner_cost_per_hour * end / 3600.0;
  return rep;
}

}  // namespace bsrl::sim
