// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/config.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bsrl/error.hpp"

namespace bsrl::config {

namespace {

class Section {
 public:
  Section(YAML::Node node, std::string name, const std::string& source)
      : node_(std::move(node)), name_(std::move(name)), source_(source) {
    if (!node_.IsMap()) fail(node_, "section '" + name_ + "' must be a mapping");
  }

  bool has(const char* key) const { return static_cast<bool>(node_[key]); }

  YAML::Node raw(const char* key) {
    seen_.insert(key);
    return node_[key];
  }

  template <typename T>
  std::optional<T> get(const char* key) {
    seen_.insert(key);
    const YAML::Node v = node_[key];
    if (!v) return std::nullopt;
    try {
      return v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, fmt::format("'{}.{}' has the wrong type", name_, key));
    }
  }

  template <typename T>
  T get_or(const char* key, T fallback) {
    return get<T>(key).value_or(fallback);
  }

  /// Rejects any key that no accessor asked for.
  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(kv.first, fmt::format("unknown key '{}' in '{}'", key, name_));
    }
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& what) const {
    const auto m = at.Mark();
    raise(ErrorCode::kConfig, fmt::format("{}:{}:{}: {}", source_, m.line + 1, m.column + 1, what));
  }

  const YAML::Node& node() const { return node_; }

 private:
  YAML::Node node_;
  std::string name_;
  const std::string& source_;
  std::set<std::string> seen_;
};

// Runs `f`; a bsrl::Error from validation is re-raised with the section's position.
template <typename F>
void validate_at(const Section& s, const std::string& what, F f) {
  try {
    f();
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(e.code())) + " error: ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    s.fail(s.node(), what + ": " + msg);
  }
}

planner::PlannerInputs parse_planner(Section s) {
  planner::PlannerInputs p;
  const auto t = s.get<double>("t_train_seconds");
  const auto r = s.get<std::int64_t>("rollouts_per_step");
  p.t_bcast = s.get_or("t_bcast_seconds", 0.0);
  p.staleness_budget = s.get_or("staleness_budget", 3);
  p.kappa = s.get_or("kappa", p.staleness_budget - 1);
  p.safety_factor = s.get_or("safety_factor", 1.1);
  s.finish();
  if (!t) s.fail(s.node(), "planner.t_train_seconds is required");
  if (!r) s.fail(s.node(), "planner.rollouts_per_step is required");
  p.t_train = *t;
  p.rollouts_per_step = *r;
  validate_at(s, "invalid planner", [&] { p.validate(); });
  return p;
}

void parse_prices(const YAML::Node& node, const std::string& source, scheduler::PriceTable& prices) {
  Section s(node, "prices_per_hour", source);
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    const auto v = s.get<double>(key.c_str());
    if (!(*v >= 0.0)) s.fail(kv.second, "price for '" + key + "' must be >= 0");
    prices.price_per_gpu_hour[key] = *v;
  }
}

void parse_workers(const YAML::Node& node, const std::string& source,
                   const scheduler::PriceTable& prices, std::vector<WorkerSpec>& out) {
  if (!node.IsSequence()) {
    const auto m = node.Mark();
    raise(ErrorCode::kConfig, fmt::format("{}:{}:{}: 'workers' must be a list", source, m.line + 1,
                                          m.column + 1));
  }
  for (const auto& item : node) {
    Section s(item, "workers[]", source);
    WorkerSpec w;
    const auto id = s.get<std::string>("id");
    const auto mu = s.get<double>("rollouts_per_second");
    const auto cost = s.get<double>("cost_per_hour");
    const auto link = s.get<double>("link_mbps");
    const auto count = s.get_or<std::int64_t>("count", 1);
    w.gpu_class = s.get_or<std::string>("gpu_class", "");
    s.finish();
    if (!id) s.fail(item, "worker needs an 'id'");
    if (!mu) s.fail(item, "worker needs 'rollouts_per_second'");
    w.mu = *mu;
    if (cost) {
      w.cost_per_hour = *cost;
    } else if (!w.gpu_class.empty()) {
      auto it = prices.price_per_gpu_hour.find(w.gpu_class);
      if (it == prices.price_per_gpu_hour.end()) s.fail(item, "no price for gpu_class '" + w.gpu_class + "'");
      w.cost_per_hour = it->second;
    }
    if (link) w.link_bytes_per_s = *link * kMbps;
    if (count < 1) s.fail(item, "worker count must be >= 1");
    for (std::int64_t k = 0; k < count; ++k) {
      WorkerSpec copy = w;
      copy.id = count == 1 ? *id : fmt::format("{}-{}", *id, k);
      validate_at(s, "invalid worker", [&] { copy.validate(); });
      out.push_back(std::move(copy));
    }
  }
}

void parse_network(Section s, broadcast::NetworkConfig& net) {
  if (auto up = s.raw("learner_uplink_mbps")) {
    if (up.IsScalar() && up.Scalar() == "unlimited") {
      net.learner_uplink_bytes_per_s = broadcast::kUnlimited;
    } else {
      net.learner_uplink_bytes_per_s = *s.get<double>("learner_uplink_mbps") * kMbps;
    }
  }
  if (auto w = s.get<double>("worker_link_mbps")) net.worker_link_bytes_per_s = *w * kMbps;
  if (auto c = s.get<double>("chunk_mb")) net.chunk_bytes = static_cast<std::int64_t>(std::llround(*c * kMB));
  net.latency_per_hop_s = s.get_or("latency_per_hop_seconds", 0.0);
  s.finish();
}

void parse_broadcast(Section s, sim::SimConfig& cfg) {
  if (auto name = s.get<std::string>("strategy")) {
    validate_at(s, "invalid broadcast", [&] { cfg.strategy = broadcast::strategy_from_string(*name); });
  }
  const auto gb = s.get<double>("snapshot_gb");
  const auto mb = s.get<double>("snapshot_mb");
  if (gb && mb) s.fail(s.node(), "give snapshot_gb or snapshot_mb, not both");
  const double bytes = gb ? *gb * kGB : mb ? *mb * kMB : 0.0;
  if (!(bytes >= 0.0)) s.fail(s.node(), "snapshot size must be >= 0");
  cfg.snapshot_bytes = static_cast<std::int64_t>(std::llround(bytes));
  s.finish();
}

void parse_sim(Section s, const scheduler::PriceTable& prices, sim::SimConfig& cfg) {
  cfg.total_steps = s.get_or<std::int64_t>("total_steps", cfg.total_steps);
  cfg.rng_seed = s.get_or<std::uint64_t>("seed", cfg.rng_seed);
  cfg.rollout_jitter = s.get_or("rollout_jitter_cv", 0.0);
  const auto order = s.get_or<std::string>("sample_order", "oldest_first");
  if (order == "oldest_first") {
    cfg.sample_order = buffer::SampleOrder::kOldestFirst;
  } else if (order == "newest_first") {
    cfg.sample_order = buffer::SampleOrder::kNewestFirst;
  } else {
    s.fail(s.node()["sample_order"], "sample_order must be oldest_first or newest_first");
  }
  cfg.worst_case = s.get_or("worst_case", false);
  cfg.generate_during_dissemination = s.get_or("generate_during_dissemination", false);
  cfg.install_fraction = s.get<double>("install_fraction");
  cfg.warmup_steps = s.get<std::int64_t>("warmup_steps");
  cfg.autoscale = s.get_or("autoscale", false);
  cfg.chunk_events = s.get_or("chunk_events", false);
  const auto cost = s.get<double>("learner_cost_per_hour");
  const auto gpu = s.get<std::string>("learner_gpu_class");
  if (cost && gpu) s.fail(s.node(), "give learner_cost_per_hour or learner_gpu_class, not both");
  if (cost) cfg.learner_cost_per_hour = *cost;
  if (gpu) {
    auto it = prices.price_per_gpu_hour.find(*gpu);
    if (it == prices.price_per_gpu_hour.end()) s.fail(s.node(), "no price for learner_gpu_class '" + *gpu + "'");
    cfg.learner_cost_per_hour = it->second;
  }
  cfg.max_time_s = s.get_or("max_time_seconds", 0.0);
  s.raw("control");  // parsed separately
  s.finish();
}

void parse_control(const YAML::Node& node, const std::string& source, scheduler::ControlPolicy& p) {
  Section s(node, "sim.control", source);
  p.window_ticks = s.get_or("window_ticks", p.window_ticks);
  p.release_ratio = s.get_or("release_ratio", p.release_ratio);
  s.finish();
}

void parse_dataplane(Section s, dataplane::GrpoConfig& g) {
  g.clip_eps = s.get_or("clip_eps", g.clip_eps);
  g.kl_coeff = s.get_or("kl_coeff", g.kl_coeff);
  if (auto c = s.raw("trunc_c")) {
    if (!(c.IsScalar() && c.Scalar() == "inf")) g.trunc_c = *s.get<double>("trunc_c");
  }
  g.norm_eps = s.get_or("norm_eps", g.norm_eps);
  const auto grouping = s.get_or<std::string>("grouping", "state");
  if (grouping == "state") {
    g.grouping = dataplane::Grouping::kState;
  } else if (grouping == "batch") {
    g.grouping = dataplane::Grouping::kBatch;
  } else {
    s.fail(s.node()["grouping"], "grouping must be state or batch");
  }
  s.finish();
  validate_at(s, "invalid dataplane", [&] { g.validate(); });
}

}  // namespace

const planner::PlannerInputs& RunConfig::require_planner() const {
  if (!planner) raise(ErrorCode::kConfig, source + ": missing required 'planner' section");
  return *planner;
}

sim::SimConfig RunConfig::to_sim_config() const {
  sim::SimConfig out = sim;
  out.planner = require_planner();
  return out;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    raise(ErrorCode::kConfig, fmt::format("{}:{}:{}: {}", source, e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  RunConfig cfg;
  cfg.source = source;
  cfg.prices = scheduler::PriceTable::defaults();
  if (root.IsNull()) return cfg;
  Section top(root, "<root>", source);

  if (auto v = top.get<int>("schema_version"); v && *v != 1) {
    top.fail(root["schema_version"], fmt::format("unsupported schema_version {}", *v));
  }
  if (auto n = top.raw("prices_per_hour")) parse_prices(n, source, cfg.prices);
  if (auto n = top.raw("planner")) cfg.planner = parse_planner(Section(n, "planner", source));
  if (auto n = top.raw("workers")) parse_workers(n, source, cfg.prices, cfg.sim.workers);
  if (auto n = top.raw("network")) parse_network(Section(n, "network", source), cfg.sim.net);
  if (auto n = top.raw("broadcast")) parse_broadcast(Section(n, "broadcast", source), cfg.sim);
  if (auto n = top.raw("sim")) {
    parse_sim(Section(n, "sim", source), cfg.prices, cfg.sim);
    if (auto c = n["control"]) parse_control(c, source, cfg.sim.control);
  }
  if (auto n = top.raw("dataplane")) parse_dataplane(Section(n, "dataplane", source), cfg.dataplane);
  top.finish();

  if (cfg.planner) {
    validate_at(top, "invalid configuration", [&] { cfg.to_sim_config().validate(); });
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::kIo, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace bsrl::config
