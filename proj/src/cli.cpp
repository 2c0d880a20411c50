// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/cli.hpp"

#include <fmt/format.h>

#include <cmath>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "bsrl/dataplane_check.hpp"
#include "bsrl/error.hpp"

namespace bsrl::cli {

namespace {

std::int64_t as_count(double v, const char* what, std::int64_t min) {
  if (!(v >= static_cast<double>(min)) || v != std::floor(v) || v > 1e9) {
    raise(ErrorCode::kConfig, fmt::format("{} values must be integers >= {}, got {}", what, min, v));
  }
  return static_cast<std::int64_t>(v);
}

WorkerSpec template_worker(const sim::SimConfig& cfg) {
  if (cfg.workers.empty()) raise(ErrorCode::kConfig, "this sweep needs at least one worker as a template");
  return cfg.workers.front();
}

std::string pool_size_rows(const config::RunConfig& cfg, const std::vector<double>& values) {
  const auto base = cfg.to_sim_config();
  std::vector<std::int64_t> sizes;
  for (double v : values) sizes.push_back(as_count(v, "pool_size", 0));
  template_worker(base);
  const auto mu_min = planner::compute_mu_min(base.planner);
  std::string out = "size,pool_mu,mu_min,bubble_ratio,delta_max\n";
  for (const auto& row : sim::sweep_pool_size(base, sizes)) {
    out += fmt::format("{},{},{},{},{}\n", row.size, row.pool_mu, mu_min.mu_min, row.bubble_ratio,
                       row.delta_max);
  }
  return out;
}

std::string staleness_rows(const config::RunConfig& cfg, const std::vector<double>& values) {
  std::string out = "staleness_budget,kappa,mu_min,pool_mu,bubble_ratio,delta_max,baseline_bound\n";
  for (double v : values) {
    auto sc = cfg.to_sim_config();
    sc.planner.staleness_budget = static_cast<int>(as_count(v, "staleness", 3));
    sc.planner.kappa = planner::choose_kappa(sc.planner.staleness_budget);
    sc.validate();
    const auto cap = planner::compute_mu_min(sc.planner);
    const auto report = sim::run(sc).report;
    const double pool = sc.pool_mu();
    const int bound = pool > 0.0 ? planner::staleness_bound_baseline(sc.planner, pool) : -1;
    out += fmt::format("{},{},{},{},{},{},{}\n", sc.planner.staleness_budget, sc.planner.kappa,
                       cap.mu_min, pool, report.bubble_ratio, report.delta_max, bound);
  }
  return out;
}

std::string fleet_broadcast_rows(const config::RunConfig& cfg, const std::vector<double>& values) {
  const auto& sc = cfg.sim;
  if (sc.snapshot_bytes <= 0) raise(ErrorCode::kConfig, "fleet_broadcast sweep needs a snapshot size");
  if (!std::isfinite(sc.net.learner_uplink_bytes_per_s)) {
    raise(ErrorCode::kConfig, "fleet_broadcast sweep needs a finite learner uplink");
  }
  const WorkerSpec tmpl = sc.workers.empty() ? WorkerSpec{"w", 1.0} : template_worker(sc);
  const double bw = tmpl.link_bytes_per_s > 0.0 ? tmpl.link_bytes_per_s : sc.net.worker_link_bytes_per_s;
  const double q = cfg.planner ? sc.q() : 1.0;
  const broadcast::PolicySnapshot snap{1, sc.snapshot_bytes, 0};
  std::string out = "strategy,fleet_size,B0,Bw,t_bcast_s\n";
  for (double v : values) {
    const auto n = as_count(v, "fleet_broadcast", 1);
    std::vector<WorkerSpec> fleet;
    for (std::int64_t i = 0; i < n; ++i) {
      WorkerSpec w = tmpl;
      w.id = "w" + std::to_string(i);
      fleet.push_back(std::move(w));
    }
    for (auto strategy : {broadcast::Strategy::kStarUnlimited, broadcast::Strategy::kStarLimited,
                          broadcast::Strategy::kTreePipelined}) {
      auto net = sc.net;
      if (strategy == broadcast::Strategy::kStarUnlimited) net.learner_uplink_bytes_per_s = broadcast::kUnlimited;
      const auto plan = broadcast::plan_broadcast(strategy, fleet, net, snap);
      const auto outcome = broadcast::simulate_dissemination(plan, net, snap, q);
      out += fmt::format("{},{},{},{},{}\n", broadcast::to_string(strategy), n,
                         net.learner_uplink_bytes_per_s / config::kMbps, bw / config::kMbps,
                         outcome.t_bcast_s);
    }
  }
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) raise(ErrorCode::kConfig, "bad sweep value '" + item + "'");
    values.push_back(v);
  }
  return values;
}

int report_error(const Error& e, std::ostream& err) {
  err << "bsrl: " << e.what() << '\n';
  return exit_code_for(e.code());
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kSchema:
    case ErrorCode::kPricing:
    case ErrorCode::kRegistration:
      return kExitValidation;
    case ErrorCode::kIo:
      return kExitIo;
    default:
      return kExitFailed;
  }
}

nlohmann::ordered_json plan_json(const config::RunConfig& cfg) {
  const auto& in = cfg.require_planner();
  const auto cap = planner::compute_mu_min(in);
  nlohmann::ordered_json j;
  j["schema_version"] = io::kSchemaVersion;
  j["planner"] = io::to_json(in);
  j["capacity"] = {{"feasible", cap.feasible},
                   {"mu_min", cap.feasible ? nlohmann::ordered_json(cap.mu_min) : nullptr},
                   {"mu_target", cap.feasible ? nlohmann::ordered_json(cap.mu_target) : nullptr}};

  std::optional<double> pool;
  if (!cfg.sim.workers.empty()) {
    double total = 0.0;
    for (const auto& w : cfg.sim.workers) total += w.mu;
    pool = total;
  } else if (cap.feasible) {
    pool = cap.mu_target;
  }
  j["pool_mu"] = pool ? nlohmann::ordered_json(*pool) : nullptr;
  if (pool && *pool > 0.0) {
    const auto b = planner::staleness_bounds(in, *pool);
    j["overlap_holds"] = planner::overlap_holds(in, *pool);
    j["staleness"] = {{"baseline", b.baseline},
                      {"tightened", b.tightened},
                      {"satisfies_budget", b.satisfies_budget}};
  } else {
    j["overlap_holds"] = false;
    j["staleness"] = nullptr;
  }
  if (cap.feasible && !cfg.sim.workers.empty()) {
    const auto p = scheduler::greedy_provision(cfg.sim.workers, cap.mu_target);
    j["provision"] = {{"feasible", p.feasible},
                      {"active", p.active},
                      {"total_mu", p.total_mu},
                      {"cost_per_hour", p.total_cost_per_hour},
                      {"shortfall", p.shortfall}};
  } else {
    j["provision"] = nullptr;
  }
  return j;
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "pool_size") return SweepAxis::kPoolSize;
  if (name == "staleness") return SweepAxis::kStaleness;
  if (name == "fleet_broadcast") return SweepAxis::kFleetBroadcast;
  raise(ErrorCode::kConfig, "unknown sweep axis '" + name + "' (pool_size, staleness, fleet_broadcast)");
}

std::string sweep_csv(const config::RunConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                      const io::CsvOptions& options) {
  if (values.empty()) raise(ErrorCode::kConfig, "sweep needs at least one value");
  std::ostringstream out;
  std::string rows;
  switch (axis) {
    case SweepAxis::kPoolSize:
      io::write_csv_preamble(out, "sweep pool_size", options);
      rows = pool_size_rows(cfg, values);
      break;
    case SweepAxis::kStaleness:
      io::write_csv_preamble(out, "sweep staleness", options);
      rows = staleness_rows(cfg, values);
      break;
    case SweepAxis::kFleetBroadcast:
      io::write_csv_preamble(out, "sweep fleet_broadcast", options);
      rows = fleet_broadcast_rows(cfg, values);
      break;
  }
  out << rows;
  return out.str();
}

sim::RunReport simulate_to_dir(const config::RunConfig& cfg, const std::string& out_dir,
                               const io::CsvOptions& options) {
  const auto sc = cfg.to_sim_config();
  const auto result = sim::run(sc);
  io::ensure_directory(out_dir);

  std::ostringstream trace;
  io::write_trace_csv(trace, result.trace, options);
  io::write_file(out_dir + "/trace.csv", trace.str());

  auto j = io::to_json(result.report);
  j["seed"] = sc.rng_seed;
  j["worst_case"] = sc.worst_case;
  const double pool = sc.pool_mu();
  j["staleness_bound_baseline"] =
      pool > 0.0 ? nlohmann::ordered_json(planner::staleness_bound_baseline(sc.planner, pool)) : nullptr;
  io::write_file(out_dir + "/report.json", j.dump(2) + "\n");
  return result.report;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"bsrl: capacity planning and simulation for asynchronous RL"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  bool worst_case = false;
  bool no_timestamp = false;
  std::string axis = "pool_size";
  std::string values_text;
  std::string golden;

  auto* plan = app.add_subcommand("plan", "Print capacity and staleness bounds as JSON");
  plan->add_option("--config", config_path, "YAML run config")->required();
  plan->add_option("--out", out_path, "Write JSON here instead of stdout");

  auto* simulate = app.add_subcommand("simulate", "Run the simulator; writes trace.csv and report.json");
  simulate->add_option("--config", config_path, "YAML run config")->required();
  simulate->add_option("--out", out_path, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Sweep one axis and write a CSV table");
  sweep->add_option("--config", config_path, "YAML run config")->required();
  sweep->add_option("--axis", axis, "pool_size | staleness | fleet_broadcast");
  sweep->add_option("--values", values_text, "Comma separated values");
  sweep->add_option("--out", out_path, "Output CSV (stdout when omitted)");

  auto* check = app.add_subcommand("dataplane-check", "Run the dataplane self-check");
  check->add_option("--golden", golden, "Golden fixture JSON");
  check->add_option("--out", out_path, "Write results as JSON");

  for (auto* sub : {simulate, sweep, check}) {
    sub->add_option("--seed", seed, "RNG seed override");
  }
  for (auto* sub : {simulate, sweep}) {
    sub->add_flag("--worst-case", worst_case, "Conservative install and sampling model");
    sub->add_flag("--no-timestamp", no_timestamp, "Omit the timestamp line from CSV output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "bsrl: " << e.what() << '\n';
    return kExitValidation;
  }

  const io::CsvOptions csv{!no_timestamp};
  try {
    auto load = [&] {
      auto cfg = config::load_config(config_path);
      if (seed) cfg.sim.rng_seed = *seed;
      if (worst_case) cfg.sim.worst_case = true;
      return cfg;
    };

    if (plan->parsed()) {
      const auto text = plan_json(load()).dump(2) + "\n";
      if (out_path.empty()) {
        out << text;
      } else {
        io::write_file(out_path, text);
      }
      return kExitOk;
    }
    if (simulate->parsed()) {
      const auto report = simulate_to_dir(load(), out_path, csv);
      out << fmt::format("bubble_ratio={} delta_max={} steps={} t_bcast={}\n", report.bubble_ratio,
                         report.delta_max, report.steps_completed, report.t_bcast_observed);
      return kExitOk;
    }
    if (sweep->parsed()) {
      const auto parsed_axis = sweep_axis_from_string(axis);
      const auto values = parse_values(values_text);
      const auto text = sweep_csv(load(), parsed_axis, values, csv);
      if (out_path.empty()) {
        out << text;
      } else {
        io::write_file(out_path, text);
      }
      return kExitOk;
    }
    if (check->parsed()) {
      dataplane::CheckOptions opts;
      if (seed) opts.seed = *seed;
      if (!golden.empty()) opts.golden_path = golden;
      bool ok = true;
      auto results = nlohmann::ordered_json::array();
      for (const auto& r : dataplane::run_dataplane_check(opts)) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        results.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
        ok = ok && r.passed;
      }
      if (!out_path.empty()) io::write_file(out_path, results.dump(2) + "\n");
      return ok ? kExitOk : kExitFailed;
    }
  } catch (const Error& e) {
    return report_error(e, err);
  }
  return kExitValidation;
}

}  // namespace bsrl::cli
