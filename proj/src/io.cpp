// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include "bsrl/io.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsrl/error.hpp"

namespace bsrl::io {

namespace {

template <typename T>
T parse_number(std::string_view text, std::size_t line) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    raise(ErrorCode::kSchema, fmt::format("trace line {}: bad number '{}'", line, text));
  }
  return value;
}

double parse_double(std::string_view text, std::size_t line) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  return parse_number<double>(text, line);
}

nlohmann::ordered_json finite_or_null(double x) {
  return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
}

}  // namespace

void write_csv_preamble(std::ostream& out, const std::string& kind, const CsvOptions& options) {
  out << fmt::format("# bsrl {} schema={}\n", kind, kSchemaVersion);
  if (options.timestamp) {
    const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    out << fmt::format("# generated {:%Y-%m-%dT%H:%M:%SZ}\n", now);
  }
}

std::string_view trace_csv_header() {
  return "time_s,kind,step,version,worker,count,min_version,max_version";
}

void write_trace_csv(std::ostream& out, const sim::SimTrace& trace, const CsvOptions& options) {
  write_csv_preamble(out, "trace", options);
  out << trace_csv_header() << '\n';
  for (const auto& e : trace.events) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", e.time_s, sim::to_string(e.kind), e.step,
                       e.version, e.worker, e.count, e.min_version, e.max_version);
  }
}

sim::SimTrace read_trace_csv(std::istream& in) {
  sim::SimTrace trace;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != trace_csv_header()) {
        raise(ErrorCode::kSchema, fmt::format("trace line {}: unexpected header '{}'", lineno, line));
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      cols.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cols.size() != 8) {
      raise(ErrorCode::kSchema, fmt::format("trace line {}: expected 8 columns, got {}", lineno, cols.size()));
    }
    sim::TraceEvent e;
    e.time_s = parse_double(cols[0], lineno);
    try {
      e.kind = sim::event_kind_from_string(cols[1]);
    } catch (const Error&) {
      raise(ErrorCode::kSchema, fmt::format("trace line {}: unknown event kind '{}'", lineno, cols[1]));
    }
    e.step = parse_number<std::int64_t>(cols[2], lineno);
    e.version = parse_number<Version>(cols[3], lineno);
    e.worker = std::string(cols[4]);
    e.count = parse_number<std::int64_t>(cols[5], lineno);
    e.min_version = parse_number<Version>(cols[6], lineno);
    e.max_version = parse_number<Version>(cols[7], lineno);
    trace.events.push_back(std::move(e));
  }
  if (!header_seen) raise(ErrorCode::kSchema, "trace has no header line");
  return trace;
}

nlohmann::ordered_json to_json(const sim::RunReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["bubble_ratio"] = r.bubble_ratio;
  j["delta_max"] = r.delta_max;
  j["staleness_series"] = r.staleness_series;
  j["t_bcast_observed"] = finite_or_null(r.t_bcast_observed);
  auto per = nlohmann::ordered_json::array();
  for (double t : r.t_bcast_per_publication) per.push_back(finite_or_null(t));
  j["t_bcast_per_publication"] = per;
  j["total_cost"] = r.total_cost;
  j["rollouts_generated"] = r.rollouts_generated;
  j["rollouts_consumed"] = r.rollouts_consumed;
  j["rollouts_evicted"] = r.rollouts_evicted;
  j["rollouts_rejected"] = r.rollouts_rejected;
  j["steps_completed"] = r.steps_completed;
  j["idle_time_s"] = r.idle_time_s;
  j["train_time_s"] = r.train_time_s;
  j["sim_time_s"] = r.sim_time_s;
  return j;
}

nlohmann::ordered_json to_json(const planner::PlannerInputs& in) {
  return {{"t_train_seconds", in.t_train},
          {"t_bcast_seconds", in.t_bcast},
          {"rollouts_per_step", in.rollouts_per_step},
          {"kappa", in.kappa},
          {"staleness_budget", in.staleness_budget},
          {"safety_factor", in.safety_factor}};
}

nlohmann::ordered_json to_json(const broadcast::BroadcastPlan& plan) {
  nlohmann::ordered_json j;
  j["strategy"] = broadcast::to_string(plan.strategy);
  j["stripe_bytes"] = plan.stripe_bytes;
  j["max_depth"] = plan.max_depth();
  auto stripes = nlohmann::ordered_json::array();
  for (const auto& s : plan.stripes) {
    stripes.push_back({{"index", s.index}, {"offset", s.offset}, {"bytes", s.bytes}, {"chain", s.chain}});
  }
  j["stripes"] = stripes;
  return j;
}

nlohmann::ordered_json to_json(const broadcast::BroadcastOutcome& o) {
  nlohmann::ordered_json installs = nlohmann::ordered_json::object();
  for (const auto& [id, t] : o.per_worker_install_time_s) installs[id] = finite_or_null(t);
  return {{"t_bcast_s", finite_or_null(o.t_bcast_s)},
          {"bytes_sent_by_learner", o.bytes_sent_by_learner},
          {"per_worker_install_time_s", installs}};
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) raise(ErrorCode::kIo, "failed writing '" + path + "'");
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec || !std::filesystem::is_directory(path)) {
    raise(ErrorCode::kIo, "cannot create directory '" + path + "'" + (ec ? ": " + ec.message() : ""));
  }
}

}  // namespace bsrl::io
