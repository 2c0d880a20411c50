// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "bsrl/cli.hpp"
#include "bsrl/config.hpp"
#include "bsrl/dataplane.hpp"
#include "bsrl/dataplane_check.hpp"
#include "bsrl/io.hpp"
#include "bsrl/planner.hpp"
#include "bsrl/scheduler.hpp"
#include "bsrl/sim.hpp"

namespace py = pybind11;
using namespace bsrl;

namespace {

py::object to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_bsrl, m) {
  m.doc() = "Capacity planning, dissemination, simulation and GRPO data-plane kernels";

  static py::exception<Error> error(m, "BsrlError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  // Planner.
  py::class_<planner::PlannerInputs>(m, "PlannerInputs")
      .def(py::init<>())
      .def(py::init([](double t_train, double t_bcast, std::int64_t r, int kappa, int s, double gamma) {
             planner::PlannerInputs in{t_train, t_bcast, r, kappa, s, gamma};
             in.validate();
             return in;
           }),
           py::arg("t_train"), py::arg("t_bcast"), py::arg("rollouts_per_step"), py::arg("kappa") = 2,
           py::arg("staleness_budget") = 3, py::arg("safety_factor") = 1.1)
      .def_readwrite("t_train", &planner::PlannerInputs::t_train)
      .def_readwrite("t_bcast", &planner::PlannerInputs::t_bcast)
      .def_readwrite("rollouts_per_step", &planner::PlannerInputs::rollouts_per_step)
      .def_readwrite("kappa", &planner::PlannerInputs::kappa)
      .def_readwrite("staleness_budget", &planner::PlannerInputs::staleness_budget)
      .def_readwrite("safety_factor", &planner::PlannerInputs::safety_factor)
      .def("validate", &planner::PlannerInputs::validate);

  py::class_<planner::CapacityResult>(m, "CapacityResult")
      .def_readonly("mu_min", &planner::CapacityResult::mu_min)
      .def_readonly("mu_target", &planner::CapacityResult::mu_target)
      .def_readonly("feasible", &planner::CapacityResult::feasible);

  py::class_<planner::StalenessBounds>(m, "StalenessBounds")
      .def_readonly("baseline", &planner::StalenessBounds::baseline)
      .def_readonly("tightened", &planner::StalenessBounds::tightened)
      .def_readonly("satisfies_budget", &planner::StalenessBounds::satisfies_budget);

  m.def("compute_mu_min", &planner::compute_mu_min);
  m.def("overlap_holds", &planner::overlap_holds);
  m.def("choose_kappa", &planner::choose_kappa);
  m.def("staleness_bounds", &planner::staleness_bounds);

  // Scheduler.
  py::class_<WorkerSpec>(m, "WorkerSpec")
      .def(py::init([](std::string id, double mu, double cost, double link, std::string gpu) {
             WorkerSpec w{std::move(id), mu, cost, link, std::move(gpu)};
             w.validate();
             return w;
           }),
           py::arg("id"), py::arg("mu"), py::arg("cost_per_hour") = 0.0, py::arg("link_bytes_per_s") = 0.0,
           py::arg("gpu_class") = "")
      .def_readwrite("id", &WorkerSpec::id)
      .def_readwrite("mu", &WorkerSpec::mu)
      .def_readwrite("cost_per_hour", &WorkerSpec::cost_per_hour)
      .def_readwrite("link_bytes_per_s", &WorkerSpec::link_bytes_per_s)
      .def_readwrite("gpu_class", &WorkerSpec::gpu_class);

  py::class_<scheduler::ProvisionResult>(m, "ProvisionResult")
      .def_readonly("active", &scheduler::ProvisionResult::active)
      .def_readonly("total_mu", &scheduler::ProvisionResult::total_mu)
      .def_readonly("total_cost_per_hour", &scheduler::ProvisionResult::total_cost_per_hour)
      .def_readonly("feasible", &scheduler::ProvisionResult::feasible)
      .def_readonly("shortfall", &scheduler::ProvisionResult::shortfall);

  m.def("greedy_provision", [](const std::vector<WorkerSpec>& w, double mu) {
    return scheduler::greedy_provision(w, mu);
  });

  m.def(
      "dollar_cost",
      [](const std::vector<std::pair<std::string, double>>& usage,
         std::optional<std::map<std::string, double>> prices) {
        scheduler::PriceTable table = scheduler::PriceTable::defaults();
        if (prices) table.price_per_gpu_hour = *prices;
        std::vector<scheduler::GpuUsage> u;
        for (const auto& [gpu, hours] : usage) u.push_back({gpu, hours});
        return scheduler::dollar_cost(u, table);
      },
      py::arg("usage"), py::arg("prices") = py::none());

  // Broadcast.
  m.def(
      "disseminate",
      [](const std::string& strategy, const std::vector<WorkerSpec>& workers, std::int64_t snapshot_bytes,
         double uplink_bytes_per_s, double worker_link_bytes_per_s, std::int64_t chunk_bytes, double latency,
         double q, bool event_driven) {
        broadcast::NetworkConfig net{uplink_bytes_per_s, worker_link_bytes_per_s, chunk_bytes, latency};
        const broadcast::PolicySnapshot snap{1, snapshot_bytes, 0};
        const auto plan = broadcast::plan_broadcast(broadcast::strategy_from_string(strategy), workers, net, snap);
        const auto outcome = event_driven ? broadcast::run_event_driven(plan, net, snap, q)
                                          : broadcast::simulate_dissemination(plan, net, snap, q);
        nlohmann::ordered_json j;
        j["plan"] = io::to_json(plan);
        j["outcome"] = io::to_json(outcome);
        return to_py(j);
      },
      py::arg("strategy"), py::arg("workers"), py::arg("snapshot_bytes"),
      py::arg("uplink_bytes_per_s") = broadcast::kUnlimited, py::arg("worker_link_bytes_per_s") = 0.0,
      py::arg("chunk_bytes") = broadcast::kDefaultChunkBytes, py::arg("latency_per_hop_s") = 0.0,
      py::arg("q") = 1.0, py::arg("event_driven") = false);

  // Configs, simulation and sweeps.
  py::class_<config::RunConfig>(m, "RunConfig")
      .def_property_readonly("source", [](const config::RunConfig& c) { return c.source; })
      .def_property("seed", [](const config::RunConfig& c) { return c.sim.rng_seed; },
                    [](config::RunConfig& c, std::uint64_t s) { c.sim.rng_seed = s; })
      .def_property("worst_case", [](const config::RunConfig& c) { return c.sim.worst_case; },
                    [](config::RunConfig& c, bool w) { c.sim.worst_case = w; })
      .def_property("total_steps", [](const config::RunConfig& c) { return c.sim.total_steps; },
                    [](config::RunConfig& c, std::int64_t n) { c.sim.total_steps = n; })
      .def_property_readonly("planner", [](const config::RunConfig& c) { return c.planner; })
      .def_property_readonly("workers", [](const config::RunConfig& c) { return c.sim.workers; });

  m.def("parse_config", &config::parse_config, py::arg("text"), py::arg("source") = "<config>");
  m.def("load_config", &config::load_config);
  m.def("plan", [](const config::RunConfig& c) { return to_py(cli::plan_json(c)); });
  m.def(
      "simulate",
      [](const config::RunConfig& c, bool timestamp) {
        const auto result = sim::run(c.to_sim_config());
        std::ostringstream trace;
        io::write_trace_csv(trace, result.trace, {timestamp});
        return py::make_tuple(to_py(io::to_json(result.report)), trace.str());
      },
      py::arg("config"), py::arg("timestamp") = false,
      "Runs the simulator; returns (report dict, trace CSV text).");
  m.def(
      "sweep",
      [](const config::RunConfig& c, const std::string& axis, const std::vector<double>& values) {
        return cli::sweep_csv(c, cli::sweep_axis_from_string(axis), values, {false});
      },
      py::arg("config"), py::arg("axis"), py::arg("values"));

  // Dataplane.
  m.def(
      "compute_masks",
      [](const std::vector<TokenId>& tokens, double score) {
        const dataplane::TokenizedEpisode t{tokens, std::vector<std::uint8_t>(tokens.size(), 1),
                                            dataplane::kTurnStartId};
        const auto masks = dataplane::compute_masks(t, score);
        return py::dict(py::arg("response_mask") = masks.response_mask, py::arg("loss_mask") = masks.loss_mask,
                        py::arg("score_vector") = masks.score_vector);
      },
      py::arg("token_ids"), py::arg("score") = 0.0);
  m.def(
      "normalize_group",
      [](const std::vector<double>& r, const std::vector<std::string>& tags, double eps, const std::string& g) {
        if (g != "state" && g != "batch") throw Error(ErrorCode::kConfig, "config error: grouping must be state or batch");
        return dataplane::normalize_group(r, tags, eps,
                                          g == "state" ? dataplane::Grouping::kState : dataplane::Grouping::kBatch);
      },
      py::arg("returns"), py::arg("group_tags"), py::arg("eps") = 1e-6, py::arg("grouping") = "state");
  m.def("clipped_surrogate", &dataplane::clipped_surrogate, py::arg("rho"), py::arg("advantage"),
        py::arg("clip_eps") = 0.2);
  m.def("trajectory_weight", &dataplane::trajectory_weight, py::arg("logp_old"), py::arg("logp_sampler"),
        py::arg("mask"), py::arg("trunc_c"));
  m.def(
      "dataplane_check",
      [](std::optional<std::string> golden, std::uint64_t seed) {
        dataplane::CheckOptions opts;
        opts.seed = seed;
        opts.golden_path = golden;
        py::list out;
        for (const auto& r : dataplane::run_dataplane_check(opts)) {
          out.append(py::dict(py::arg("name") = r.name, py::arg("passed") = r.passed, py::arg("detail") = r.detail));
        }
        return out;
      },
      py::arg("golden") = py::none(), py::arg("seed") = 1);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"bsrl"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line in-process; returns (exit code, stdout, stderr).");
}
