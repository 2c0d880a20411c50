"""Python bindings for the bsrl core library."""

from ._bsrl import (
    BsrlError,
    CapacityResult,
    PlannerInputs,
    ProvisionResult,
    RunConfig,
    StalenessBounds,
    WorkerSpec,
    choose_kappa,
    clipped_surrogate,
    compute_masks,
    compute_mu_min,
    dataplane_check,
    disseminate,
    dollar_cost,
    greedy_provision,
    load_config,
    normalize_group,
    overlap_holds,
    parse_config,
    plan,
    run_cli,
    simulate,
    staleness_bounds,
    sweep,
    trajectory_weight,
)

__all__ = [
    "BsrlError",
    "CapacityResult",
    "PlannerInputs",
    "ProvisionResult",
    "RunConfig",
    "StalenessBounds",
    "WorkerSpec",
    "choose_kappa",
    "clipped_surrogate",
    "compute_masks",
    "compute_mu_min",
    "dataplane_check",
    "disseminate",
    "dollar_cost",
    "greedy_provision",
    "load_config",
    "normalize_group",
    "overlap_holds",
    "parse_config",
    "plan",
    "run_cli",
    "simulate",
    "staleness_bounds",
    "sweep",
    "trajectory_weight",
]

__version__ = "0.1.0"
