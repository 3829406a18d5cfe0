"""Parameter sweeps with paired analytic and simulated columns."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from femto_handover.analytics import TrafficParams, TrafficSolution, solve_fixed_point
from femto_handover.config import ScenarioConfig
from femto_handover.errors import ConfigurationError
from femto_handover.metrics import Estimate, MetricsReport
from femto_handover.progress import ProgressTracker
from femto_handover.simulator import run as run_simulation

logger = logging.getLogger(__name__)

# short names accepted by --param
ALIASES = {
    "n": "topology.n_faps",
    "alpha": "traffic.alpha",
    "K": "topology.fap_capacity",
    "load": "traffic.total_arrival_rate",
    "density_ratio": "traffic.density_ratio",
}

SOLUTION_COLUMNS = [f.name for f in fields(TrafficSolution)]
SIM_ESTIMATES = ("p_b_m", "p_d_m", "p_b_f", "p_d_f", "forced_termination", "measured_alpha")


@dataclass(frozen=True)
class SweepSpec:
    """What to vary and how to simulate each point."""

    param: str
    values: Tuple[Any, ...]
    seeds: Tuple[int, ...] = ()
    horizon_s: Optional[float] = None

    @property
    def simulate(self) -> bool:
        return bool(self.seeds)


def resolve_param(param: str) -> str:
    return ALIASES.get(param, param)


def sweep_values(config: ScenarioConfig, param: str, start: float, stop: float, points: int) -> Tuple[Any, ...]:
    """
    Evenly spaced values between start and stop, inclusive.

    Integer-valued config keys get rounded values.

    Raises:
        ConfigurationError: unknown key, non-numeric key or points < 1
    """
    if points < 1:
        raise ConfigurationError([f"--points must be at least 1, got {points}"])
    current = _lookup(config, resolve_param(param))
    values = np.linspace(start, stop, points)
    if isinstance(current, bool) or (current is not None and not isinstance(current, (int, float))):
        raise ConfigurationError([f"{param} is not a numeric parameter"])
    if isinstance(current, int):
        return tuple(int(round(v)) for v in values)
    return tuple(float(v) for v in values)


def _lookup(config: ScenarioConfig, dotted: str) -> Any:
    node: Any = config.model_dump()
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigurationError([f"unknown sweep parameter '{dotted}'"])
        node = node[part]
    return node


def header(spec: SweepSpec) -> List[str]:
    columns = ["param", "value"] + SOLUTION_COLUMNS
    if spec.simulate:
        for name in SIM_ESTIMATES:
            columns += [f"sim_{name}", f"sim_{name}_ci", f"sim_{name}_n"]
        columns += ["sim_seeds", "sim_conserved", "sim_ledger_violations", "analytic_alpha"]
    return columns


def evaluate_point(config: ScenarioConfig, spec: SweepSpec, value: Any) -> Dict[str, Any]:
    """
    Solve and optionally simulate one sweep point.

    With sim.alpha_feedback the analytic columns are re-solved with the
    measured alpha once the simulation has produced one.
    """
    point = config.with_overrides({resolve_param(spec.param): value})
    if spec.horizon_s is not None:
        point = point.with_overrides({"sim.horizon_s": spec.horizon_s})
    row: Dict[str, Any] = {"param": spec.param, "value": value}
    traffic = point.traffic
    solution = solve_fixed_point(TrafficParams.from_config(point), traffic.tol, traffic.max_iter, traffic.damping)
    if spec.simulate:
        reports = [run_simulation(point, seed) for seed in spec.seeds]
        row.update(_pool_reports(reports))
        alpha = row.get("sim_measured_alpha")
        if point.sim.alpha_feedback and alpha is not None:
            solution = solve_fixed_point(
                TrafficParams.from_config(point, alpha=alpha),
                point.traffic.tol,
                point.traffic.max_iter,
                point.traffic.damping,
            )
        row["analytic_alpha"] = solution.alpha
    row.update(solution.as_dict())
    return row


def _pool_reports(reports: Sequence[MetricsReport]) -> Dict[str, Any]:
    """Combine per-seed counts into one estimate per metric."""
    row: Dict[str, Any] = {}
    for name in SIM_ESTIMATES:
        pooled = Estimate(
            sum(getattr(r, name).successes for r in reports),
            sum(getattr(r, name).trials for r in reports),
        )
        row[f"sim_{name}"] = pooled.value
        row[f"sim_{name}_ci"] = pooled.half_width
        row[f"sim_{name}_n"] = pooled.trials
    row["sim_seeds"] = len(reports)
    row["sim_conserved"] = all(r.conserved for r in reports)
    row["sim_ledger_violations"] = sum(r.ledger_violations for r in reports)
    return row


def _evaluate_task(task: Tuple[ScenarioConfig, SweepSpec, Any]) -> Dict[str, Any]:
    return evaluate_point(*task)


def run_sweep(
    config: ScenarioConfig,
    spec: SweepSpec,
    jobs: int = 1,
    progress: Optional[ProgressTracker] = None,
) -> List[Dict[str, Any]]:
    """
    Evaluate every sweep point.

    Rows come back in parameter order whatever the completion order.

    Args:
        config: Base scenario
        spec: Sweep definition
        jobs: Worker processes (1 runs in-process)
        progress: Optional tracker advanced once per point

    Returns:
        One row per value
    """
    tasks = [(config, spec, value) for value in spec.values]
    rows: List[Dict[str, Any]] = []
    if jobs <= 1:
        for task in tasks:
            rows.append(_evaluate_task(task))
            if progress is not None:
                progress.update()
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            for row in executor.map(_evaluate_task, tasks):
                rows.append(row)
                if progress is not None:
                    progress.update()
    logger.debug("sweep over %s finished with %d rows", spec.param, len(rows))
    return rows
