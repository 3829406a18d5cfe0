"""Monte-Carlo benchmark of neighbor cell list size and missing targets versus FAP density."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from femto_handover.config import ScenarioConfig
from femto_handover.errors import ConfigurationError
from femto_handover.metrics import Estimate
from femto_handover.neighbor_list import (
    Thresholds,
    build_list_fap_connected,
    build_list_traditional,
    collect_measurements,
)
from femto_handover.progress import ProgressTracker
from femto_handover.radio import RadioEnvironment
from femto_handover.topology import Point, Topology, build_topology

logger = logging.getLogger(__name__)

DEFAULT_DENSITIES = (200, 400, 600, 800, 1000)
DEFAULT_TRIALS = 100

# Overrides applied on top of the scenario before a bench run, by preset name.
# hidden-fap: a dense urban block where FAPs only coordinate with neighbours whose
# coverage overlaps theirs and heavy walls hide nearby FAPs from RSSI scans.
BENCH_PRESETS: Dict[str, Dict[str, object]] = {
    "hidden-fap": {
        "topology.macro_radius_m": 350.0,
        "topology.coordination_range_m": 20.0,
        "topology.wall_attenuation_db": 35.0,
        "radio.measurement_range_m": 130.0,
    },
    "none": {},
}
DEFAULT_PRESET = "hidden-fap"

TRIAL_HEADER = [
    "seed",
    "n",
    "traditional_size",
    "n_f",
    "entries",
    "target_in_proposed",
    "target_in_traditional",
]

SUMMARY_HEADER = [
    "n",
    "trials",
    "proposed_mean",
    "traditional_mean",
    "size_reduction",
    "target_trials",
    "missing_proposed",
    "missing_proposed_ci",
    "missing_traditional",
    "missing_traditional_ci",
    "hidden_known",
    "hidden_listed",
]


@dataclass(frozen=True)
class BenchTrial:
    """One MS placement next to a serving FAP."""

    seed: int
    n: int
    traditional_size: int
    n_f: int
    entries: str
    target_in_proposed: Optional[bool]
    target_in_traditional: Optional[bool]
    hidden_known: int = 0
    hidden_listed: int = 0

    def as_row(self) -> Dict[str, object]:
        return {key: getattr(self, key) for key in TRIAL_HEADER}


@dataclass(frozen=True)
class DensitySummary:
    """Aggregate of every trial at one FAP count."""

    n: int
    trials: int
    proposed_mean: float
    traditional_mean: float
    missing_proposed: Estimate
    missing_traditional: Estimate
    hidden_known: int
    hidden_listed: int

    @property
    def size_reduction(self) -> Optional[float]:
        """Relative list-size saving of the proposed scheme."""
        if self.traditional_mean <= 0:
            return None
        return 1.0 - self.proposed_mean / self.traditional_mean

    def as_row(self) -> Dict[str, object]:
        return {
            "n": self.n,
            "trials": self.trials,
            "proposed_mean": self.proposed_mean,
            "traditional_mean": self.traditional_mean,
            "size_reduction": self.size_reduction,
            "target_trials": self.missing_proposed.trials,
            "missing_proposed": self.missing_proposed.value,
            "missing_proposed_ci": self.missing_proposed.half_width,
            "missing_traditional": self.missing_traditional.value,
            "missing_traditional_ci": self.missing_traditional.half_width,
            "hidden_known": self.hidden_known,
            "hidden_listed": self.hidden_listed,
        }


def bench_config(config: ScenarioConfig, preset: str = DEFAULT_PRESET) -> ScenarioConfig:
    """
    Apply a named bench preset to a scenario.

    Raises:
        ConfigurationError: unknown preset, or the preset breaks a cross-field check
    """
    try:
        overrides = BENCH_PRESETS[preset]
    except KeyError:
        raise ConfigurationError([f"unknown bench preset '{preset}' (choose from {', '.join(BENCH_PRESETS)})"]) from None
    return config.with_overrides(overrides) if overrides else config


def nearest_target(topology: Topology, position: Point, user_id: int, serving_id: int, d_max: float) -> Optional[int]:
    """Nearest accessible FAP other than the serving one within d_max, or None."""
    d = topology.distances_from(position)
    best: Optional[Tuple[float, int]] = None
    for i in np.nonzero(d <= d_max)[0]:
        fap = topology.faps[i]
        if fap.fap_id == serving_id or not fap.is_accessible(user_id):
            continue
        key = (float(d[i]), fap.fap_id)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]


def run_trials(config: ScenarioConfig, n: int, seed: int, trials: int) -> List[BenchTrial]:
    """
    Place an MS trials times on one topology and compare both list schemes.

    The MS sits 0.8 to 1.5 r_f from a random serving FAP, i.e. around the
    edge of the serving femtocell where a handover is due.

    Args:
        config: Scenario (topology.n_faps is replaced by n)
        n: FAP count
        seed: Topology and placement seed
        trials: MS placements on this topology

    Returns:
        One BenchTrial per placement (empty when n == 0)
    """
    topology = build_topology(config, seed, n_faps=n, warn=False)
    if not topology.faps:
        return []
    if topology.frequency_warnings:
        logger.debug("n=%d seed=%d: %d channel clashes", n, seed, len(topology.frequency_warnings))
    rng = np.random.default_rng([seed, n])
    env = RadioEnvironment(topology, config.radio)
    thresholds = Thresholds.from_section(config.neighbor)
    r_f = config.topology.fap_radius_m
    results = []
    for _ in range(trials):
        serving = topology.faps[int(rng.integers(len(topology.faps)))]
        r = r_f * rng.uniform(0.8, 1.5)
        a = rng.uniform(0.0, 2 * math.pi)
        position = (serving.position[0] + r * math.cos(a), serving.position[1] + r * math.sin(a))
        user_id = int(rng.integers(config.topology.user_population))

        known = topology.known_locations(serving.fap_id)
        measurements = collect_measurements(env, position, user_id, known)
        measurements = [m for m in measurements if m.fap_id != serving.fap_id]
        macro_rssi = env.macro_rssi(position)
        proposed = build_list_fap_connected(
            measurements, serving.frequency_channel, known, thresholds, macro_rssi, serving_id=serving.fap_id
        )
        traditional = build_list_traditional(measurements, thresholds.s_t0, macro_rssi, serving_id=serving.fap_id)

        hidden = {
            m.fap_id
            for m in measurements
            if m.accessible
            and m.distance_m is not None
            and m.distance_m <= thresholds.d_max
            and m.rssi_dbm < thresholds.s_t1
            and not (thresholds.hidden_excludes_cochannel and m.frequency_channel == serving.frequency_channel)
        }
        target = nearest_target(topology, position, user_id, serving.fap_id, thresholds.d_max)
        results.append(
            BenchTrial(
                seed=seed,
                n=n,
                traditional_size=len(traditional),
                n_f=proposed.n_f,
                entries=" ".join(str(fid) for fid in proposed.fap_ids),
                target_in_proposed=None if target is None else target in proposed,
                target_in_traditional=None if target is None else target in traditional,
                hidden_known=len(hidden),
                hidden_listed=len(hidden & set(proposed.fap_ids)),
            )
        )
    return results


def summarize(n: int, trials: Sequence[BenchTrial]) -> DensitySummary:
    """Aggregate trials of one density; trials without a target are left out of the miss ratios."""
    with_target = [t for t in trials if t.target_in_proposed is not None]
    proposed_sizes = [len(t.entries.split()) for t in trials]
    return DensitySummary(
        n=n,
        trials=len(trials),
        proposed_mean=float(np.mean(proposed_sizes)) if trials else 0.0,
        traditional_mean=float(np.mean([t.traditional_size for t in trials])) if trials else 0.0,
        missing_proposed=Estimate(sum(not t.target_in_proposed for t in with_target), len(with_target)),
        missing_traditional=Estimate(sum(not t.target_in_traditional for t in with_target), len(with_target)),
        hidden_known=sum(t.hidden_known for t in trials),
        hidden_listed=sum(t.hidden_listed for t in trials),
    )


def run_bench(
    config: ScenarioConfig,
    densities: Iterable[int] = DEFAULT_DENSITIES,
    seeds: Iterable[int] = range(30),
    trials_per_seed: int = DEFAULT_TRIALS,
    progress: Optional[ProgressTracker] = None,
) -> Tuple[List[DensitySummary], List[BenchTrial]]:
    """
    Sweep FAP density and collect list statistics.

    Args:
        config: Base scenario
        densities: FAP counts to evaluate
        seeds: Topology seeds per density
        trials_per_seed: MS placements per topology
        progress: Optional tracker advanced once per (density, seed)

    Returns:
        (per-density summaries in density order, every trial)
    """
    seeds = list(seeds)
    summaries = []
    all_trials: List[BenchTrial] = []
    for n in densities:
        trials: List[BenchTrial] = []
        for seed in seeds:
            trials.extend(run_trials(config, n, seed, trials_per_seed))
            if progress is not None:
                progress.update()
        summary = summarize(n, trials)
        logger.debug(
            "n=%d: proposed %.2f vs traditional %.2f entries, missing %s / %s",
            n,
            summary.proposed_mean,
            summary.traditional_mean,
            summary.missing_proposed,
            summary.missing_traditional,
        )
        summaries.append(summary)
        all_trials.extend(trials)
    return summaries, all_trials
