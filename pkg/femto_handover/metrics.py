"""Simulation counters and ratio estimates with 95% confidence half-widths."""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

Z_95 = 1.96


@dataclass(frozen=True)
class Estimate:
    """Ratio estimate successes / trials; undefined when trials == 0."""

    successes: int
    trials: int

    @property
    def defined(self) -> bool:
        return self.trials > 0

    @property
    def value(self) -> Optional[float]:
        if not self.trials:
            return None
        return self.successes / self.trials

    @property
    def half_width(self) -> Optional[float]:
        """Normal approximation; rule of three (3/n) at 0 or n successes."""
        if not self.trials:
            return None
        if self.successes in (0, self.trials):
            return 3.0 / self.trials
        p = self.successes / self.trials
        return Z_95 * math.sqrt(p * (1 - p) / self.trials)

    def __str__(self) -> str:
        if not self.defined:
            return "undefined (n=0)"
        return f"{self.value:.6f} ± {self.half_width:.6f} (n={self.trials})"


@dataclass
class SimCounters:
    """Raw tallies of one run; everything before the warm-up boundary is excluded."""

    # (class name, origin) -> {"arrivals", "blocked", "ended", "dropped", "handed_out", "active"}
    population: Dict[Tuple[str, str], Counter] = field(default_factory=dict)
    femto_new_attempts: int = 0
    femto_new_full: int = 0
    macro_new_attempts: int = 0
    macro_new_blocked: int = 0
    femto_ho_attempts: int = 0
    femto_ho_full: int = 0
    macro_ho_attempts: int = 0
    macro_ho_dropped: int = 0
    admitted: int = 0
    dropped: int = 0
    # dwell expiries that changed cell, by kind (F2F, F2M, M2F, M2M)
    mobility_events: Counter = field(default_factory=Counter)
    # completed F2F, F2M, M2F handovers; each has one completed signaling trace
    handovers: Counter = field(default_factory=Counter)
    macro_handovers: int = 0
    signaling_completed: Counter = field(default_factory=Counter)
    signaling_messages: Counter = field(default_factory=Counter)
    signaling_latency_ms: Counter = field(default_factory=Counter)
    signaling_aborts: Counter = field(default_factory=Counter)
    proposed_sizes: List[int] = field(default_factory=list)
    traditional_sizes: List[int] = field(default_factory=list)
    target_checks: int = 0
    target_missing_proposed: int = 0
    target_missing_traditional: int = 0
    alpha_trials: int = 0
    alpha_hits: int = 0
    macro_releases: int = 0
    macro_channel_seconds: float = 0.0
    ledger_checks: int = 0
    ledger_violations: int = 0
    events: int = 0

    def tally(self, class_name: str, origin: str, key: str, amount: int = 1) -> None:
        self.population.setdefault((class_name, origin), Counter())[key] += amount


@dataclass(frozen=True)
class MetricsReport:
    """Estimated probabilities and run diagnostics."""

    seed: int
    horizon_s: float
    p_b_m: Estimate
    p_d_m: Estimate
    p_b_f: Estimate
    p_d_f: Estimate
    forced_termination: Estimate
    missing_target_proposed: Estimate
    missing_target_traditional: Estimate
    measured_alpha: Estimate
    handover_counts: Dict[str, int]
    mobility_events: Dict[str, int]
    macro_handovers: int
    signaling_messages: Dict[str, float]
    signaling_latency_ms: Dict[str, float]
    neighbor_list_sizes: Dict[str, float]
    macro_channel_release_rate: Optional[float]
    conservation: Dict[str, Dict[str, int]]
    ledger_checks: int
    ledger_violations: int

    @property
    def conserved(self) -> bool:
        return all(
            row["arrivals"] == row["blocked"] + row["ended"] + row["dropped"] + row["handed_out"] + row["active"]
            for row in self.conservation.values()
        )

    def as_row(self) -> Dict[str, object]:
        """Flat mapping for CSV output."""
        row: Dict[str, object] = {"seed": self.seed, "horizon_s": self.horizon_s}
        for name in (
            "p_b_m",
            "p_d_m",
            "p_b_f",
            "p_d_f",
            "forced_termination",
            "missing_target_proposed",
            "missing_target_traditional",
            "measured_alpha",
        ):
            est: Estimate = getattr(self, name)
            row[name] = est.value
            row[f"{name}_ci"] = est.half_width
            row[f"{name}_n"] = est.trials
        for flow, count in sorted(self.handover_counts.items()):
            row[f"handovers_{flow}"] = count
        row["handovers_M2M"] = self.macro_handovers
        for flow, mean in sorted(self.signaling_messages.items()):
            row[f"messages_{flow}"] = mean
        for key, value in self.neighbor_list_sizes.items():
            row[f"list_{key}"] = value
        row["macro_channel_release_rate"] = self.macro_channel_release_rate
        row["conserved"] = self.conserved
        return row

    def to_text(self) -> str:
        lines = [f"seed = {self.seed}", f"horizon_s = {self.horizon_s:g}"]
        for name in ("p_b_m", "p_d_m", "p_b_f", "p_d_f", "forced_termination", "measured_alpha"):
            lines.append(f"{name} = {getattr(self, name)}")
        lines.append(f"missing_target_proposed = {self.missing_target_proposed}")
        lines.append(f"missing_target_traditional = {self.missing_target_traditional}")
        for kind in sorted(self.mobility_events):
            lines.append(f"mobility.{kind} = {self.mobility_events[kind]}")
        for flow in sorted(self.handover_counts):
            lines.append(f"handovers.{flow} = {self.handover_counts[flow]}")
        lines.append(f"handovers.M2M = {self.macro_handovers}")
        for flow in sorted(self.signaling_messages):
            lines.append(
                f"signaling.{flow} = {self.signaling_messages[flow]:.2f} messages, "
                f"{self.signaling_latency_ms[flow]:.2f} ms"
            )
        for key, value in self.neighbor_list_sizes.items():
            lines.append(f"neighbor_list.{key} = {value:.3f}")
        rate = self.macro_channel_release_rate
        lines.append(f"macro_channel_release_rate = {'undefined' if rate is None else f'{rate:.6f}'}")
        lines.append(f"conserved = {self.conserved}")
        lines.append(f"ledger_checks = {self.ledger_checks} ({self.ledger_violations} violations)")
        return "\n".join(lines) + "\n"


def _size_summary(proposed: List[int], traditional: List[int]) -> Dict[str, float]:
    summary: Dict[str, float] = {"samples": float(len(proposed))}
    if proposed:
        p = np.asarray(proposed, dtype=float)
        t = np.asarray(traditional, dtype=float)
        summary.update(
            proposed_mean=float(p.mean()),
            proposed_max=float(p.max()),
            traditional_mean=float(t.mean()),
            traditional_max=float(t.max()),
        )
    return summary


def estimate(counters: SimCounters, seed: int = 0, horizon_s: float = 0.0) -> MetricsReport:
    """Turn raw counters into a MetricsReport."""
    completed = dict(counters.signaling_completed)
    messages = {flow: counters.signaling_messages[flow] / n for flow, n in completed.items() if n}
    latency = {flow: counters.signaling_latency_ms[flow] / n for flow, n in completed.items() if n}
    release_rate = None
    if counters.macro_channel_seconds > 0:
        release_rate = counters.macro_releases / counters.macro_channel_seconds
    conservation = {
        f"{name}/{origin}": {
            key: int(tally[key]) for key in ("arrivals", "blocked", "ended", "dropped", "handed_out", "active")
        }
        for (name, origin), tally in sorted(counters.population.items())
    }
    return MetricsReport(
        seed=seed,
        horizon_s=horizon_s,
        p_b_m=Estimate(counters.macro_new_blocked, counters.macro_new_attempts),
        p_d_m=Estimate(counters.macro_ho_dropped, counters.macro_ho_attempts),
        p_b_f=Estimate(counters.femto_new_full, counters.femto_new_attempts),
        p_d_f=Estimate(counters.femto_ho_full, counters.femto_ho_attempts),
        # drops in this cell, handed-in calls included, per admitted new call
        forced_termination=Estimate(counters.dropped, counters.admitted),
        missing_target_proposed=Estimate(counters.target_missing_proposed, counters.target_checks),
        missing_target_traditional=Estimate(counters.target_missing_traditional, counters.target_checks),
        measured_alpha=Estimate(counters.alpha_hits, counters.alpha_trials),
        handover_counts=dict(counters.handovers),
        mobility_events=dict(counters.mobility_events),
        macro_handovers=counters.macro_handovers,
        signaling_messages=messages,
        signaling_latency_ms=latency,
        neighbor_list_sizes=_size_summary(counters.proposed_sizes, counters.traditional_sizes),
        macro_channel_release_rate=release_rate,
        conservation=conservation,
        ledger_checks=counters.ledger_checks,
        ledger_violations=counters.ledger_violations,
    )
