"""Handover call flows - femto-to-macro, macro-to-femto and femto-to-femto signaling traces."""

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from femto_handover.config import SignalingSection
from femto_handover.errors import ConfigurationError

logger = logging.getLogger(__name__)


class Flow(Enum):
    F2M = "F2M"
    M2F = "M2F"
    F2F = "F2F"


class EntityKind(Enum):
    MS = "MS"
    FAP = "FAP"
    FGW = "FGW"
    CN = "CN"
    RNC = "RNC"
    MACRO_BS = "MacroBS"


ROLE_KINDS: Dict[str, EntityKind] = {
    "MS": EntityKind.MS,
    "S-FAP": EntityKind.FAP,
    "T-FAP": EntityKind.FAP,
    "N-FAP": EntityKind.FAP,
    "FGW": EntityKind.FGW,
    "CN": EntityKind.CN,
    "S-RNC": EntityKind.RNC,
    "T-RNC": EntityKind.RNC,
    "MBS": EntityKind.MACRO_BS,
}


class Gate(Enum):
    """Checks a flow can fail at; the value is the abort reason."""

    PREAUTH = "preauth"
    AUTH = "auth"
    CAC = "cac_reject"
    INTERFERENCE = "interference"


@dataclass(frozen=True)
class Entity:
    kind: EntityKind
    id: str

    @classmethod
    def of(cls, role: str) -> "Entity":
        return cls(ROLE_KINDS[role], role)


@dataclass(frozen=True)
class SignalingStep:
    index: int
    sender: Entity
    receiver: Entity
    label: str
    delay_ms: float = 0.0

    @property
    def is_message(self) -> bool:
        return self.sender != self.receiver


@dataclass(frozen=True)
class HandoverContext:
    """Gate results for one execution; everything passes by default."""

    cac_ok: bool = True
    preauth_ok: bool = True
    authorization_ok: bool = True
    interference_ok: bool = True

    def passes(self, gate: Gate) -> bool:
        return {
            Gate.PREAUTH: self.preauth_ok,
            Gate.AUTH: self.authorization_ok,
            Gate.CAC: self.cac_ok,
            Gate.INTERFERENCE: self.interference_ok,
        }[gate]


@dataclass(frozen=True)
class SignalingTrace:
    """Executed call flow."""

    flow: Flow
    steps: Tuple[SignalingStep, ...]
    abort_reason: Optional[Gate] = None
    abort_step: Optional[int] = None

    @property
    def completed(self) -> bool:
        return self.abort_reason is None

    @property
    def outcome(self) -> str:
        if self.completed:
            return "completed"
        return f"aborted({self.abort_reason.value}, {self.abort_step})"

    @property
    def latency_ms(self) -> float:
        return sum(step.delay_ms for step in self.steps)

    @property
    def switch_step(self) -> Optional[int]:
        """Index where the MS re-establishes its channel on the target, None if never reached."""
        for step in self.steps:
            if step.label == "channel_reestablishment":
                return step.index
        return None

    @property
    def attachment_switched(self) -> bool:
        return self.completed and self.switch_step is not None


# (sender role, receiver role, label, gates checked at this step)
_F2M = (
    ("MS", "S-FAP", "measurement_report", ()),
    ("S-FAP", "MS", "report_ack", ()),
    ("MS", "MS", "neighbor_scan", ()),
    ("N-FAP", "S-FAP", "son_config", ()),
    ("S-FAP", "MS", "neighbor_cell_list", ()),
    ("MS", "MBS", "pre_authentication", (Gate.PREAUTH,)),
    ("S-FAP", "S-FAP", "ho_decision", ()),
    ("S-FAP", "FGW", "ho_request", ()),
    ("FGW", "CN", "ho_request", ()),
    ("CN", "T-RNC", "ho_request", ()),
    ("T-RNC", "MBS", "ho_request", ()),
    ("MBS", "MBS", "cac_rrc", (Gate.CAC,)),
    ("MBS", "T-RNC", "ho_response", ()),
    ("T-RNC", "CN", "ho_response", ()),
    ("CN", "FGW", "ho_response", ()),
    ("FGW", "S-FAP", "ho_response", ()),
    ("T-RNC", "MBS", "link_setup_request", ()),
    ("MBS", "T-RNC", "link_setup_response", ()),
    ("T-RNC", "CN", "path_switch_request", ()),
    ("CN", "T-RNC", "path_switch_ack", ()),
    ("T-RNC", "MBS", "link_established", ()),
    ("S-FAP", "MBS", "data_forwarding", ()),
    ("S-FAP", "MS", "ho_command", ()),
    ("MS", "MBS", "channel_reestablishment", ()),
    ("MS", "S-FAP", "detach", ()),
    ("MBS", "MS", "synchronization", ()),
    ("MS", "MBS", "synchronization_ack", ()),
    ("MS", "MBS", "ho_complete", ()),
    ("MBS", "CN", "ho_complete", ()),
    ("CN", "FGW", "ho_complete", ()),
    ("FGW", "S-FAP", "link_delete_request", ()),
    ("S-FAP", "FGW", "link_delete_ack", ()),
    ("FGW", "CN", "link_deleted", ()),
)

_M2F = (
    ("MS", "MBS", "measurement_report", ()),
    ("MBS", "MS", "report_ack", ()),
    ("N-FAP", "MBS", "son_config", ()),
    ("MBS", "MS", "neighbor_cell_list", ()),
    ("MS", "T-FAP", "pre_authentication", (Gate.PREAUTH,)),
    ("MS", "MS", "ho_decision", ()),
    ("MBS", "S-RNC", "ho_request", ()),
    ("S-RNC", "CN", "ho_request", ()),
    ("CN", "FGW", "ho_request", ()),
    ("FGW", "T-FAP", "ho_request", ()),
    ("T-FAP", "FGW", "authorization_request", ()),
    ("FGW", "T-FAP", "authorization_response", (Gate.AUTH,)),
    ("T-FAP", "T-FAP", "cac_rrc_interference", (Gate.CAC, Gate.INTERFERENCE)),
    ("T-FAP", "FGW", "ho_response", ()),
    ("FGW", "CN", "ho_response", ()),
    ("CN", "S-RNC", "ho_response", ()),
    ("S-RNC", "MBS", "ho_response", ()),
    ("FGW", "T-FAP", "link_setup_request", ()),
    ("T-FAP", "FGW", "link_setup_response", ()),
    ("FGW", "CN", "path_switch_request", ()),
    ("CN", "FGW", "path_switch_ack", ()),
    ("FGW", "T-FAP", "link_established", ()),
    ("MBS", "T-FAP", "data_forwarding", ()),
    ("MBS", "MS", "ho_command", ()),
    ("MS", "T-FAP", "channel_reestablishment", ()),
    ("MS", "MBS", "detach", ()),
    ("T-FAP", "MS", "synchronization", ()),
    ("MS", "T-FAP", "synchronization_ack", ()),
    ("MS", "T-FAP", "ho_complete", ()),
    ("T-FAP", "FGW", "ho_complete", ()),
    ("FGW", "S-RNC", "ho_complete", ()),
    ("S-RNC", "MBS", "link_delete_request", ()),
    ("MBS", "S-RNC", "link_delete_ack", ()),
    ("MBS", "MBS", "release_resources", ()),
)

_F2F = (
    ("MS", "S-FAP", "measurement_report", ()),
    ("S-FAP", "MS", "report_ack", ()),
    ("MS", "MS", "neighbor_scan", ()),
    ("N-FAP", "S-FAP", "son_config", ()),
    ("S-FAP", "MS", "neighbor_cell_list", ()),
    ("MS", "T-FAP", "pre_authentication", (Gate.PREAUTH,)),
    ("S-FAP", "S-FAP", "ho_decision", ()),
    ("S-FAP", "FGW", "ho_request", ()),
    ("FGW", "T-FAP", "ho_request", ()),
    ("T-FAP", "FGW", "authorization_request", ()),
    ("FGW", "T-FAP", "authorization_response", (Gate.AUTH,)),
    ("T-FAP", "T-FAP", "cac_rrc", (Gate.CAC,)),
    ("T-FAP", "FGW", "ho_response", ()),
    ("FGW", "S-FAP", "ho_response", ()),
    ("FGW", "T-FAP", "link_setup_request", ()),
    ("T-FAP", "FGW", "link_setup_response", ()),
    ("FGW", "T-FAP", "link_established", ()),
    ("S-FAP", "T-FAP", "data_forwarding", ()),
    ("S-FAP", "MS", "ho_command", ()),
    ("MS", "T-FAP", "channel_reestablishment", ()),
    ("MS", "S-FAP", "detach", ()),
    ("T-FAP", "MS", "synchronization", ()),
    ("MS", "T-FAP", "synchronization_ack", ()),
    ("MS", "T-FAP", "ho_complete", ()),
    ("T-FAP", "FGW", "ho_complete", ()),
    ("FGW", "T-FAP", "ho_complete_ack", ()),
    ("FGW", "S-FAP", "link_delete_request", ()),
    ("S-FAP", "FGW", "link_delete_ack", ()),
    ("S-FAP", "S-FAP", "release_resources", ()),
)

CALL_FLOWS = {Flow.F2M: _F2M, Flow.M2F: _M2F, Flow.F2F: _F2F}


def step_delay(sender: str, receiver: str, delays: SignalingSection) -> float:
    if sender == receiver:
        return delays.self_delay_ms
    if "MS" in (sender, receiver):
        return delays.air_delay_ms
    return delays.backhaul_delay_ms


def run_flow(
    flow: Flow,
    context: Optional[HandoverContext] = None,
    delays: Optional[SignalingSection] = None,
) -> SignalingTrace:
    """
    Execute one call flow until completion or the first failing gate.

    The failing gate step is the last step of an aborted trace.

    Args:
        flow: Which call flow
        context: Gate results (all pass by default)
        delays: Per-step latency settings

    Returns:
        SignalingTrace
    """
    context = context or HandoverContext()
    delays = delays or SignalingSection()
    steps: List[SignalingStep] = []
    for index, (sender, receiver, label, gates) in enumerate(CALL_FLOWS[flow], start=1):
        steps.append(
            SignalingStep(index, Entity.of(sender), Entity.of(receiver), label, step_delay(sender, receiver, delays))
        )
        for gate in gates:
            if not context.passes(gate):
                logger.debug("%s aborted at step %d (%s)", flow.value, index, gate.value)
                return SignalingTrace(flow, tuple(steps), gate, index)
    return SignalingTrace(flow, tuple(steps))


def run_f2m(context: Optional[HandoverContext] = None, delays: Optional[SignalingSection] = None) -> SignalingTrace:
    """Femtocell-to-macrocell handover through FGW, CN and target RNC."""
    return run_flow(Flow.F2M, context, delays)


def run_m2f(context: Optional[HandoverContext] = None, delays: Optional[SignalingSection] = None) -> SignalingTrace:
    """Macrocell-to-femtocell handover with FGW authorization of the user."""
    return run_flow(Flow.M2F, context, delays)


def run_f2f(context: Optional[HandoverContext] = None, delays: Optional[SignalingSection] = None) -> SignalingTrace:
    """Femtocell-to-femtocell handover routed through the FGW only."""
    return run_flow(Flow.F2F, context, delays)


def signaling_cost(trace: SignalingTrace) -> Dict[str, object]:
    """
    Count inter-entity messages of a trace.

    Returns:
        {"messages_total": int, "per_entity": {kind: sends + receives}}
    """
    per_entity: Counter = Counter()
    total = 0
    for step in trace.steps:
        if not step.is_message:
            continue
        total += 1
        per_entity[step.sender.kind.value] += 1
        per_entity[step.receiver.kind.value] += 1
    return {"messages_total": total, "per_entity": dict(per_entity)}


def format_trace(trace: SignalingTrace, fmt: str = "text") -> str:
    """Render a trace as aligned text (one line per step) or CSV (index, from, to, label)."""
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["index", "from", "to", "label"])
        for step in trace.steps:
            writer.writerow([step.index, step.sender.id, step.receiver.id, step.label])
        return buffer.getvalue()
    if fmt != "text":
        raise ConfigurationError([f"unknown trace format '{fmt}' (expected text or csv)"])
    lines = []
    for step in trace.steps:
        arrow = f"{step.sender.id} -> {step.receiver.id}" if step.is_message else f"{step.sender.id} (local)"
        lines.append(f"{step.index:>3}  {arrow:<18}  {step.label}")
    return "\n".join(lines) + "\n"


def trace_summary(trace: SignalingTrace) -> str:
    return f"{trace.flow.value} handover: {trace.outcome}, {len(trace.steps)} steps, {trace.latency_ms:.1f} ms"


def golden_rows(trace: SignalingTrace) -> List[Tuple[int, str, str, str]]:
    """Rows comparable with a golden fixture: (index, from-kind, to-kind, label)."""
    return [(s.index, s.sender.kind.value, s.receiver.kind.value, s.label) for s in trace.steps]


def load_golden(path: Union[str, Path]) -> List[Tuple[int, str, str, str]]:
    """Parse a golden trace file; '#' lines and a header row are skipped."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.reader(line for line in f if line.strip() and not line.startswith("#")):
            if row[0] == "index":
                continue
            rows.append((int(row[0]), row[1].strip(), row[2].strip(), row[3].strip()))
    return rows
