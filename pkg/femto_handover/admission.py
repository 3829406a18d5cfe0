"""Call admission control - femtocell slots, macrocell QoS-adaptive bandwidth ledger."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from femto_handover.config import CacSection
from femto_handover.errors import ConfigurationError, ContractViolation, UnknownCellError

logger = logging.getLogger(__name__)

EPSILON = 1e-9


class Outcome(Enum):
    """Terminal outcomes of the admission policies."""

    ADMIT_FEMTO = "admit_femto"
    ADMIT_MACRO = "admit_macro"
    BLOCK = "block"
    DROP = "drop"
    STAY_MACRO = "stay_macro"


class EventKind(Enum):
    """Admission request kinds."""

    NEW = "new"
    MACRO_TO_FEMTO = "macro_to_femto"
    FEMTO_ORIGINATED = "femto_originated"
    MACRO_TO_MACRO = "macro_to_macro"


@dataclass(frozen=True)
class TrafficClass:
    """Bandwidth contract of a call class."""

    name: str
    adaptive: bool
    beta_r: float
    beta_min: float

    def __post_init__(self):
        if self.beta_min <= 0 or self.beta_r <= 0:
            raise ConfigurationError([f"class {self.name}: bandwidths must be positive"])
        if self.beta_min > self.beta_r:
            raise ConfigurationError(
                [f"class {self.name}: beta_min ({self.beta_min}) exceeds beta_r ({self.beta_r})"]
            )
        if not self.adaptive and self.beta_min != self.beta_r:
            raise ConfigurationError([f"class {self.name}: non-adaptive class needs beta_min == beta_r"])

    @property
    def slack(self) -> float:
        return self.beta_r - self.beta_min


def default_classes(cac: Optional[CacSection] = None) -> Tuple[TrafficClass, TrafficClass]:
    """(non-adaptive, adaptive) classes from the CAC section."""
    cac = cac or CacSection()
    return (
        TrafficClass("non_adaptive", False, cac.non_adaptive_kbps, cac.non_adaptive_kbps),
        TrafficClass("adaptive", True, cac.adaptive_max_kbps, cac.adaptive_min_kbps),
    )


@dataclass
class Grant:
    """One call held by the macrocell."""

    session_id: int
    traffic_class: TrafficClass
    granted: float

    @property
    def slack(self) -> float:
        return self.granted - self.traffic_class.beta_min


@dataclass(frozen=True)
class Degradation:
    session_id: int
    new_grant: float


@dataclass(frozen=True)
class FemtoCandidate:
    """Target FAP as seen by the admission policy."""

    fap_id: int
    snir_db: float
    free_capacity: int

    @property
    def has_slot(self) -> bool:
        return self.free_capacity > 0


@dataclass(frozen=True)
class CacDecision:
    """Result of one admission request."""

    outcome: Outcome
    fap_id: Optional[int] = None
    granted_kbps: float = 0.0
    degradations: Tuple[Degradation, ...] = field(default_factory=tuple)

    @property
    def admitted(self) -> bool:
        return self.outcome in (Outcome.ADMIT_FEMTO, Outcome.ADMIT_MACRO)


class MacroLedger:
    """Bandwidth ledger of the macrocell with QoS degradation of adaptive calls."""

    def __init__(self, capacity: float = 6000.0, restore_qos: bool = False):
        """
        Initialize ledger.

        Args:
            capacity: Macrocell bandwidth C in kbps
            restore_qos: Raise degraded calls back toward beta_r when bandwidth frees up
        """
        if capacity <= 0:
            raise ConfigurationError([f"macro capacity must be positive, got {capacity}"])
        self.capacity = capacity
        self.restore_qos = restore_qos
        self.calls: Dict[int, Grant] = {}

    @classmethod
    def from_section(cls, cac: CacSection) -> "MacroLedger":
        return cls(cac.macro_capacity_kbps, cac.restore_qos)

    def __len__(self) -> int:
        return len(self.calls)

    def __contains__(self, session_id: int) -> bool:
        return session_id in self.calls

    @property
    def occupied(self) -> float:
        return sum(grant.granted for grant in self.calls.values())

    @property
    def available(self) -> float:
        return self.capacity - self.occupied

    def releasable(self) -> float:
        """Bandwidth that degrading every adaptive call to beta_min would free."""
        return sum(g.slack for g in self.calls.values() if g.traffic_class.adaptive)

    def add(self, session_id: int, traffic_class: TrafficClass, granted: float) -> None:
        if session_id in self.calls:
            raise ContractViolation(f"session {session_id} already holds macro bandwidth")
        if not traffic_class.beta_min - EPSILON <= granted <= traffic_class.beta_r + EPSILON:
            raise ContractViolation(
                f"grant {granted} outside [{traffic_class.beta_min}, {traffic_class.beta_r}] for {traffic_class.name}"
            )
        if granted > self.available + EPSILON:
            raise ContractViolation(f"grant {granted} exceeds available {self.available:.3f} kbps")
        self.calls[session_id] = Grant(session_id, traffic_class, granted)

    def release_call(self, session_id: int) -> Grant:
        """
        Remove a call and return its grant.

        Raises:
            UnknownCellError: session not held by the ledger
        """
        try:
            grant = self.calls.pop(session_id)
        except KeyError:
            raise UnknownCellError(f"session {session_id} is not on the macrocell") from None
        if self.restore_qos:
            self._restore()
        return grant

    def degrade_victims(self, need_kbps: float) -> List[Degradation]:
        """
        Plan degradations freeing exactly need_kbps.

        Largest slack first, ties by session_id; nobody goes below beta_min.
        The ledger is not modified.

        Raises:
            ContractViolation: need_kbps exceeds releasable()
        """
        if need_kbps <= EPSILON:
            return []
        if need_kbps > self.releasable() + EPSILON:
            raise ContractViolation(
                f"cannot free {need_kbps} kbps, only {self.releasable()} kbps is releasable"
            )
        victims = sorted(
            (g for g in self.calls.values() if g.traffic_class.adaptive and g.slack > EPSILON),
            key=lambda g: (-g.slack, g.session_id),
        )
        plan = []
        remaining = need_kbps
        for grant in victims:
            if remaining <= EPSILON:
                break
            cut = min(grant.slack, remaining)
            plan.append(Degradation(grant.session_id, grant.granted - cut))
            remaining -= cut
        return plan

    def apply(self, degradations) -> None:
        for item in degradations:
            grant = self.calls[item.session_id]
            if item.new_grant < grant.traffic_class.beta_min - EPSILON:
                raise ContractViolation(f"session {item.session_id} would drop below beta_min")
            grant.granted = item.new_grant

    def plain_grant(self, traffic_class: TrafficClass) -> Optional[float]:
        """Full beta_r if it fits without touching other calls."""
        if self.available >= traffic_class.beta_r - EPSILON:
            return traffic_class.beta_r
        return None

    def degraded_grant(self, traffic_class: TrafficClass) -> Optional[Tuple[float, List[Degradation]]]:
        """Largest grant reachable through degradation, or None if below beta_min."""
        available = max(self.available, 0.0)
        grant = min(traffic_class.beta_r, available + self.releasable())
        if grant < traffic_class.beta_min - EPSILON:
            return None
        return grant, self.degrade_victims(max(0.0, grant - available))

    def commit(self, session_id: int, traffic_class: TrafficClass, decision: CacDecision) -> None:
        """Apply a macro admission: degradations first, then the new grant."""
        if decision.outcome is not Outcome.ADMIT_MACRO:
            raise ContractViolation(f"cannot commit {decision.outcome.value} to the macro ledger")
        self.apply(decision.degradations)
        self.add(session_id, traffic_class, decision.granted_kbps)

    def check(self) -> None:
        """Verify capacity and grant bounds; raises ContractViolation."""
        if self.occupied > self.capacity + 1e-6:
            raise ContractViolation(f"occupied {self.occupied} exceeds capacity {self.capacity}")
        for grant in self.calls.values():
            tc = grant.traffic_class
            if not tc.beta_min - 1e-6 <= grant.granted <= tc.beta_r + 1e-6:
                raise ContractViolation(f"session {grant.session_id} grant {grant.granted} out of bounds")

    def _restore(self) -> None:
        for session_id in sorted(self.calls):
            available = self.available
            if available <= EPSILON:
                break
            grant = self.calls[session_id]
            deficit = grant.traffic_class.beta_r - grant.granted
            if deficit > EPSILON:
                grant.granted += min(deficit, available)


class ChannelPool:
    """
    Channelised macrocell: N_ch channels for new calls, N_ch + S_ch for handovers.

    Same admission interface as MacroLedger; grants are whole channels, so
    degradations are implicit in the guard band.
    """

    def __init__(self, n_channels: int, s_channels: int):
        if n_channels < 1 or s_channels < 0:
            raise ConfigurationError([f"invalid channel pool N_ch={n_channels}, S_ch={s_channels}"])
        self.n_channels = n_channels
        self.s_channels = s_channels
        self.calls: Dict[int, Grant] = {}

    def __len__(self) -> int:
        return len(self.calls)

    def __contains__(self, session_id: int) -> bool:
        return session_id in self.calls

    @property
    def busy(self) -> int:
        return len(self.calls)

    @property
    def occupied(self) -> float:
        return sum(grant.granted for grant in self.calls.values())

    @property
    def available(self) -> float:
        return float(max(self.n_channels - self.busy, 0))

    def releasable(self) -> float:
        return 0.0

    def plain_grant(self, traffic_class: TrafficClass) -> Optional[float]:
        return traffic_class.beta_r if self.busy < self.n_channels else None

    def degraded_grant(self, traffic_class: TrafficClass):
        if self.busy < self.n_channels:
            return traffic_class.beta_r, []
        if self.busy < self.n_channels + self.s_channels:
            return traffic_class.beta_min, []
        return None

    def commit(self, session_id: int, traffic_class: TrafficClass, decision: CacDecision) -> None:
        if decision.outcome is not Outcome.ADMIT_MACRO:
            raise ContractViolation(f"cannot commit {decision.outcome.value} to the channel pool")
        if session_id in self.calls:
            raise ContractViolation(f"session {session_id} already holds a channel")
        if self.busy >= self.n_channels + self.s_channels:
            raise ContractViolation("channel pool is full")
        self.calls[session_id] = Grant(session_id, traffic_class, decision.granted_kbps)

    def release_call(self, session_id: int) -> Grant:
        try:
            return self.calls.pop(session_id)
        except KeyError:
            raise UnknownCellError(f"session {session_id} is not on the macrocell") from None

    def check(self) -> None:
        if self.busy > self.n_channels + self.s_channels:
            raise ContractViolation(f"{self.busy} calls exceed {self.n_channels + self.s_channels} channels")


class AdmissionController:
    """The three admission policies plus the macro-to-macro degradation path."""

    def __init__(self, gamma1_db: float = 10.0, gamma2_db: float = 12.0):
        """
        Initialize controller.

        Args:
            gamma1_db: Lower SNIR threshold
            gamma2_db: Upper SNIR threshold (must exceed gamma1_db)
        """
        if gamma2_db <= gamma1_db:
            raise ConfigurationError([f"gamma2 ({gamma2_db}) must be greater than gamma1 ({gamma1_db})"])
        self.gamma1 = gamma1_db
        self.gamma2 = gamma2_db
        self.stats = {kind: {outcome: 0 for outcome in Outcome} for kind in EventKind}

    @classmethod
    def from_section(cls, cac: CacSection) -> "AdmissionController":
        return cls(cac.gamma1_db, cac.gamma2_db)

    def admit_new(self, traffic_class: TrafficClass, femto: Optional[FemtoCandidate], ledger) -> CacDecision:
        """
        New originating call; QoS degradation is never used.

        Args:
            traffic_class: Class of the incoming call
            femto: Covering FAP, None outside femto coverage
            ledger: MacroLedger or ChannelPool

        Returns:
            ADMIT_FEMTO, ADMIT_MACRO or BLOCK
        """
        if femto is not None and femto.snir_db >= self.gamma2 and femto.has_slot:
            decision = CacDecision(Outcome.ADMIT_FEMTO, fap_id=femto.fap_id)
        else:
            grant = ledger.plain_grant(traffic_class)
            if grant is not None:
                decision = CacDecision(Outcome.ADMIT_MACRO, granted_kbps=grant)
            else:
                decision = CacDecision(Outcome.BLOCK)
        return self._record(EventKind.NEW, decision)

    def admit_macro_originated(
        self,
        traffic_class: TrafficClass,
        target: Optional[FemtoCandidate],
        current_macro_snir_db: float,
    ) -> CacDecision:
        """
        Optional offload of a macro call to an FAP.

        Admitted when the target has a slot and either meets gamma2 or beats
        the current macro SNIR. Otherwise the call stays on the macrocell.
        """
        if (
            target is not None
            and target.has_slot
            and (target.snir_db >= self.gamma2 or current_macro_snir_db <= target.snir_db)
        ):
            decision = CacDecision(Outcome.ADMIT_FEMTO, fap_id=target.fap_id)
        else:
            decision = CacDecision(Outcome.STAY_MACRO)
        return self._record(EventKind.MACRO_TO_FEMTO, decision)

    def admit_femto_originated(
        self,
        traffic_class: TrafficClass,
        target: Optional[FemtoCandidate],
        ledger,
    ) -> CacDecision:
        """
        Handover of a call leaving its FAP.

        Args:
            traffic_class: Class of the handover call
            target: Best target FAP, None when no FAP candidate exists
            ledger: MacroLedger or ChannelPool

        Returns:
            ADMIT_FEMTO, ADMIT_MACRO (possibly with degradations) or DROP
        """
        if target is not None:
            if target.snir_db >= self.gamma2 and target.has_slot:
                return self._record(EventKind.FEMTO_ORIGINATED, CacDecision(Outcome.ADMIT_FEMTO, fap_id=target.fap_id))
            if self.gamma1 <= target.snir_db < self.gamma2:
                grant = ledger.plain_grant(traffic_class)
                if grant is not None:
                    return self._record(
                        EventKind.FEMTO_ORIGINATED, CacDecision(Outcome.ADMIT_MACRO, granted_kbps=grant)
                    )
                if target.has_slot:
                    return self._record(
                        EventKind.FEMTO_ORIGINATED, CacDecision(Outcome.ADMIT_FEMTO, fap_id=target.fap_id)
                    )
        return self._record(EventKind.FEMTO_ORIGINATED, self._degraded(traffic_class, ledger))

    def admit_macro_handover(self, traffic_class: TrafficClass, ledger) -> CacDecision:
        """Macro-to-macro handover: degradation allowed, DROP when even beta_min does not fit."""
        return self._record(EventKind.MACRO_TO_MACRO, self._degraded(traffic_class, ledger))

    def get_stats(self) -> Dict[str, Dict[str, int]]:
        return {
            kind.value: {outcome.value: count for outcome, count in outcomes.items() if count}
            for kind, outcomes in self.stats.items()
        }

    def _degraded(self, traffic_class: TrafficClass, ledger) -> CacDecision:
        result = ledger.degraded_grant(traffic_class)
        if result is None:
            return CacDecision(Outcome.DROP)
        grant, plan = result
        return CacDecision(Outcome.ADMIT_MACRO, granted_kbps=grant, degradations=tuple(plan))

    def _record(self, kind: EventKind, decision: CacDecision) -> CacDecision:
        self.stats[kind][decision.outcome] += 1
        if decision.degradations:
            logger.debug("%s admitted at %.1f kbps after %d degradations", kind.value, decision.granted_kbps, len(decision.degradations))
        return decision
