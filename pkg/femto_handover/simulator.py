"""
Flow-level discrete-event simulation of the two-tier network.

One simpy process generates Poisson arrivals; every admitted call runs as its
own process, racing the remaining call duration against exponential dwell
timers. A dwell expiry samples the kind of cell the MS moves into, rebuilds
the neighbor cell list at the new position, runs admission and executes the
matching signaling flow. Neighboring macrocells are statistically
identical to this one: calls leaving for them depart, and a second Poisson
process hands calls in at the macro-to-macro handover rate of the fixed point.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Union

import numpy as np
import simpy

from femto_handover.admission import (
    AdmissionController,
    CacDecision,
    ChannelPool,
    EventKind,
    FemtoCandidate,
    MacroLedger,
    Outcome,
    TrafficClass,
    default_classes,
)
from femto_handover.analytics import TrafficParams, handover_probabilities, solve_fixed_point
from femto_handover.config import ScenarioConfig
from femto_handover.errors import ContractViolation
from femto_handover.metrics import MetricsReport, SimCounters, estimate
from femto_handover.neighbor_list import (
    NeighborCellList,
    Thresholds,
    build_list_fap_connected,
    build_list_macro_connected,
    build_list_traditional,
    collect_measurements,
    measure_for_macro,
)
from femto_handover.radio import MACRO, RadioEnvironment, ShadowingField
from femto_handover.signaling import Flow, HandoverContext, SignalingTrace, run_flow, signaling_cost
from femto_handover.storage import DecisionLog
from femto_handover.topology import FapDescriptor, Point, Topology, build_topology

logger = logging.getLogger(__name__)

FEMTO_AREA = "femto_area"
MACRO_AREA = "macro_area"
NEIGHBOR_CELL = "neighbor_cell"


class HandoverKind(Enum):
    """Cell change sampled at a dwell expiry."""

    F2F = "F2F"
    F2M = "F2M"
    M2F = "M2F"
    M2M = "M2M"
    STAY = "STAY"


class Status(Enum):
    ACTIVE = "active"
    ENDED = "ended"
    DROPPED = "dropped"
    BLOCKED = "blocked"
    HANDED_OUT = "handed_out"


@dataclass
class CallSession:
    """One call from arrival to departure."""

    session_id: int
    traffic_class: TrafficClass
    origin: str
    user_id: int
    position: Point
    birth_time: float
    counted: bool
    attachment: Union[int, str, None] = None
    granted_kbps: float = 0.0
    handover_count: int = 0
    status: Status = Status.ACTIVE

    @property
    def on_macro(self) -> bool:
        return self.attachment == MACRO


class Simulation:
    """A single seeded run over one topology."""

    def __init__(
        self,
        config: ScenarioConfig,
        seed: int = 0,
        topology: Optional[Topology] = None,
        decision_log: Optional[DecisionLog] = None,
    ):
        """
        Initialize simulation.

        Args:
            config: Validated scenario
            seed: Seed of the run; the topology is generated from the same seed
            topology: Pre-built topology (replay); generated when None
            decision_log: Optional CSV sink for admission decisions
        """
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.topology = topology if topology is not None else build_topology(config, seed)
        shadowing = None
        if config.radio.shadow_sigma_db > 0:
            shadowing = ShadowingField(config.radio.shadow_sigma_db, self.rng)
        self.radio = RadioEnvironment(self.topology, config.radio, shadowing)
        self.thresholds = Thresholds.from_section(config.neighbor)
        self.cac = AdmissionController.from_section(config.cac)
        if config.cac.macro_model == "channels":
            self.macro = ChannelPool(config.n_channels, config.s_channels)
        else:
            self.macro = MacroLedger.from_section(config.cac)
        self.classes = default_classes(config.cac)
        self.params = TrafficParams.from_config(config, n=len(self.topology.faps))
        self.probs = handover_probabilities(self.params)
        self.macro_inflow_rate = solve_fixed_point(self.params).lambda_h_mm
        self.decision_log = decision_log

        self.env = simpy.Environment()
        self.counters = SimCounters()
        self.sessions: Dict[int, CallSession] = {}
        self.fap_load: Dict[int, int] = {fap.fap_id: 0 for fap in self.topology.faps}
        self.warmup = config.sim.warmup_s
        self.end_time = self.warmup + config.sim.horizon_s
        self._next_id = 0
        self._macro_mark = 0.0

        macro_exit = self.probs.p_h_mm + self.probs.p_h_mf
        if macro_exit >= 1.0:
            logger.warning("macro handover probability %.3f capped at 0.999", macro_exit)
            macro_exit = 0.999
        self.macro_exit = macro_exit
        # inflated so that P(any macro handover before the call ends) = P_h,mm + P_h,mf
        self.macro_dwell_rate = self.params.mu * macro_exit / (1.0 - macro_exit)
        ratio2 = (self.params.r_f / self.params.r_m) ** 2
        n = self.params.n
        weights = np.array([max(0, n - 1) * ratio2, max(0.0, 1 - n * ratio2), ratio2 if n else 0.0])
        self.femto_split = weights / weights.sum() if weights.sum() > 0 else np.array([0.0, 1.0, 0.0])

    def run(self) -> MetricsReport:
        """Simulate warm-up plus horizon and return the estimates."""
        rate = self.config.traffic.total_arrival_rate
        if rate > 0:
            self.env.process(self._arrivals(rate))
        if self.macro_inflow_rate > 0:
            self.env.process(self._macro_inflow(self.macro_inflow_rate))
        self.env.run(until=self.end_time)
        self._account_macro_time()
        self._check_ledger()
        for session in self.sessions.values():
            if session.counted:
                self.counters.tally(session.traffic_class.name, session.origin, "active")
        logger.debug("seed %d finished after %d events", self.seed, self.counters.events)
        return estimate(self.counters, self.seed, self.config.sim.horizon_s)

    def dwell_to_handover(self, session: CallSession) -> HandoverKind:
        """
        Sample the cell change at a dwell expiry.

        Macro sessions split M2F : M2M as P_h,mf : P_h,mm; femto sessions split
        F2F : F2M : stay as (n-1)(r_f/r_m)^2 : 1 - n(r_f/r_m)^2 : (r_f/r_m)^2.
        """
        if session.on_macro:
            if self.macro_exit > 0 and self.rng.random() * self.macro_exit < self.probs.p_h_mf:
                return HandoverKind.M2F
            return HandoverKind.M2M
        u = self.rng.random()
        if u < self.femto_split[0]:
            return HandoverKind.F2F
        if u < self.femto_split[0] + self.femto_split[1]:
            return HandoverKind.F2M
        return HandoverKind.STAY

    # processes

    def _arrivals(self, rate: float):
        femto_share = self.params.lambda_f_o / rate
        while True:
            yield self.env.timeout(self.rng.exponential(1.0 / rate))
            self._new_call(femto_share)

    def _macro_inflow(self, rate: float):
        while True:
            yield self.env.timeout(self.rng.exponential(1.0 / rate))
            self._handover_in()

    def _call(self, session: CallSession):
        end_at = self.env.now + self.rng.exponential(1.0 / self.params.mu)
        while True:
            rate = self.macro_dwell_rate if session.on_macro else self.params.eta_f
            dwell = self.rng.exponential(1.0 / rate) if rate > 0 else math.inf
            if self.env.now + dwell >= end_at:
                yield self.env.timeout(end_at - self.env.now)
                self._finish(session, Status.ENDED)
                return
            yield self.env.timeout(dwell)
            if not self._dwell_expiry(session):
                return

    # event handlers

    @property
    def _counting(self) -> bool:
        return self.env.now >= self.warmup

    def _new_call(self, femto_share: float) -> None:
        counted = self._counting
        adaptive = self.rng.random() < self.config.traffic.adaptive_share
        traffic_class = self.classes[1] if adaptive else self.classes[0]
        fap = None
        if self.topology.faps and self.rng.random() < femto_share:
            fap = self.topology.faps[int(self.rng.integers(len(self.topology.faps)))]
            position = self._point_in_fap(fap)
            user_id = self._subscriber(fap)
            origin = FEMTO_AREA
        else:
            position = self._point_in_macro_area()
            user_id = int(self.rng.integers(self.config.topology.user_population))
            origin = MACRO_AREA
        session = CallSession(
            session_id=self._next_id,
            traffic_class=traffic_class,
            origin=origin,
            user_id=user_id,
            position=position,
            birth_time=self.env.now,
            counted=counted,
        )
        self._next_id += 1
        self._tick()
        if counted:
            self.counters.tally(traffic_class.name, origin, "arrivals")

        candidate = None
        if fap is not None:
            candidate = self._candidate(fap.fap_id, position)
            if counted:
                self.counters.femto_new_attempts += 1
                self.counters.femto_new_full += not candidate.has_slot
        decision = self.cac.admit_new(traffic_class, candidate, self.macro)
        self._log(session, EventKind.NEW, decision)
        if decision.outcome is Outcome.ADMIT_FEMTO:
            self._attach_femto(session, decision.fap_id)
        else:
            if counted:
                self.counters.macro_new_attempts += 1
            if decision.outcome is Outcome.BLOCK:
                session.status = Status.BLOCKED
                if counted:
                    self.counters.macro_new_blocked += 1
                    self.counters.tally(traffic_class.name, origin, "blocked")
                return
            self._attach_macro(session, decision)
        if counted:
            self.counters.admitted += 1
        self.sessions[session.session_id] = session
        self.env.process(self._call(session))

    def _dwell_expiry(self, session: CallSession) -> bool:
        """Handle one dwell expiry; False once the call is gone."""
        self._tick()
        kind = self.dwell_to_handover(session)
        if kind is HandoverKind.STAY:
            return True
        if self._counting:
            self.counters.mobility_events[kind.value] += 1
        if kind is HandoverKind.M2M:
            return self._macro_to_macro(session)
        if kind is HandoverKind.M2F:
            self._macro_to_femto(session)
            return True
        return self._femto_handover(session, kind)

    def _handover_in(self) -> None:
        """A call from a neighboring macrocell asks for a macro grant."""
        counted = self._counting
        adaptive = self.rng.random() < self.config.traffic.adaptive_share
        traffic_class = self.classes[1] if adaptive else self.classes[0]
        session = CallSession(
            session_id=self._next_id,
            traffic_class=traffic_class,
            origin=NEIGHBOR_CELL,
            user_id=int(self.rng.integers(self.config.topology.user_population)),
            position=self._point_in_macro_area(),
            birth_time=self.env.now,
            counted=counted,
        )
        self._next_id += 1
        self._tick()
        if counted:
            self.counters.tally(traffic_class.name, NEIGHBOR_CELL, "arrivals")
        decision = self.cac.admit_macro_handover(traffic_class, self.macro)
        self._log(session, EventKind.MACRO_TO_MACRO, decision)
        self._count_macro_handover(decision)
        if decision.outcome is Outcome.DROP:
            session.status = Status.DROPPED
            if counted:
                self.counters.tally(traffic_class.name, NEIGHBOR_CELL, "dropped")
                self.counters.dropped += 1
            return
        self._attach_macro(session, decision)
        if counted:
            self.counters.macro_handovers += 1
        self.sessions[session.session_id] = session
        self.env.process(self._call(session))

    def _macro_to_macro(self, session: CallSession) -> bool:
        # the call continues in a neighboring macrocell; its fate there is sampled by _handover_in
        self._finish(session, Status.HANDED_OUT)
        return False

    def _macro_to_femto(self, session: CallSession) -> None:
        target = self.topology.faps[int(self.rng.integers(len(self.topology.faps)))]
        position = self._point_in_fap(target)
        session.position = position
        measurements, known = measure_for_macro(self.radio, position, session.user_id, self.thresholds)
        proposed = build_list_macro_connected(measurements, known, self.thresholds)
        traditional = build_list_traditional(measurements, self.thresholds.s_t0)
        self._record_lists(proposed, traditional, target, session.user_id)
        macro_snir = self.radio.snir(position, MACRO)
        for fap_id in proposed.fap_ids:
            candidate = self._candidate(fap_id, position)
            self._count_femto_handover(candidate)
            decision = self.cac.admit_macro_originated(session.traffic_class, candidate, macro_snir)
            self._log(session, EventKind.MACRO_TO_FEMTO, decision)
            if decision.outcome is not Outcome.ADMIT_FEMTO:
                continue
            authorized = self.topology.fap(fap_id).is_accessible(session.user_id)
            if not self._signal(Flow.M2F, authorized).completed:
                continue
            self._release_macro(session)
            self._attach_femto(session, fap_id)
            self._handover_done(session, Flow.M2F)
            return
        # no FAP took the call; it stays on the macrocell

    def _femto_handover(self, session: CallSession, kind: HandoverKind) -> bool:
        serving = self.topology.fap(session.attachment)
        target = None
        if kind is HandoverKind.F2F:
            target = self._neighbor_target(serving)
            position = self._point_in_fap(target)
        else:
            position = self._point_in_macro_area()
        session.position = position

        known = self.topology.known_locations(serving.fap_id)
        measurements = collect_measurements(self.radio, position, session.user_id, known)
        macro_rssi = self.radio.macro_rssi(position)
        proposed = build_list_fap_connected(
            measurements, serving.frequency_channel, known, self.thresholds, macro_rssi, serving_id=serving.fap_id
        )
        traditional = build_list_traditional(measurements, self.thresholds.s_t0, macro_rssi, serving_id=serving.fap_id)
        self._record_lists(proposed, traditional, target, session.user_id)

        candidates = proposed.fap_ids if kind is HandoverKind.F2F else []
        for rank, fap_id in enumerate(candidates):
            candidate = self._candidate(fap_id, position)
            self._count_femto_handover(candidate)
            if rank == 0 and self._counting:
                self.counters.alpha_trials += 1
                self.counters.alpha_hits += candidate.snir_db >= self.cac.gamma2
            decision = self.cac.admit_femto_originated(session.traffic_class, candidate, self.macro)
            self._log(session, EventKind.FEMTO_ORIGINATED, decision)
            if decision.outcome is Outcome.ADMIT_FEMTO:
                if self._signal(Flow.F2F, True).completed:
                    self._release(session)
                    self._attach_femto(session, fap_id)
                    self._handover_done(session, Flow.F2F)
                    return True
                continue
            self._count_macro_handover(decision)
            if decision.outcome is Outcome.DROP:
                return self._drop(session)
            if self._femto_to_macro(session, decision):
                return True

        decision = self.cac.admit_femto_originated(session.traffic_class, None, self.macro)
        self._log(session, EventKind.FEMTO_ORIGINATED, decision)
        self._count_macro_handover(decision)
        if decision.outcome is Outcome.ADMIT_MACRO and self._femto_to_macro(session, decision):
            return True
        return self._drop(session)

    def _femto_to_macro(self, session: CallSession, decision: CacDecision) -> bool:
        if not self._signal(Flow.F2M, True).completed:
            return False
        self._release(session)
        self._attach_macro(session, decision)
        self._handover_done(session, Flow.F2M)
        return True

    # resources

    def _attach_femto(self, session: CallSession, fap_id: int) -> None:
        self.fap_load[fap_id] += 1
        session.attachment = fap_id
        session.granted_kbps = 0.0

    def _attach_macro(self, session: CallSession, decision: CacDecision) -> None:
        self._account_macro_time()
        self.macro.commit(session.session_id, session.traffic_class, decision)
        session.attachment = MACRO
        session.granted_kbps = decision.granted_kbps

    def _release_macro(self, session: CallSession) -> None:
        self._account_macro_time()
        self.macro.release_call(session.session_id)
        session.attachment = None
        if self._counting:
            self.counters.macro_releases += 1

    def _release(self, session: CallSession) -> None:
        if session.on_macro:
            self._release_macro(session)
        elif session.attachment is not None:
            self.fap_load[session.attachment] -= 1
            session.attachment = None

    def _finish(self, session: CallSession, status: Status) -> None:
        self._tick()
        self._release(session)
        session.status = status
        self.sessions.pop(session.session_id, None)
        if session.counted:
            self.counters.tally(session.traffic_class.name, session.origin, status.value)
            if status is Status.DROPPED:
                self.counters.dropped += 1

    def _drop(self, session: CallSession) -> bool:
        self._finish(session, Status.DROPPED)
        return False

    def _account_macro_time(self) -> None:
        now = self.env.now
        if now > self.warmup:
            start = max(self._macro_mark, self.warmup)
            self.counters.macro_channel_seconds += len(self.macro) * (now - start)
        self._macro_mark = now

    # bookkeeping

    def _signal(self, flow: Flow, authorized: bool) -> SignalingTrace:
        preauth_ok = True
        if self.config.signaling.preauth_failure_prob > 0:
            preauth_ok = self.rng.random() >= self.config.signaling.preauth_failure_prob
        trace = run_flow(
            flow,
            HandoverContext(preauth_ok=preauth_ok, authorization_ok=authorized),
            self.config.signaling,
        )
        if self._counting:
            if trace.completed:
                self.counters.signaling_completed[flow.value] += 1
                self.counters.signaling_messages[flow.value] += signaling_cost(trace)["messages_total"]
                self.counters.signaling_latency_ms[flow.value] += trace.latency_ms
            else:
                self.counters.signaling_aborts[flow.value] += 1
        return trace

    def _handover_done(self, session: CallSession, flow: Flow) -> None:
        session.handover_count += 1
        if self._counting:
            self.counters.handovers[flow.value] += 1

    def _count_femto_handover(self, candidate: FemtoCandidate) -> None:
        if self._counting:
            self.counters.femto_ho_attempts += 1
            self.counters.femto_ho_full += not candidate.has_slot

    def _count_macro_handover(self, decision: CacDecision) -> None:
        if self._counting and decision.outcome in (Outcome.ADMIT_MACRO, Outcome.DROP):
            self.counters.macro_ho_attempts += 1
            self.counters.macro_ho_dropped += decision.outcome is Outcome.DROP

    def _record_lists(
        self,
        proposed: NeighborCellList,
        traditional: NeighborCellList,
        target: Optional[FapDescriptor],
        user_id: int,
    ) -> None:
        if not self._counting:
            return
        self.counters.proposed_sizes.append(len(proposed))
        self.counters.traditional_sizes.append(len(traditional))
        if target is not None and target.is_accessible(user_id):
            self.counters.target_checks += 1
            self.counters.target_missing_proposed += target.fap_id not in proposed
            self.counters.target_missing_traditional += target.fap_id not in traditional

    def _log(self, session: CallSession, kind: EventKind, decision: CacDecision) -> None:
        if self.decision_log is not None:
            self.decision_log.record(
                self.env.now,
                session.session_id,
                kind.value,
                decision.outcome.value,
                decision.granted_kbps,
                len(decision.degradations),
            )

    def _tick(self) -> None:
        # one shadowing epoch per event: evaluations within an event agree, later events redraw
        if self.radio.shadowing is not None:
            self.radio.shadowing.new_epoch()
        self.counters.events += 1
        if self.counters.events % self.config.sim.ledger_check_interval == 0:
            self._check_ledger()

    def _check_ledger(self) -> None:
        """Macro ledger and FAP slots must match the active sessions."""
        self.counters.ledger_checks += 1
        problems = []
        on_macro = {sid for sid, s in self.sessions.items() if s.on_macro}
        if on_macro != set(self.macro.calls):
            problems.append(f"{len(on_macro ^ set(self.macro.calls))} sessions disagree with the macro ledger")
        try:
            self.macro.check()
        except ContractViolation as e:
            problems.append(str(e))
        load: Dict[int, int] = {fid: 0 for fid in self.fap_load}
        for s in self.sessions.values():
            if s.attachment is not None and not s.on_macro:
                load[s.attachment] += 1
        if load != self.fap_load:
            problems.append("FAP slot counts disagree with attached sessions")
        if problems:
            self.counters.ledger_violations += 1
            logger.warning("ledger check at t=%.1f failed: %s", self.env.now, "; ".join(problems))

    # geometry

    def _candidate(self, fap_id: int, position: Point) -> FemtoCandidate:
        fap = self.topology.fap(fap_id)
        return FemtoCandidate(fap_id, self.radio.snir(position, fap_id), fap.capacity - self.fap_load[fap_id])

    def _neighbor_target(self, serving: FapDescriptor) -> FapDescriptor:
        d = self.topology.distances_from(serving.position)
        d[self.topology.index_of(serving.fap_id)] = np.inf
        k = min(self.config.sim.target_candidates, len(d) - 1)
        nearest = sorted(range(len(d)), key=lambda i: (d[i], i))[:k]
        return self.topology.faps[nearest[int(self.rng.integers(k))]]

    def _point_in_fap(self, fap: FapDescriptor) -> Point:
        r = fap.radius * math.sqrt(self.rng.random())
        a = self.rng.uniform(0.0, 2 * math.pi)
        return (fap.position[0] + r * math.cos(a), fap.position[1] + r * math.sin(a))

    def _point_in_macro_area(self) -> Point:
        """Uniform point of the macrocell outside every femtocell (rejection sampling)."""
        macro = self.topology.macro_bs
        point = macro.position
        for _ in range(64):
            r = macro.radius * math.sqrt(self.rng.random())
            a = self.rng.uniform(0.0, 2 * math.pi)
            point = (macro.position[0] + r * math.cos(a), macro.position[1] + r * math.sin(a))
            if not self.topology.covering_faps(point):
                break
        return point

    def _subscriber(self, fap: FapDescriptor) -> int:
        if fap.authorized_users:
            users = sorted(fap.authorized_users)
            return users[int(self.rng.integers(len(users)))]
        return int(self.rng.integers(self.config.topology.user_population))


def run(config: ScenarioConfig, seed: int = 0, topology: Optional[Topology] = None) -> MetricsReport:
    """
    Run one simulation.

    Args:
        config: Validated scenario
        seed: Run seed; identical (config, seed) give identical reports
        topology: Optional pre-built topology

    Returns:
        MetricsReport
    """
    if config.sim.decision_log:
        with DecisionLog(config.sim.decision_log) as log:
            return Simulation(config, seed, topology, log).run()
    return Simulation(config, seed, topology).run()
