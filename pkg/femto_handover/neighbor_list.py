"""Neighbor cell list construction - proposed (RSSI, frequency, SON location) and traditional."""

from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set

import numpy as np

from femto_handover.config import NeighborSection
from femto_handover.radio import RadioEnvironment
from femto_handover.topology import Point, Topology


class Provenance(Enum):
    """Why an FAP is in the list."""

    STRONG = "strong"
    HIDDEN = "hidden"


@dataclass(frozen=True)
class Measurement:
    """What the MS knows about one FAP."""

    fap_id: int
    rssi_dbm: float
    frequency_channel: int
    distance_m: Optional[float] = None  # only when the location is SON-known
    accessible: bool = True


@dataclass(frozen=True)
class ListEntry:
    """One candidate target in scan order."""

    fap_id: int
    provenance: Provenance
    rssi_dbm: Optional[float] = None
    distance_m: Optional[float] = None


@dataclass(frozen=True)
class Thresholds:
    """Signal and distance thresholds of the list construction."""

    s_t0: float = -90.0
    s_t1: float = -75.0
    d_max: float = 20.0
    hidden_excludes_cochannel: bool = False

    @classmethod
    def from_section(cls, section: NeighborSection) -> "Thresholds":
        return cls(
            s_t0=section.s_t0_dbm,
            s_t1=section.s_t1_dbm,
            d_max=section.d_max_m,
            hidden_excludes_cochannel=section.hidden_excludes_cochannel,
        )


@dataclass(frozen=True)
class NeighborCellList:
    """Result of one list construction with its set sizes (n_f = n_1 - n_2 + m)."""

    entries: tuple
    includes_macro: bool
    n_det: int
    n_1: int
    n_2: int
    m: int
    n_f: int
    scheme: str = "proposed"

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, fap_id) -> bool:
        return any(entry.fap_id == fap_id for entry in self.entries)

    @property
    def fap_ids(self) -> List[int]:
        return [entry.fap_id for entry in self.entries]

    def hidden_ids(self) -> Set[int]:
        return {e.fap_id for e in self.entries if e.provenance is Provenance.HIDDEN}


def detectable_set(measurements: Iterable[Measurement], s_t0: float) -> List[Measurement]:
    """Set A: accessible FAPs heard at or above S_T0 (inaccessible ones removed first)."""
    return [m for m in measurements if m.accessible and m.rssi_dbm >= s_t0]


def strong_set(detected: Iterable[Measurement], s_t1: float) -> List[Measurement]:
    """Set B: members of A at or above S_T1."""
    return [m for m in detected if m.rssi_dbm >= s_t1]


def same_frequency_set(strong: Iterable[Measurement], serving_channel: int) -> List[Measurement]:
    """Set C (FAP-connected flow): strong FAPs reusing the serving FAP's channel."""
    return [m for m in strong if m.frequency_channel == serving_channel]


def shared_channel_set(strong: Sequence[Measurement]) -> List[Measurement]:
    """
    Set C (macro-connected flow): within each channel shared by several strong
    FAPs, every member except the nearest.

    Nearest means smallest SON-known distance; without a known distance the
    highest RSSI stands in. Ties break on fap_id.
    """
    groups: Dict[int, List[Measurement]] = defaultdict(list)
    for m in strong:
        groups[m.frequency_channel].append(m)
    removed = []
    for members in groups.values():
        if len(members) < 2:
            continue
        members = sorted(members, key=_nearness_key)
        removed.extend(members[1:])
    return removed


def _nearness_key(m: Measurement):
    if m.distance_m is not None:
        return (0, m.distance_m, m.fap_id)
    return (1, -m.rssi_dbm, m.fap_id)


def hidden_set(
    measurements: Iterable[Measurement],
    known_locations: FrozenSet[int],
    s_t1: float,
    serving_channel: Optional[int],
    d_max: float,
    cochannel: Optional[Set[int]] = None,
    exclude_cochannel: bool = False,
) -> List[Measurement]:
    """
    Set D: SON-located FAPs within d_max that are weak or co-channel.

    Args:
        measurements: All measurements
        known_locations: FAP ids whose location the SON can supply
        s_t1: Second RSSI threshold
        serving_channel: Channel f_s of the serving FAP (None when macro-connected)
        d_max: Distance bound
        cochannel: Channels of C's groups (macro-connected flow)
        exclude_cochannel: Drop the co-channel disjunct's members entirely

    Returns:
        Members of D
    """
    channels: Set[int] = set(cochannel or ())
    if serving_channel is not None:
        channels.add(serving_channel)
    result = []
    for m in measurements:
        if not m.accessible or m.fap_id not in known_locations or m.distance_m is None:
            continue
        if m.distance_m > d_max:
            continue
        same_channel = m.frequency_channel in channels
        if exclude_cochannel and same_channel:
            continue
        if m.rssi_dbm < s_t1 or same_channel:
            result.append(m)
    return result


def _assemble(
    kept_strong: List[Measurement],
    hidden: List[Measurement],
    counts: dict,
    includes_macro: bool,
) -> NeighborCellList:
    strong_entries = [
        ListEntry(m.fap_id, Provenance.STRONG, m.rssi_dbm, m.distance_m)
        for m in sorted(kept_strong, key=lambda m: (-m.rssi_dbm, m.fap_id))
    ]
    seen = {e.fap_id for e in strong_entries}
    hidden_entries = [
        ListEntry(m.fap_id, Provenance.HIDDEN, m.rssi_dbm, m.distance_m)
        for m in sorted(hidden, key=lambda m: (m.distance_m, m.fap_id))
        if m.fap_id not in seen
    ]
    return NeighborCellList(
        entries=tuple(strong_entries + hidden_entries),
        includes_macro=includes_macro,
        **counts,
    )


def build_list_fap_connected(
    measurements: Sequence[Measurement],
    serving_channel: int,
    known_locations: FrozenSet[int],
    thresholds: Thresholds,
    macro_rssi_dbm: Optional[float] = None,
    serving_id: Optional[int] = None,
) -> NeighborCellList:
    """
    Proposed list for an MS attached to an FAP: E = (B \\ C) ∪ D.

    The macro BS is the fallback target whenever its signal is detected
    (or when no macro measurement is supplied).
    """
    measurements = [m for m in measurements if m.fap_id != serving_id]
    a = detectable_set(measurements, thresholds.s_t0)
    b = strong_set(a, thresholds.s_t1)
    c = same_frequency_set(b, serving_channel)
    c_ids = {m.fap_id for m in c}
    kept = [m for m in b if m.fap_id not in c_ids]
    d = hidden_set(
        measurements,
        known_locations,
        thresholds.s_t1,
        serving_channel,
        thresholds.d_max,
        exclude_cochannel=thresholds.hidden_excludes_cochannel,
    )
    counts = dict(n_det=len(a), n_1=len(b), n_2=len(c), m=len(d), n_f=len(b) - len(c) + len(d))
    includes_macro = macro_rssi_dbm is None or macro_rssi_dbm >= thresholds.s_t0
    return _assemble(kept, d, counts, includes_macro)


def build_list_macro_connected(
    measurements: Sequence[Measurement],
    known_locations: FrozenSet[int],
    thresholds: Thresholds,
) -> NeighborCellList:
    """Proposed list for an MS attached to the macro BS (per-channel nearest rule)."""
    a = detectable_set(measurements, thresholds.s_t0)
    b = strong_set(a, thresholds.s_t1)
    c = shared_channel_set(b)
    c_ids = {m.fap_id for m in c}
    kept = [m for m in b if m.fap_id not in c_ids]
    channels = {m.frequency_channel for m in c}
    d = hidden_set(
        measurements,
        known_locations,
        thresholds.s_t1,
        None,
        thresholds.d_max,
        cochannel=channels,
        exclude_cochannel=thresholds.hidden_excludes_cochannel,
    )
    counts = dict(n_det=len(a), n_1=len(b), n_2=len(c), m=len(d), n_f=len(b) - len(c) + len(d))
    return _assemble(kept, d, counts, includes_macro=False)


def build_list_traditional(
    measurements: Sequence[Measurement],
    s_t0: float,
    macro_rssi_dbm: Optional[float] = None,
    serving_id: Optional[int] = None,
) -> NeighborCellList:
    """Baseline list: every accessible FAP heard at or above S_T0, strongest first."""
    a = detectable_set([m for m in measurements if m.fap_id != serving_id], s_t0)
    entries = tuple(
        ListEntry(m.fap_id, Provenance.STRONG, m.rssi_dbm, m.distance_m)
        for m in sorted(a, key=lambda m: (-m.rssi_dbm, m.fap_id))
    )
    includes_macro = macro_rssi_dbm is not None and macro_rssi_dbm >= s_t0
    return NeighborCellList(
        entries=entries,
        includes_macro=includes_macro,
        n_det=len(a),
        n_1=len(a),
        n_2=0,
        m=0,
        n_f=len(a),
        scheme="traditional",
    )


def macro_known_locations(topology: Topology, detected_ids: Iterable[int]) -> FrozenSet[int]:
    """SON knowledge of the macro BS: every detected FAP and its coordination set."""
    known: Set[int] = set()
    for fap_id in detected_ids:
        known.add(fap_id)
        known.update(topology.coordination_set(fap_id))
    return frozenset(known)


def collect_measurements(
    env: RadioEnvironment,
    ms_position: Point,
    user_id: Optional[int],
    known: FrozenSet[int] = frozenset(),
) -> List[Measurement]:
    """
    Measure every FAP inside the measurement range, plus every SON-known FAP.

    Distances are attached only to SON-known FAPs.
    """
    topology = env.topology
    if not topology.faps:
        return []
    d = topology.distances_from(ms_position)
    in_range = d <= env.params.measurement_range_m
    if known:
        known_idx = [topology.index_of(fid) for fid in known]
        in_range[known_idx] = True
    indices = np.nonzero(in_range)[0]
    levels = env.fap_rssi_many(indices, ms_position)
    result = []
    for i, level in zip(indices, levels):
        fap = topology.faps[i]
        result.append(
            Measurement(
                fap_id=fap.fap_id,
                rssi_dbm=float(level),
                frequency_channel=fap.frequency_channel,
                distance_m=float(d[i]) if fap.fap_id in known else None,
                accessible=fap.is_accessible(user_id),
            )
        )
    return result


def measure_for_macro(env: RadioEnvironment, ms_position: Point, user_id: Optional[int], thresholds: Thresholds):
    """
    Measurements for a macro-attached MS with the macro BS's SON knowledge applied.

    Returns:
        (measurements, known_locations)
    """
    raw = collect_measurements(env, ms_position, user_id)
    detected = [m.fap_id for m in detectable_set(raw, thresholds.s_t0)]
    known = macro_known_locations(env.topology, detected)
    if not known:
        return raw, known
    return collect_measurements(env, ms_position, user_id, known), known


