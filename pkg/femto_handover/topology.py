"""Scenario topology - macrocell, FAPs, walls, channels and SON coordination."""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from femto_handover.config import ScenarioConfig, TopologySection
from femto_handover.errors import ConfigurationError, UnknownCellError

logger = logging.getLogger(__name__)

Point = Tuple[float, float]


class AccessMode(Enum):
    """FAP access control."""

    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True)
class MacroCell:
    """The overlaid macrocellular BS."""

    position: Point = (0.0, 0.0)
    height: float = 100.0
    tx_power_w: float = 1500.0
    radius: float = 1000.0

    @property
    def tx_power_dbm(self) -> float:
        return 10 * np.log10(self.tx_power_w * 1000.0)


@dataclass(frozen=True)
class FapDescriptor:
    """One femtocell access point."""

    fap_id: int
    position: Point
    height: float = 2.0
    tx_power_mw: float = 10.0
    radius: float = 10.0
    frequency_channel: int = 0
    access_mode: AccessMode = AccessMode.OPEN
    authorized_users: FrozenSet[int] = frozenset()
    capacity: int = 4

    @property
    def tx_power_dbm(self) -> float:
        return 10 * np.log10(self.tx_power_mw)

    def is_accessible(self, user_id: Optional[int]) -> bool:
        """Open FAPs admit anyone; closed FAPs only their authorized users."""
        if self.access_mode is AccessMode.OPEN:
            return True
        return user_id is not None and user_id in self.authorized_users


@dataclass(frozen=True)
class Wall:
    """Obstacle segment; every crossing attenuates a femto link."""

    start: Point
    end: Point
    attenuation_db: float = 10.0

    def __post_init__(self):
        if self.attenuation_db < 0:
            raise ConfigurationError([f"wall attenuation must be >= 0, got {self.attenuation_db}"])


@dataclass(frozen=True)
class Topology:
    """Immutable geometric and administrative state of one scenario."""

    macro_bs: MacroCell
    faps: Tuple[FapDescriptor, ...]
    walls: Tuple[Wall, ...] = ()
    coordination_range: float = 30.0
    seed: int = 0
    channel_pool_size: int = 1
    frequency_warnings: Tuple[str, ...] = field(default=(), compare=False)

    @cached_property
    def _index(self) -> Dict[int, int]:
        index = {}
        for i, fap in enumerate(self.faps):
            if fap.fap_id in index:
                raise ConfigurationError([f"duplicate FAP id {fap.fap_id}"])
            index[fap.fap_id] = i
        return index

    @cached_property
    def positions(self) -> np.ndarray:
        """FAP positions as an (n, 2) array in collection order."""
        if not self.faps:
            return np.zeros((0, 2))
        return np.array([fap.position for fap in self.faps], dtype=float)

    @cached_property
    def channels(self) -> np.ndarray:
        """Frequency channel of every FAP in collection order."""
        return np.array([fap.frequency_channel for fap in self.faps], dtype=int)

    @cached_property
    def _wall_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.walls:
            empty = np.zeros((0, 2))
            return empty, empty, np.zeros(0)
        starts = np.array([w.start for w in self.walls], dtype=float)
        ends = np.array([w.end for w in self.walls], dtype=float)
        db = np.array([w.attenuation_db for w in self.walls], dtype=float)
        return starts, ends, db

    @cached_property
    def _coordination(self) -> Dict[int, FrozenSet[int]]:
        graph: Dict[int, FrozenSet[int]] = {}
        ids = [fap.fap_id for fap in self.faps]
        if not ids:
            return graph
        pts = self.positions
        # Pairwise distances, in row blocks to bound memory at large n
        neighbors: Dict[int, List[int]] = {fid: [] for fid in ids}
        block = 512
        for lo in range(0, len(ids), block):
            d = np.linalg.norm(pts[lo:lo + block, None, :] - pts[None, :, :], axis=2)
            rows, cols = np.nonzero(d <= self.coordination_range)
            for r, c in zip(rows, cols):
                i = lo + int(r)
                if i != int(c):
                    neighbors[ids[i]].append(ids[int(c)])
        for fid, members in neighbors.items():
            graph[fid] = frozenset(members)
        return graph

    def fap(self, fap_id: int) -> FapDescriptor:
        """
        Look up an FAP by id.

        Raises:
            UnknownCellError: no FAP with that id
        """
        try:
            return self.faps[self._index[fap_id]]
        except KeyError:
            raise UnknownCellError(f"unknown FAP id {fap_id!r}") from None

    def index_of(self, fap_id: int) -> int:
        self.fap(fap_id)
        return self._index[fap_id]

    def coordination_set(self, fap_id: int) -> FrozenSet[int]:
        """FAPs within coordination_range of fap_id (backhaul/SON level, walls ignored)."""
        self.fap(fap_id)
        return self._coordination[fap_id]

    def known_locations(self, serving: int) -> FrozenSet[int]:
        """
        Two-hop SON knowledge of the serving FAP.

        Returns:
            coordination_set(serving) plus the coordination sets of its members,
            without the serving FAP itself
        """
        direct = self.coordination_set(serving)
        known = set(direct)
        for member in direct:
            known.update(self._coordination[member])
        known.discard(serving)
        return frozenset(known)

    def covering_faps(self, position: Point) -> List[int]:
        """Ids of FAPs whose coverage disk contains position."""
        if not self.faps:
            return []
        d = np.linalg.norm(self.positions - np.asarray(position, dtype=float), axis=1)
        radii = np.array([fap.radius for fap in self.faps])
        return [self.faps[i].fap_id for i in np.nonzero(d <= radii)[0]]

    def distances_from(self, position: Point) -> np.ndarray:
        """Distance from position to every FAP, in collection order."""
        if not self.faps:
            return np.zeros(0)
        return np.linalg.norm(self.positions - np.asarray(position, dtype=float), axis=1)

    def wall_loss_db(self, a: Point, b: Point) -> float:
        """Total wall attenuation along the straight segment a-b."""
        starts, ends, db = self._wall_arrays
        if not len(db):
            return 0.0
        mask = _crossing_mask(starts, ends, np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        return float(db[mask].sum())

    def wall_losses_db(self, sources: np.ndarray, b: Point) -> np.ndarray:
        """wall_loss_db from every row of sources (k x 2) to b."""
        sources = np.asarray(sources, dtype=float).reshape(-1, 2)
        losses = np.zeros(len(sources))
        starts, ends, db = self._wall_arrays
        if not len(db) or not len(sources):
            return losses
        b = np.asarray(b, dtype=float)
        # a wall crossing a segment that ends at b lies within segment length + half its own length of b
        reach = np.linalg.norm(sources - b, axis=1).max()
        half = np.linalg.norm(ends - starts, axis=1) / 2
        near = np.linalg.norm((starts + ends) / 2 - b, axis=1) <= reach + half + 1e-6
        if not near.any():
            return losses
        starts, ends, db = starts[near], ends[near], db[near]
        block = 256
        for lo in range(0, len(sources), block):
            rows = sources[lo:lo + block, None, :]
            losses[lo:lo + block] = _crossing_mask(starts, ends, rows, b).astype(float) @ db
        return losses

    def wall_crossings(self, a: Point, b: Point) -> int:
        return count_wall_crossings(self.walls, a, b)

    def to_dict(self) -> dict:
        """JSON-compatible tree: {macro, faps[], walls[], coordination_range, seed}."""
        return {
            "macro": {
                "position": list(self.macro_bs.position),
                "height": self.macro_bs.height,
                "tx_power_w": self.macro_bs.tx_power_w,
                "radius": self.macro_bs.radius,
            },
            "faps": [
                {
                    "id": fap.fap_id,
                    "position": list(fap.position),
                    "height": fap.height,
                    "tx_power_mw": fap.tx_power_mw,
                    "radius": fap.radius,
                    "frequency_channel": fap.frequency_channel,
                    "access_mode": fap.access_mode.value,
                    "authorized_users": sorted(fap.authorized_users),
                    "capacity": fap.capacity,
                }
                for fap in self.faps
            ],
            "walls": [
                {"start": list(w.start), "end": list(w.end), "attenuation_db": w.attenuation_db}
                for w in self.walls
            ],
            "coordination_range": self.coordination_range,
            "channel_pool_size": self.channel_pool_size,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        """Rebuild a topology written by to_dict."""
        try:
            macro = data["macro"]
            topology = cls(
                macro_bs=MacroCell(
                    position=tuple(macro["position"]),
                    height=macro["height"],
                    tx_power_w=macro["tx_power_w"],
                    radius=macro["radius"],
                ),
                faps=tuple(
                    FapDescriptor(
                        fap_id=f["id"],
                        position=tuple(f["position"]),
                        height=f.get("height", 2.0),
                        tx_power_mw=f.get("tx_power_mw", 10.0),
                        radius=f.get("radius", 10.0),
                        frequency_channel=f.get("frequency_channel", 0),
                        access_mode=AccessMode(f.get("access_mode", "open")),
                        authorized_users=frozenset(f.get("authorized_users", ())),
                        capacity=f.get("capacity", 4),
                    )
                    for f in data["faps"]
                ),
                walls=tuple(
                    Wall(tuple(w["start"]), tuple(w["end"]), w.get("attenuation_db", 10.0))
                    for w in data.get("walls", ())
                ),
                coordination_range=data.get("coordination_range", 30.0),
                seed=data.get("seed", 0),
                channel_pool_size=data.get("channel_pool_size", 1),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError([f"malformed topology document: {e}"]) from e
        topology._index  # duplicate ids surface here
        return topology


def _crossing_mask(starts: np.ndarray, ends: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Proper intersection of segment a-b with every wall segment."""

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    o1 = orient(a, b, starts)
    o2 = orient(a, b, ends)
    o3 = orient(starts, ends, a)
    o4 = orient(starts, ends, b)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def count_wall_crossings(walls: Sequence[Wall], a: Point, b: Point) -> int:
    """
    Count walls properly intersected by the segment a-b.

    Touching an endpoint or running collinear does not count as a crossing.
    """
    if not walls:
        return 0
    starts = np.array([w.start for w in walls], dtype=float)
    ends = np.array([w.end for w in walls], dtype=float)
    return int(_crossing_mask(starts, ends, np.asarray(a, dtype=float), np.asarray(b, dtype=float)).sum())


def generate_topology(
    params: TopologySection,
    seed: int,
    macro_height_m: float = 100.0,
) -> Topology:
    """
    Place FAPs and walls uniformly at random inside the macrocell disk.

    Args:
        params: Topology section of the scenario configuration
        seed: Seed of the placement stream; identical seeds give identical topologies
        macro_height_m: Macro BS antenna height h_b

    Returns:
        Topology with channels unassigned (all on channel 0)

    Raises:
        ConfigurationError: n < 0 or r_f >= r_m
    """
    if params.n_faps < 0 or params.fap_radius_m >= params.macro_radius_m:
        raise ConfigurationError(
            [f"invalid topology parameters: n={params.n_faps}, r_f={params.fap_radius_m}, r_m={params.macro_radius_m}"]
        )
    rng = np.random.default_rng(seed)
    n = params.n_faps
    # Uniform on the disk: sqrt of a uniform radius fraction
    radius = params.macro_radius_m * np.sqrt(rng.random(n))
    angle = rng.uniform(0.0, 2 * np.pi, n)
    xs, ys = radius * np.cos(angle), radius * np.sin(angle)
    closed = rng.random(n) < params.closed_access_fraction

    faps = []
    for i in range(n):
        users: FrozenSet[int] = frozenset()
        mode = AccessMode.OPEN
        if closed[i]:
            mode = AccessMode.CLOSED
            k = min(params.authorized_users_per_fap, params.user_population)
            users = frozenset(int(u) for u in rng.choice(params.user_population, size=k, replace=False))
        faps.append(
            FapDescriptor(
                fap_id=i,
                position=(float(xs[i]), float(ys[i])),
                height=params.fap_height_m,
                tx_power_mw=params.fap_tx_power_mw,
                radius=params.fap_radius_m,
                access_mode=mode,
                authorized_users=users,
                capacity=params.fap_capacity,
            )
        )

    walls = []
    if n and params.wall_density > 0:
        count = int(rng.poisson(params.wall_density * n))
        anchors = rng.integers(0, n, size=count)
        # Walls cluster around houses: centre within 1.5 r_f of an FAP
        offset_r = 1.5 * params.fap_radius_m * np.sqrt(rng.random(count))
        offset_a = rng.uniform(0.0, 2 * np.pi, count)
        heading = rng.uniform(0.0, np.pi, count)
        half = params.wall_length_m / 2
        for j in range(count):
            cx = xs[anchors[j]] + offset_r[j] * np.cos(offset_a[j])
            cy = ys[anchors[j]] + offset_r[j] * np.sin(offset_a[j])
            dx, dy = half * np.cos(heading[j]), half * np.sin(heading[j])
            walls.append(
                Wall(
                    (float(cx - dx), float(cy - dy)),
                    (float(cx + dx), float(cy + dy)),
                    params.wall_attenuation_db,
                )
            )

    logger.debug("generated topology seed=%d with %d FAPs and %d walls", seed, n, len(walls))
    return Topology(
        macro_bs=MacroCell(
            height=macro_height_m,
            tx_power_w=params.macro_tx_power_w,
            radius=params.macro_radius_m,
        ),
        faps=tuple(faps),
        walls=tuple(walls),
        coordination_range=params.coordination_range_m,
        seed=seed,
    )


def allocate_frequencies(topology: Topology, channel_pool_size: int) -> Topology:
    """
    Greedy colouring of the coverage-overlap graph in FAP-id order.

    Overlapping FAPs (centre distance < r_a + r_b) get distinct channels while
    the pool allows it; otherwise the channel with the fewest same-channel
    overlaps is taken and a warning is recorded. Among the free channels an
    FAP takes the one at position fap_id modulo the number of free channels.

    Returns:
        New Topology with frequency_channel set on every FAP
    """
    if channel_pool_size < 1:
        raise ConfigurationError([f"channel_pool_size must be >= 1, got {channel_pool_size}"])
    order = sorted(range(len(topology.faps)), key=lambda i: topology.faps[i].fap_id)
    pts = topology.positions
    radii = np.array([fap.radius for fap in topology.faps]) if topology.faps else np.zeros(0)
    channels = np.full(len(topology.faps), -1, dtype=int)
    warnings: List[str] = []
    for i in order:
        d = np.linalg.norm(pts - pts[i], axis=1) if len(pts) else np.zeros(0)
        overlapping = np.nonzero((d < radii + radii[i]) & (channels >= 0))[0]
        overlapping = overlapping[overlapping != i]
        used = np.bincount(channels[overlapping], minlength=channel_pool_size)
        free = np.nonzero(used == 0)[0]
        if len(free):
            channels[i] = int(free[topology.faps[i].fap_id % len(free)])
        else:
            channels[i] = int(np.argmin(used))
            message = (
                f"channel pool of {channel_pool_size} exhausted at FAP {topology.faps[i].fap_id}; "
                f"channel {channels[i]} shared with {int(used[channels[i]])} overlapping FAP(s)"
            )
            warnings.append(message)
            logger.debug(message)
    faps = tuple(replace(fap, frequency_channel=int(ch)) for fap, ch in zip(topology.faps, channels))
    return replace(
        topology,
        faps=faps,
        channel_pool_size=channel_pool_size,
        frequency_warnings=tuple(warnings),
    )


def build_topology(config: ScenarioConfig, seed: int, n_faps: Optional[int] = None, warn: bool = True) -> Topology:
    """Generate and channel-allocate the topology described by a scenario config."""
    params = config.topology
    if n_faps is not None:
        params = params.model_copy(update={"n_faps": n_faps})
    topology = generate_topology(params, seed, macro_height_m=config.radio.macro_height_m)
    topology = allocate_frequencies(topology, params.channel_pool_size)
    if warn and topology.frequency_warnings:
        logger.warning(
            "channel pool of %d exhausted at %d FAP(s) (seed %d)",
            params.channel_pool_size,
            len(topology.frequency_warnings),
            seed,
        )
    return topology
