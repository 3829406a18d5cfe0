"""Radio propagation - indoor and macrocell path loss, RSSI and SNIR."""

import math
from typing import Dict, Hashable, Optional, Tuple, Union

import numpy as np

from femto_handover.config import RadioSection
from femto_handover.topology import Point, Topology

MACRO = "macro"
"""Cell key of the overlaid macrocell BS (FAPs are keyed by their integer id)."""

CellId = Union[int, str]


def dbm_to_mw(dbm):
    return np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)


def femto_path_loss(
    freq_mhz: float,
    distance_m: float,
    wall_crossings: int = 0,
    wall_db: float = 10.0,
    loss_exponent: float = 30.0,
    floor_loss_db: float = 0.0,
    min_distance_m: float = 1.0,
) -> float:
    """
    Indoor femtocell path loss plus wall attenuation.

    Args:
        freq_mhz: Carrier frequency in MHz
        distance_m: Link distance in metres, clamped to min_distance_m
        wall_crossings: Walls crossed by the link
        wall_db: Attenuation per crossing
        loss_exponent: Power-loss coefficient N_pl
        floor_loss_db: Floor penetration term L_f

    Returns:
        Path loss in dB
    """
    d = max(float(distance_m), min_distance_m)
    return (
        20 * math.log10(freq_mhz)
        + loss_exponent * math.log10(d)
        + floor_loss_db
        - 28
        + wall_crossings * wall_db
    )


def hata_mobile_correction(freq_mhz: float, h_m: float) -> float:
    """Small/medium-city Hata correction a(h_m)."""
    log_f = math.log10(freq_mhz)
    return (1.1 * log_f - 0.7) * h_m - (1.56 * log_f - 0.8)


def macro_path_loss(
    freq_mhz: float,
    distance_km: float,
    h_b: float,
    h_m: float,
    shadow_db: float = 0.0,
    penetration_db: float = 0.0,
    hb_coefficient: float = 3.82,
) -> float:
    """
    Macrocell path loss (Hata form).

    The h_b coefficient defaults to the printed 3.82; pass 13.82 for the
    standard COST-231 Hata form.

    Args:
        freq_mhz: Carrier frequency in MHz
        distance_km: BS-MS distance in km (> 0)
        h_b: BS antenna height in metres
        h_m: MS antenna height in metres
        shadow_db: Lognormal shadowing sample L_sh
        penetration_db: Building penetration loss L_pen

    Returns:
        Path loss in dB
    """
    log_f = math.log10(freq_mhz)
    log_hb = math.log10(h_b)
    return (
        36.55
        + 26.16 * log_f
        - hb_coefficient * log_hb
        - hata_mobile_correction(freq_mhz, h_m)
        + (44.9 - 6.55 * log_hb) * math.log10(distance_km)
        + shadow_db
        + penetration_db
    )


def rssi(tx_power_dbm: float, path_loss_db: float) -> float:
    """Received signal strength in dBm."""
    return tx_power_dbm - path_loss_db


class ShadowingField:
    """One lognormal shadowing sample per (position, base station) per epoch."""

    def __init__(self, sigma_db: float, rng: np.random.Generator):
        self.sigma_db = sigma_db
        self.rng = rng
        self._samples: Dict[Tuple[Hashable, Point], float] = {}

    def sample(self, cell: Hashable, position: Point) -> float:
        key = (cell, (round(position[0], 6), round(position[1], 6)))
        if key not in self._samples:
            self._samples[key] = float(self.rng.normal(0.0, self.sigma_db)) if self.sigma_db > 0 else 0.0
        return self._samples[key]

    def new_epoch(self):
        """Forget previous samples; the next evaluation draws fresh values."""
        self._samples.clear()


class RadioEnvironment:
    """Topology plus radio parameters: RSSI and SNIR at any MS position."""

    def __init__(
        self,
        topology: Topology,
        params: Optional[RadioSection] = None,
        shadowing: Optional[ShadowingField] = None,
    ):
        """
        Initialize radio environment.

        Args:
            topology: Scenario topology
            params: Radio section (defaults to the reference scenario)
            shadowing: Shadowing sampler for macro links; None means no shadowing
        """
        self.topology = topology
        self.params = params or RadioSection()
        self.shadowing = shadowing

    def fap_rssi(self, fap_id: int, position: Point) -> float:
        """RSSI at position from one FAP, walls included."""
        fap = self.topology.fap(fap_id)
        distance = math.dist(fap.position, position)
        loss = femto_path_loss(
            self.params.femto_freq_mhz,
            distance,
            loss_exponent=self.params.indoor_loss_exponent,
            floor_loss_db=self.params.floor_loss_db,
            min_distance_m=self.params.min_distance_m,
        ) + self.topology.wall_loss_db(fap.position, position)
        return rssi(fap.tx_power_dbm, loss)

    def fap_rssi_many(self, indices: np.ndarray, position: Point) -> np.ndarray:
        """Vectorised fap_rssi for FAPs given by collection index."""
        if not len(indices):
            return np.zeros(0)
        faps = self.topology.faps
        pts = self.topology.positions[indices]
        d = np.maximum(np.linalg.norm(pts - np.asarray(position, dtype=float), axis=1), self.params.min_distance_m)
        loss = (
            20 * np.log10(self.params.femto_freq_mhz)
            + self.params.indoor_loss_exponent * np.log10(d)
            + self.params.floor_loss_db
            - 28
        )
        walls = self.topology.wall_losses_db(pts, position)
        tx = np.array([faps[i].tx_power_dbm for i in indices])
        return tx - loss - walls

    def macro_rssi(self, position: Point) -> float:
        """RSSI at position from the macro BS (shadowing and penetration included)."""
        macro = self.topology.macro_bs
        distance_km = max(math.dist(macro.position, position), self.params.min_distance_m) / 1000.0
        shadow = self.shadowing.sample(MACRO, position) if self.shadowing else 0.0
        loss = macro_path_loss(
            self.params.macro_freq_mhz,
            distance_km,
            macro.height,
            self.params.mobile_height_m,
            shadow_db=shadow,
            penetration_db=self.params.penetration_db,
            hb_coefficient=self.params.hata_hb_coefficient,
        )
        return rssi(macro.tx_power_dbm, loss)

    def snir(self, position: Point, target: CellId) -> float:
        """
        SNIR of target at position, in dB.

        Interference is the linear sum of every other transmitter on the
        target's channel; the macro BS has a band of its own. Wall losses are
        evaluated for interferers inside the measurement range only.

        Raises:
            UnknownCellError: target is neither MACRO nor a known FAP id
        """
        if target == MACRO:
            return snir_db(self.macro_rssi(position), self.params.noise_floor_dbm)
        fap = self.topology.fap(target)
        signal_dbm = self.fap_rssi(target, position)
        faps = self.topology.faps
        same = np.nonzero(self.topology.channels == fap.frequency_channel)[0]
        same = same[same != self.topology.index_of(target)]
        interference_mw = 0.0
        if len(same):
            d = self.topology.distances_from(position)[same]
            near = d <= self.params.measurement_range_m
            if near.any():
                interference_mw += float(dbm_to_mw(self.fap_rssi_many(same[near], position)).sum())
            if (~near).any():
                far_d = d[~near]
                loss = (
                    20 * np.log10(self.params.femto_freq_mhz)
                    + self.params.indoor_loss_exponent * np.log10(far_d)
                    + self.params.floor_loss_db
                    - 28
                )
                tx = np.array([faps[i].tx_power_dbm for i in same[~near]])
                interference_mw += float(dbm_to_mw(tx - loss).sum())
        return snir_db(signal_dbm, self.params.noise_floor_dbm, interference_mw)


def snir(topology: Topology, radio_params: RadioSection, ms_position: Point, target_cell: CellId) -> float:
    """SNIR in dB of target_cell at ms_position (no shadowing)."""
    return RadioEnvironment(topology, radio_params).snir(ms_position, target_cell)


def snir_db(signal_dbm: float, noise_floor_dbm: float, interference_mw: float = 0.0) -> float:
    """Signal over noise plus interference, summed in the linear domain."""
    total = float(dbm_to_mw(noise_floor_dbm)) + interference_mw
    return signal_dbm - float(mw_to_dbm(total))
