"""Scenario configuration - TOML file, pydantic schema, reference-scenario defaults."""

import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from femto_handover.errors import ConfigurationError

SCHEMA_VERSION = 1


class _Section(BaseModel):
    """Strict section: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)


class TopologySection(_Section):
    """Geometry and administration of one macrocell with its FAPs."""

    n_faps: int = Field(1000, ge=0)
    macro_radius_m: float = Field(1000.0, gt=0)
    macro_tx_power_w: float = Field(1500.0, gt=0)
    fap_radius_m: float = Field(10.0, gt=0)
    fap_height_m: float = Field(2.0, gt=0)
    fap_tx_power_mw: float = Field(10.0, gt=0, le=10.0)
    fap_capacity: int = Field(4, ge=1)
    channel_pool_size: int = Field(4, ge=1)
    coordination_range_m: float = Field(30.0, ge=0)
    wall_density: float = Field(2.0, ge=0, description="expected walls per FAP")
    wall_length_m: float = Field(15.0, gt=0)
    wall_attenuation_db: float = Field(10.0, ge=0)
    closed_access_fraction: float = Field(0.5, ge=0, le=1)
    authorized_users_per_fap: int = Field(4, ge=1)
    user_population: int = Field(1000, ge=1)

    @model_validator(mode="after")
    def _cross_checks(self):
        problems = []
        if self.fap_radius_m >= self.macro_radius_m:
            problems.append(
                f"topology.fap_radius_m ({self.fap_radius_m}) must be smaller than "
                f"topology.macro_radius_m ({self.macro_radius_m})"
            )
        elif self.femto_area_fraction > 1.0:
            problems.append(
                f"topology.n_faps * (fap_radius_m / macro_radius_m)^2 = "
                f"{self.femto_area_fraction:.4g} exceeds 1"
            )
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def femto_area_fraction(self) -> float:
        return self.n_faps * (self.fap_radius_m / self.macro_radius_m) ** 2


class RadioSection(_Section):
    """Propagation parameters of the femto and macro links."""

    femto_freq_mhz: float = Field(1800.0, gt=0)
    macro_freq_mhz: float = Field(1800.0, gt=0)
    indoor_loss_exponent: float = Field(30.0, ge=0)
    floor_loss_db: float = Field(0.0, ge=0)
    macro_height_m: float = Field(100.0, gt=0)
    mobile_height_m: float = Field(2.0, gt=0)
    shadow_sigma_db: float = Field(8.0, ge=0)
    penetration_db: float = Field(20.0, ge=0)
    noise_floor_dbm: float = -104.0
    hata_hb_coefficient: float = 3.82
    min_distance_m: float = Field(1.0, gt=0)
    measurement_range_m: float = Field(200.0, gt=0)


class NeighborSection(_Section):
    """Thresholds of the neighbor cell list construction."""

    s_t0_dbm: float = -90.0
    s_t1_dbm: float = -75.0
    d_max_m: float = Field(20.0, ge=0)
    hidden_excludes_cochannel: bool = False

    @model_validator(mode="after")
    def _ordered_thresholds(self):
        if self.s_t1_dbm <= self.s_t0_dbm:
            raise ValueError(
                f"neighbor.s_t1_dbm ({self.s_t1_dbm}) must be greater than "
                f"neighbor.s_t0_dbm ({self.s_t0_dbm})"
            )
        return self


class TrafficSection(_Section):
    """Call arrival, holding and mobility figures plus solver controls."""

    call_duration_s: float = Field(120.0, gt=0)
    femto_dwell_s: float = Field(360.0, gt=0)
    macro_dwell_s: float = Field(240.0, gt=0)
    total_arrival_rate: float = Field(0.5, ge=0, description="calls/s over the macrocell")
    density_ratio: float = Field(20.0, ge=0, description="femto-area : macro-only arrival density")
    adaptive_share: float = Field(0.5, ge=0, le=1)
    alpha: float = Field(0.5, ge=0, le=1)
    n_channels: Optional[int] = Field(None, ge=1)
    s_channels: Optional[int] = Field(None, ge=0)
    tol: float = Field(1e-9, gt=0)
    max_iter: int = Field(1000, ge=1)
    damping: float = Field(1.0, gt=0, le=1)


class CacSection(_Section):
    """Admission thresholds and macrocell bandwidth classes."""

    macro_capacity_kbps: float = Field(6000.0, gt=0)
    non_adaptive_kbps: float = Field(64.0, gt=0)
    adaptive_max_kbps: float = Field(56.0, gt=0)
    adaptive_min_kbps: float = Field(28.0, gt=0)
    gamma1_db: float = 10.0
    gamma2_db: float = 12.0
    restore_qos: bool = False
    macro_model: Literal["bandwidth", "channels"] = "bandwidth"

    @model_validator(mode="after")
    def _cross_checks(self):
        problems = []
        if self.gamma2_db <= self.gamma1_db:
            problems.append(
                f"cac.gamma2_db ({self.gamma2_db}) must be greater than cac.gamma1_db ({self.gamma1_db})"
            )
        if self.adaptive_min_kbps > self.adaptive_max_kbps:
            problems.append(
                f"cac.adaptive_min_kbps ({self.adaptive_min_kbps}) must not exceed "
                f"cac.adaptive_max_kbps ({self.adaptive_max_kbps})"
            )
        if problems:
            raise ValueError("; ".join(problems))
        return self


class SignalingSection(_Section):
    """Per-step latency of the handover call flows."""

    air_delay_ms: float = Field(1.0, ge=0)
    backhaul_delay_ms: float = Field(5.0, ge=0)
    self_delay_ms: float = Field(0.0, ge=0)
    preauth_failure_prob: float = Field(0.0, ge=0, le=1)


class SimSection(_Section):
    """Discrete-event run controls."""

    horizon_s: float = Field(1e5, gt=0, description="measured time after warm-up")
    warmup_fraction: float = Field(0.1, ge=0, lt=1)
    ledger_check_interval: int = Field(1000, ge=1)
    target_candidates: int = Field(3, ge=1, description="F2F targets are drawn among this many nearest FAPs")
    alpha_feedback: bool = False
    decision_log: Optional[str] = None

    @property
    def warmup_s(self) -> float:
        return self.warmup_fraction * self.horizon_s


class ScenarioConfig(_Section):
    """Complete scenario; every reference value pre-populated."""

    schema_version: int = SCHEMA_VERSION
    topology: TopologySection = TopologySection()
    radio: RadioSection = RadioSection()
    neighbor: NeighborSection = NeighborSection()
    traffic: TrafficSection = TrafficSection()
    cac: CacSection = CacSection()
    signaling: SignalingSection = SignalingSection()
    sim: SimSection = SimSection()

    @model_validator(mode="after")
    def _scenario_checks(self):
        problems = []
        if self.schema_version != SCHEMA_VERSION:
            problems.append(f"schema_version {self.schema_version} is not supported (expected {SCHEMA_VERSION})")
        edge_rssi = femto_edge_rssi_dbm(self)
        if edge_rssi < self.neighbor.s_t1_dbm:
            problems.append(
                f"RSSI at the femtocell edge ({edge_rssi:.2f} dBm) is below neighbor.s_t1_dbm "
                f"({self.neighbor.s_t1_dbm}); check radio.indoor_loss_exponent and topology.fap_tx_power_mw"
            )
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def n_channels(self) -> int:
        """Macro base channels N_ch (derived from the bandwidth classes when unset)."""
        if self.traffic.n_channels is not None:
            return self.traffic.n_channels
        return derive_channels(self.cac, self.traffic.adaptive_share)[0]

    @property
    def s_channels(self) -> int:
        """Degradation channels S_ch (derived when unset)."""
        if self.traffic.s_channels is not None:
            return self.traffic.s_channels
        return derive_channels(self.cac, self.traffic.adaptive_share)[1]

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ScenarioConfig":
        """
        Return a re-validated copy with dotted-key overrides applied.

        Args:
            overrides: Mapping such as {"topology.n_faps": 10}

        Returns:
            New ScenarioConfig
        """
        data = self.model_dump()
        for key, value in overrides.items():
            _assign(data, key, value)
        return _validate(data)


def femto_edge_rssi_dbm(config: ScenarioConfig) -> float:
    """RSSI of a wall-free link at distance r_f with the configured FAP power."""
    radio = config.radio
    distance = max(config.topology.fap_radius_m, radio.min_distance_m)
    loss = (
        20 * math.log10(radio.femto_freq_mhz)
        + radio.indoor_loss_exponent * math.log10(distance)
        + radio.floor_loss_db
        - 28
    )
    return 10 * math.log10(config.topology.fap_tx_power_mw) - loss


def derive_channels(cac: CacSection, adaptive_share: float) -> tuple:
    """
    Map the kbps model onto the channelised macrocell chain.

    N_ch = floor(C / mean requested bandwidth); S_ch counts the channels that
    full degradation of the adaptive share frees.

    Returns:
        (N_ch, S_ch)
    """
    mean_request = (1 - adaptive_share) * cac.non_adaptive_kbps + adaptive_share * cac.adaptive_max_kbps
    n_ch = max(1, int(cac.macro_capacity_kbps // mean_request))
    slack = cac.adaptive_max_kbps - cac.adaptive_min_kbps
    s_ch = int(n_ch * adaptive_share * slack // mean_request)
    return n_ch, s_ch


def load_config(path: Optional[Union[str, Path]] = None) -> ScenarioConfig:
    """
    Load and validate a scenario file.

    Args:
        path: TOML file; None or an empty file yields all defaults

    Returns:
        Fully validated ScenarioConfig

    Raises:
        ConfigurationError: parse error, unknown key, bad value or cross-field violation
    """
    if path is None:
        return ScenarioConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError([f"cannot read {path}: {e}"]) from e
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError([f"{path}: {e}"]) from e
    return _validate(data)


def parse_override(text: str) -> tuple:
    """Split "section.key=value" and decode the value as a TOML scalar."""
    if "=" not in text:
        raise ConfigurationError([f"override '{text}' is not of the form key=value"])
    key, raw = text.split("=", 1)
    key, raw = key.strip(), raw.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def _validate(data: Mapping[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(dict(data))
    except ValidationError as e:
        raise ConfigurationError(_format_errors(e)) from e


def _format_errors(error: ValidationError) -> List[str]:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        message = item["msg"]
        if item["type"] == "extra_forbidden":
            message = f"unknown key '{item['loc'][-1]}'"
        elif message.startswith("Value error, "):
            message = message[len("Value error, "):]
        messages.append(f"{location}: {message}" if location else message)
    return messages


def _assign(data: Dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = data
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            raise ConfigurationError([f"unknown section '{part}' in override '{dotted}'"])
        node = child
    node[parts[-1]] = value
