"""Experiment configuration: flat ``key=value`` files, CLI overrides, unit conversion.

Every tunable lives in :class:`ExperimentConfig` as a flat field so that a
config file, ``--set key=value`` overrides and the ``config.echo`` written into
each run directory all share one representation.  dB/dBm quantities are kept in
the log domain here and converted to linear units exactly once, when a
:class:`RadioConfig` is built.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised for malformed or out-of-range configuration values."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RadioConfig:
    """Physical-layer parameters in linear units.

    ``noise_power`` and ``gbu_power`` are in watts, ``gfu_max_snr`` is the
    largest transmit SNR a GFU can reach (transmit power over noise power).
    """

    num_antennas: int = 3
    rician_factor: float = 1.0
    noise_power: float = dbm_to_watt(-110.0)
    gbu_power: float = dbm_to_watt(23.0)
    gfu_max_snr: float = db_to_linear(133.0)
    bandwidth: float = 1e6
    target_rate: float = 0.5
    pathloss_alpha: float = 3.0
    pathloss_ref_gain: float = db_to_linear(-120.0)
    pathloss_ref_km: float = 1.0
    d_min_km: float = 0.05

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ConfigError("num_antennas must be >= 1")
        if self.rician_factor < 0:
            raise ConfigError("rician_factor must be >= 0")
        for name in ("noise_power", "gbu_power", "gfu_max_snr", "bandwidth",
                     "pathloss_ref_gain", "pathloss_ref_km"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.target_rate < 0:
            raise ConfigError("target_rate must be >= 0")

    @property
    def sinr_threshold(self) -> float:
        """``2**R - 1``: the SINR needed to sustain the target rate."""
        return 2.0 ** self.target_rate - 1.0


_CHOICES = {
    "cascade_mode": ("paper-literal", "full-sum"),
}


@dataclass
class ExperimentConfig:
    # radio / geometry
    antennas: int = 3
    rician_factor: float = 1.0
    noise_dbm: float = -110.0
    gbu_power_dbm: float = 23.0
    gfu_max_snr_db: float = 133.0
    bandwidth_hz: float = 1e6
    target_rate: float = 0.5
    placement_std_km: float = 1.5
    mobility_std_m: float = 50.0
    pathloss_alpha: float = 3.0
    pathloss_ref_db: float = -120.0
    d_min_m: float = 50.0
    # access / AoI
    num_gbus: int = 3
    num_gfus: int = 5
    generation_period: int = 3
    horizon: int = 100
    cascade_mode: str = "paper-literal"
    literal_eq13: bool = False
    fixed_levels: int = 0          # > 0: exogenous level supply instead of budgets
    # learning
    clip_ratio: float = 0.1
    gamma: float = 0.99
    actor_lr: float = 3e-4
    critic_lr: float = 1e-3
    epochs: int = 5
    minibatch_size: int = 64
    lower_update_period: int = 64
    upper_update_period: int = 256
    hidden: int = 64
    init_log_std: float = -0.6931471805599453
    min_log_std: float = -4.605170185988091
    penalty: float = 10.0
    normalize_advantages: bool = True
    # harness
    policy: str = "learned"
    episodes: int = 6000
    eval_episodes: int = 20
    eval_seeds: tuple[int, ...] = tuple(range(1000, 1010))
    scale_factors: tuple[int, ...] = (1, 2, 3, 4, 5)
    sweep_policies: tuple[str, ...] = ("fixed:0.2", "adaptive", "state-dependent")
    oracle_fixed_p: float = 0.5
    oracle_slots: int = 1_000_000
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.num_gbus < 1 or self.num_gfus < 1:
            raise ConfigError("num_gbus and num_gfus must be >= 1")
        if self.generation_period < 1 or self.horizon < 1:
            raise ConfigError("generation_period and horizon must be >= 1")
        if self.antennas < 1:
            raise ConfigError("antennas must be >= 1")
        if not 0.0 < self.clip_ratio < 1.0:
            raise ConfigError("clip_ratio must lie in (0, 1)")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        for name in ("actor_lr", "critic_lr", "epochs", "minibatch_size",
                     "lower_update_period", "upper_update_period", "hidden",
                     "placement_std_km"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.episodes < 0 or self.eval_episodes < 1:
            raise ConfigError("episodes must be >= 0 and eval_episodes >= 1")
        if not 0 <= self.fixed_levels <= 64 * self.num_gbus:
            raise ConfigError("fixed_levels must lie in [0, 64 * num_gbus]")
        if not 0.0 <= self.oracle_fixed_p <= 1.0 or self.oracle_slots < 1:
            raise ConfigError("oracle_fixed_p must lie in [0, 1] and oracle_slots be >= 1")
        if not self.scale_factors or min(self.scale_factors) < 1:
            raise ConfigError("scale_factors must be positive integers")
        if self.mobility_std_m < 0:
            raise ConfigError("mobility_std_m must be >= 0")
        for key, allowed in _CHOICES.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}")
        # Deferred import keeps config free of policy machinery at import time.
        from .baselines import parse_policy
        try:
            for text in (self.policy,) + tuple(self.sweep_policies):
                parse_policy(text)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def radio(self) -> RadioConfig:
        return RadioConfig(
            num_antennas=self.antennas,
            rician_factor=self.rician_factor,
            noise_power=dbm_to_watt(self.noise_dbm),
            gbu_power=dbm_to_watt(self.gbu_power_dbm),
            gfu_max_snr=db_to_linear(self.gfu_max_snr_db),
            bandwidth=self.bandwidth_hz,
            target_rate=self.target_rate,
            pathloss_alpha=self.pathloss_alpha,
            pathloss_ref_gain=db_to_linear(self.pathloss_ref_db),
            d_min_km=self.d_min_m / 1000.0,
        )

    def replace(self, **changes: Any) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # ----- serialization -------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name}={_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        pairs = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            pairs.append(line)
        return cls().with_overrides(pairs)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def with_overrides(self, assignments: list[str]) -> "ExperimentConfig":
        known = {f.name: f for f in fields(self)}
        changes: dict[str, Any] = {}
        for item in assignments:
            key, sep, value = item.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise ConfigError(f"override {item!r} is not key=value")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = _parse_value(known[key], value.strip())
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(f: dataclasses.Field, text: str) -> Any:
    default = f.default if f.default is not dataclasses.MISSING else None
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else int
            return tuple(kind(v.strip()) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {f.name}: {text!r}") from exc
    return text


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RadioConfig",
    "db_to_linear",
    "dbm_to_watt",
]
