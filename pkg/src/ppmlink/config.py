"""Configuration dataclasses for the link simulator.

All times are integer or float picoseconds unless a field name says
otherwise (``dark_count_rate`` is per second, ``random_walk_diffusion`` is
ps^2 per second).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

EXTINCTION_MODES = ("aggregate", "per_slot")


@dataclass(frozen=True)
class OscillatorConfig:
    """Free-running oscillator: static frequency offset plus random-walk phase."""

    fractional_frequency_offset: float = 0.0
    white_phase_noise_rms: float = 0.0
    random_walk_diffusion: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.fractional_frequency_offset) or abs(self.fractional_frequency_offset) >= 1e-3:
            raise ValueError("fractional_frequency_offset must satisfy |offset| < 1e-3")
        if self.white_phase_noise_rms < 0:
            raise ValueError("white_phase_noise_rms must be >= 0")
        if self.random_walk_diffusion < 0:
            raise ValueError("random_walk_diffusion must be >= 0")

    @property
    def is_ideal(self) -> bool:
        return (
            self.fractional_frequency_offset == 0
            and self.white_phase_noise_rms == 0
            and self.random_walk_diffusion == 0
        )


@dataclass(frozen=True)
class DetectorConfig:
    """Single-photon detector parameters (defaults: the SNSPD of the experiment)."""

    efficiency: float = 0.85
    dark_count_rate: float = 20.0
    dead_time: int = 60_000
    jitter_fwhm: float = 45.0
    extinction_ratio_db: float = 83.2
    extinction_mode: str = "aggregate"

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ValueError("efficiency must lie in [0, 1]")
        if self.dark_count_rate < 0:
            raise ValueError("dark_count_rate must be >= 0")
        if self.dead_time < 0:
            raise ValueError("dead_time must be >= 0")
        if self.jitter_fwhm < 0:
            raise ValueError("jitter_fwhm must be >= 0")
        if self.extinction_mode not in EXTINCTION_MODES:
            raise ValueError(f"extinction_mode must be one of {EXTINCTION_MODES}")

    @property
    def jitter_sigma(self) -> float:
        return self.jitter_fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class LinkConfig:
    """Frame geometry, photon flux, detector and clocks of one link run.

    ``slot_width`` is in ps; ``lambda_pulse`` is the mean number of photons
    per optical pulse incident on the detector (before efficiency).
    """

    ppm_order_exp: int = 19
    slot_width: int = 400
    guard_slots: int = 250
    clock_frame_slots: int = 250
    data_clock_ratio: int = 10
    lambda_pulse: float = 0.213
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    tx_clock: OscillatorConfig = field(default_factory=OscillatorConfig)
    rx_clock: OscillatorConfig = field(default_factory=OscillatorConfig)
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("ppm_order_exp", "slot_width", "guard_slots", "clock_frame_slots", "data_clock_ratio"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError(f"{name} must be an integer, got {value!r}")
        if not 2 <= self.ppm_order_exp <= 24:
            raise ValueError("ppm_order_exp must lie in 2..24")
        if self.slot_width <= 0:
            raise ValueError("slot_width must be > 0")
        if self.guard_slots < 0:
            raise ValueError("guard_slots must be >= 0")
        if self.clock_frame_slots < 1:
            raise ValueError("clock_frame_slots must be >= 1")
        if self.data_clock_ratio < 1:
            raise ValueError("data_clock_ratio must be >= 1")
        if not (self.lambda_pulse >= 0 and math.isfinite(self.lambda_pulse)):
            raise ValueError("lambda_pulse must be finite and >= 0")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> LinkConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> LinkConfig:
        """Build a config from a (possibly partial) nested mapping.

        Unknown keys raise ``ValueError`` so typos in config files are not
        silently ignored.
        """
        data = dict(data or {})
        nested = {"detector": DetectorConfig, "tx_clock": OscillatorConfig, "rx_clock": OscillatorConfig}
        kwargs: dict[str, Any] = {}
        known = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key not in known:
                raise ValueError(f"unknown LinkConfig field {key!r}")
            if key in nested:
                value = _sub_config(nested[key], value)
            else:
                value = _coerce(cls, key, value)
            kwargs[key] = value
        return cls(**kwargs)


def _sub_config(kind, value):
    if isinstance(value, kind):
        return value
    known = {f.name for f in fields(kind)}
    unknown = set(value) - known
    if unknown:
        raise ValueError(f"unknown {kind.__name__} field(s): {sorted(unknown)}")
    return kind(**{k: _coerce(kind, k, v) for k, v in value.items()})


def _coerce(kind, key, value):
    """Turn numeric strings into the field's type (YAML reads ``1e6`` as a string)."""
    if not isinstance(value, str):
        return value
    ftype = {f.name: f.type for f in fields(kind)}[key]
    try:
        if ftype == "float":
            return float(value)
        if ftype == "int":
            return int(value)
    except ValueError:
        raise ValueError(f"{kind.__name__}.{key}: cannot read {value!r} as {ftype}") from None
    return value
