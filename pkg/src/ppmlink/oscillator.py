"""Free-running oscillator model: frequency offset ramp plus Wiener phase."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import OscillatorConfig

DEFAULT_SAMPLE_INTERVAL = 1_000_000_000  # 1 ms in ps
PS_PER_S = 1e12


@dataclass(frozen=True)
class ClockPath:
    """Sampled phase error ``phi`` (ps) on a uniform grid starting at t=0."""

    sample_interval: int
    phase: np.ndarray
    span: int
    white_phase_noise_rms: float = 0.0

    @property
    def sample_times(self) -> np.ndarray:
        return np.arange(len(self.phase), dtype=np.float64) * self.sample_interval

    def phase_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if t.size and (t.min() < 0 or t.max() > self.span):
            raise ValueError("time outside the realized clock span")
        x = t / self.sample_interval
        i = np.minimum(x.astype(np.int64), len(self.phase) - 2)
        frac = x - i
        return self.phase[i] + frac * (self.phase[i + 1] - self.phase[i])


def composite_clock(tx: OscillatorConfig, rx: OscillatorConfig) -> OscillatorConfig:
    """Relative clock seen by the receiver (tx phase measured in rx time)."""
    return OscillatorConfig(
        fractional_frequency_offset=tx.fractional_frequency_offset - rx.fractional_frequency_offset,
        white_phase_noise_rms=math.hypot(tx.white_phase_noise_rms, rx.white_phase_noise_rms),
        random_walk_diffusion=tx.random_walk_diffusion + rx.random_walk_diffusion,
    )


def realize_clock(
    cfg: OscillatorConfig,
    span: int,
    sample_interval: int = DEFAULT_SAMPLE_INTERVAL,
    rng: np.random.Generator | None = None,
) -> ClockPath:
    """Draw one phase-error path over ``[0, span]``.

    Increments between samples are independent N(0, D*dt) with D in ps^2/s;
    the offset contributes ``offset * t`` exactly.
    """
    if span <= 0 or sample_interval <= 0:
        raise ValueError("span and sample_interval must be positive")
    n_intervals = max(1, -(-int(span) // int(sample_interval)))
    t = np.arange(n_intervals + 1, dtype=np.float64) * sample_interval
    phase = cfg.fractional_frequency_offset * t
    if cfg.random_walk_diffusion > 0:
        if rng is None:
            raise ValueError("an rng is required when random_walk_diffusion > 0")
        step_sd = math.sqrt(cfg.random_walk_diffusion * sample_interval / PS_PER_S)
        walk = np.concatenate([[0.0], np.cumsum(rng.normal(0.0, step_sd, n_intervals))])
        phase = phase + walk
    return ClockPath(int(sample_interval), phase, int(span), cfg.white_phase_noise_rms)


def to_local_time(path: ClockPath, ideal_time) -> np.ndarray | float:
    """Map ideal transmitter-grid time to the local time base (ps)."""
    scalar = np.ndim(ideal_time) == 0
    t = np.asarray(ideal_time, dtype=np.float64)
    out = t + path.phase_at(t)
    return float(out) if scalar else out


def diffusion_for_drift(rms_drift_ps: float, tick_spacing_s: float) -> float:
    """Diffusion (ps^2/s) whose phase walk has RMS ``rms_drift_ps`` over one tick spacing."""
    return rms_drift_ps**2 / tick_spacing_s
