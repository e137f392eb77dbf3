"""Photon-counting detector: Poisson detection, leakage, dark counts, jitter, dead time.

Receiver timestamps are integer picoseconds. Candidates falling outside
the recording window ``[0, span)`` are dropped before dead time is applied.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .config import DetectorConfig, LinkConfig
from .geometry import frame_geometry
from .oscillator import PS_PER_S, ClockPath, to_local_time
from .transmitter import DATA, PulseSchedule

SIGNAL, DARK, LEAK = 0, 1, 2
PROVENANCE_NAMES = {SIGNAL: "signal", DARK: "dark", LEAK: "leak"}
_PROVENANCE_CODES = {v: k for k, v in PROVENANCE_NAMES.items()}

RECORD_DTYPE = np.dtype([("timestamp", "<u8"), ("provenance", "u1")])


@dataclass(frozen=True)
class ChannelConfig:
    attenuation_db: float = 77.0
    launch_photons_per_pulse: float = 0.0

    def __post_init__(self):
        if self.attenuation_db < 0:
            raise ValueError("attenuation_db must be >= 0")

    @property
    def lambda_pulse(self) -> float:
        return incident_lambda(self.launch_photons_per_pulse, self.attenuation_db)


class DetectionRecord(NamedTuple):
    timestamp: int
    provenance: str
    origin_index: int  # pulse index in the schedule, -1 for dark counts


@dataclass(frozen=True)
class DetectionStream:
    """Accepted detections in time order.

    ``provenance`` and ``origin`` are simulation-only metadata; the receiver
    chain works from ``timestamps`` alone.
    """

    timestamps: np.ndarray
    provenance: np.ndarray
    origin: np.ndarray
    span: int

    def __len__(self):
        return len(self.timestamps)

    def __getitem__(self, i: int) -> DetectionRecord:
        return DetectionRecord(
            int(self.timestamps[i]), PROVENANCE_NAMES[int(self.provenance[i])], int(self.origin[i])
        )

    def __iter__(self) -> Iterator[DetectionRecord]:
        for i in range(len(self)):
            yield self[i]


def incident_lambda(launch_photons: float, attenuation_db: float) -> float:
    if launch_photons < 0 or attenuation_db < 0:
        raise ValueError("inputs must be nonnegative")
    return launch_photons * 10.0 ** (-attenuation_db / 10.0)


def leak_lambda_per_slot(lambda_pulse: float, det: DetectorConfig, slots_per_frame: int) -> float:
    """Incident photons in one nominally empty slot of a PPM frame."""
    leak = lambda_pulse * 10.0 ** (-det.extinction_ratio_db / 10.0)
    if det.extinction_mode == "aggregate":
        return leak / (slots_per_frame - 1)
    return leak


def expected_frame_mu(cfg: LinkConfig) -> float:
    """Mean detections inside the 2^M data slots of one PPM frame.

    Dead time is ignored; dark counts are integrated over the data slots
    only, because guard-region events do not count toward a frame.
    """
    geom = frame_geometry(cfg)
    det = cfg.detector
    signal = cfg.lambda_pulse * det.efficiency
    dark = det.dark_count_rate * geom.ppm_frame_duration / PS_PER_S
    leak = leak_lambda_per_slot(cfg.lambda_pulse, det, geom.slots_per_ppm_frame)
    leak *= (geom.slots_per_ppm_frame - 1) * det.efficiency
    return signal + dark + leak


def merges_pulse_photons(det: DetectorConfig) -> bool:
    """True when dead time always swallows a second photon from the same pulse.

    Photons of one pulse are spread only by jitter; a dead time beyond ten
    jitter sigmas (or any dead time with zero jitter) makes the detector a
    click detector per pulse.
    """
    return det.dead_time > 10 * det.jitter_sigma


def single_count_probability(cfg: LinkConfig) -> float:
    """P(exactly one detection in a frame's data slots).

    Photon-number-resolving case: Poisson(mu). Click case: the pulse gives at
    most one click with probability ``1 - exp(-signal)``, while noise counts
    (dark + leakage) stay Poisson since they rarely fall within a dead time.
    """
    mu = expected_frame_mu(cfg)
    if not merges_pulse_photons(cfg.detector):
        return mu * math.exp(-mu)
    signal = cfg.lambda_pulse * cfg.detector.efficiency
    noise = mu - signal
    return (1.0 - math.exp(-signal)) * math.exp(-noise) + math.exp(-signal) * noise * math.exp(-noise)


def analytic_fer(cfg: LinkConfig) -> float:
    return 1.0 - single_count_probability(cfg)


def apply_dead_time(times: np.ndarray, dead_time: int) -> np.ndarray:
    """Indices of sorted ``times`` that survive a non-paralyzable dead time."""
    if dead_time <= 0 or len(times) == 0:
        return np.arange(len(times))
    gaps = np.diff(times)
    if gaps.size == 0 or gaps.min() >= dead_time:
        return np.arange(len(times))
    keep = []
    last = None
    for i, t in enumerate(times.tolist()):
        if last is None or t - last >= dead_time:
            keep.append(i)
            last = t
    return np.asarray(keep, dtype=np.int64)


def detect(
    schedule: PulseSchedule,
    clock: ClockPath,
    det: DetectorConfig,
    lambda_pulse: float,
    rng: np.random.Generator,
    span: int | None = None,
) -> DetectionStream:
    """Turn a pulse schedule into receiver timestamps."""
    span = schedule.span if span is None else int(span)
    geom = schedule.geometry
    sigma = det.jitter_sigma
    local = to_local_time(clock, schedule.ideal_time)
    if clock.white_phase_noise_rms > 0:
        local = local + rng.normal(0.0, clock.white_phase_noise_rms, len(local))

    # signal: Poisson thinning by efficiency
    k = rng.poisson(lambda_pulse * det.efficiency, len(local))
    sig_origin = np.repeat(np.arange(len(local)), k)
    sig_t = local[sig_origin]

    # leakage into the empty slots of PPM frames
    q = geom.slots_per_ppm_frame
    per_frame = leak_lambda_per_slot(lambda_pulse, det, q) * (q - 1) * det.efficiency
    data_idx = np.flatnonzero(schedule.kind == DATA)
    n_leak = rng.poisson(per_frame, len(data_idx)) if per_frame > 0 else np.zeros(len(data_idx), np.int64)
    leak_origin = np.repeat(data_idx, n_leak)
    if leak_origin.size:
        sent = schedule.slot[leak_origin]
        other = rng.integers(1, q, leak_origin.size)  # 1..q-1, skip the pulse slot
        other = other + (other >= sent)
        ideal = schedule.ideal_time[leak_origin] + (other - sent) * geom.slot_width
        leak_t = to_local_time(clock, np.clip(ideal, 0, clock.span))
    else:
        leak_t = np.empty(0)

    n_dark = rng.poisson(det.dark_count_rate * span / PS_PER_S)
    dark_t = rng.uniform(0.0, span, n_dark)

    t = np.concatenate([sig_t, leak_t, dark_t])
    prov = np.concatenate([
        np.full(sig_t.size, SIGNAL, np.uint8),
        np.full(leak_t.size, LEAK, np.uint8),
        np.full(n_dark, DARK, np.uint8),
    ])
    origin = np.concatenate([sig_origin, leak_origin, np.full(n_dark, -1, np.int64)])
    if sigma > 0:
        jittered = prov != DARK
        t[jittered] += rng.normal(0.0, sigma, int(jittered.sum()))
    t = np.rint(t).astype(np.int64)

    inside = (t >= 0) & (t < span)
    t, prov, origin = t[inside], prov[inside], origin[inside]
    order = np.argsort(t, kind="stable")
    t, prov, origin = t[order], prov[order], origin[order]
    keep = apply_dead_time(t, det.dead_time)
    return DetectionStream(t[keep], prov[keep], origin[keep], span)


def write_timestamps(path, stream: DetectionStream | np.ndarray, provenance=None) -> None:
    """Persist timestamps; ``.csv`` suffix selects CSV, anything else binary.

    Binary records are packed little-endian ``u64`` timestamp (ps) followed by
    a ``u8`` provenance code (0 signal, 1 dark, 2 leak, 255 unknown).
    """
    if isinstance(stream, DetectionStream):
        ts, prov = stream.timestamps, stream.provenance
    else:
        ts = np.asarray(stream)
        prov = np.full(len(ts), 255, np.uint8) if provenance is None else np.asarray(provenance)
    if len(ts) and np.min(ts) < 0:
        raise ValueError("timestamps must be nonnegative")
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["timestamp_ps", "provenance"])
            for t, p in zip(ts.tolist(), prov.tolist()):
                w.writerow([t, PROVENANCE_NAMES.get(p, "unknown")])
    else:
        rec = np.empty(len(ts), dtype=RECORD_DTYPE)
        rec["timestamp"] = ts
        rec["provenance"] = prov
        path.write_bytes(rec.tobytes())


def read_timestamps(path) -> tuple[np.ndarray, np.ndarray]:
    """Load ``(timestamps int64, provenance uint8)`` from either file form."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        ts, prov = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                ts.append(int(row["timestamp_ps"]))
                prov.append(_PROVENANCE_CODES.get(row.get("provenance") or "", 255))
        return np.asarray(ts, np.int64), np.asarray(prov, np.uint8)
    raw = path.read_bytes()
    if len(raw) % RECORD_DTYPE.itemsize:
        raise ValueError(f"{path}: size is not a multiple of {RECORD_DTYPE.itemsize}-byte records")
    rec = np.frombuffer(raw, dtype=RECORD_DTYPE)
    return rec["timestamp"].astype(np.int64), rec["provenance"].copy()


def poisson_erasure_prob(mu: float) -> float:
    """Probability a frame sees zero or two-plus detections."""
    return 1.0 - mu * math.exp(-mu)
